#include "acmap/diagnostics.hpp"

#include <algorithm>

namespace acmap {

namespace {

// Restores the stream's diagnostics flag on scope exit.
struct DiagnosticsScope {
    TaskStream& stream;
    bool previous;
    explicit DiagnosticsScope(TaskStream& s) : stream(s), previous(s.diagnostics_mode()) {
        stream.set_diagnostics_mode(true);
    }
    ~DiagnosticsScope() { stream.set_diagnostics_mode(previous); }
};

// Shift from snapshot `from_tag` to `to_tag`, measured on task `to_tag`'s
// prototype data. Prefers the shift recorded during the run; recomputes it
// deterministically from the snapshots otherwise.
CentroidShift chain_step(const Backbone& backbone, TaskStream& stream,
                         const RunArtifacts& artifacts, std::uint32_t from_tag,
                         std::uint32_t to_tag) {
    const auto it = artifacts.shifts.find({from_tag, to_tag});
    if (it != artifacts.shifts.end()) return it->second;
    const MergeTrail& trail = *artifacts.trail;
    const Batch data = stream.diagnostic_batch(to_tag, artifacts.proto_split);
    const std::vector<std::uint32_t>& classes = stream.task(to_tag).class_ids;
    const PrototypeMatrix p_new = compute_prototypes(backbone, &trail.snapshot(to_tag), data,
                                                     to_tag, to_tag, &classes);
    const PrototypeMatrix p_old = compute_prototypes(backbone, &trail.snapshot(from_tag), data,
                                                     to_tag, from_tag, &classes);
    return centroid_shift(p_new, p_old);
}

}  // namespace

std::string variant_name(AlignmentVariant v) {
    switch (v) {
        case AlignmentVariant::mapped: return "mapped";
        case AlignmentVariant::unmapped: return "unmapped";
        case AlignmentVariant::sdc: return "sdc";
    }
    throw ConfigError("unknown alignment variant");
}

AlignmentSeries cosine_alignment_curve(const Backbone& backbone, TaskStream& stream,
                                       const RunArtifacts& artifacts, std::uint32_t anchor_task,
                                       AlignmentVariant variant) {
    return cosine_alignment_curve(backbone, stream, artifacts, anchor_task, variant,
                                  artifacts.proto_split);
}

AlignmentSeries cosine_alignment_curve(const Backbone& backbone, TaskStream& stream,
                                       const RunArtifacts& artifacts, std::uint32_t anchor_task,
                                       AlignmentVariant variant, Split true_split) {
    if (!artifacts.trail) {
        throw IncompleteArtifactsError("alignment curve needs the run's merge trail");
    }
    const MergeTrail& trail = *artifacts.trail;
    const std::size_t n_tasks = stream.task_count();
    const std::uint32_t last_tag = trail.current_tag();
    if (anchor_task < 1 || anchor_task > n_tasks) {
        throw ConfigError("anchor task out of range");
    }
    DiagnosticsScope scope(stream);

    const std::uint32_t anchor_tag =
        std::min<std::uint32_t>(anchor_task, last_tag);  // tag the anchor's raw prototypes carry
    const PrototypeMatrix& raw = artifacts.store.get(anchor_task, anchor_tag);
    const Batch anchor_data = stream.diagnostic_batch(anchor_task, true_split);

    AlignmentSeries series;
    series.anchor_task = anchor_task;
    series.variant = variant;
    series.class_ids = raw.class_ids;
    for (std::uint32_t t = anchor_task; t <= n_tasks; ++t) series.ts.push_back(t);
    series.per_class = Matrix(raw.class_ids.size(), series.ts.size());
    series.mean_curve.resize(series.ts.size());

    // true prototypes only depend on the snapshot, cache per distinct tag
    std::map<std::uint32_t, PrototypeMatrix> true_protos;
    std::map<std::uint32_t, PrototypeMatrix> candidates;

    for (std::size_t col = 0; col < series.ts.size(); ++col) {
        const std::uint32_t t = series.ts[col];
        const std::uint32_t tag = std::min<std::uint32_t>(t, last_tag);
        if (!true_protos.count(tag)) {
            true_protos.emplace(
                tag, compute_prototypes(backbone, &trail.snapshot(tag), anchor_data, anchor_task,
                                        tag, &raw.class_ids));
        }
        if (!candidates.count(tag)) {
            PrototypeMatrix candidate = raw;
            if (variant == AlignmentVariant::mapped && tag != anchor_tag) {
                candidate = centroid_map(
                    raw, chain_step(backbone, stream, artifacts, anchor_tag, tag));
            } else if (variant == AlignmentVariant::sdc && tag != anchor_tag) {
                std::vector<CentroidShift> steps;
                for (std::uint32_t j = anchor_tag; j < tag; ++j) {
                    steps.push_back(chain_step(backbone, stream, artifacts, j, j + 1));
                }
                candidate = sdc_map(raw, steps);
            }
            candidates.emplace(tag, std::move(candidate));
        }
        const PrototypeMatrix& truth = true_protos.at(tag);
        const PrototypeMatrix& candidate = candidates.at(tag);
        double mean = 0.0;
        for (std::size_t c = 0; c < raw.class_ids.size(); ++c) {
            Vector a(candidate.rows.row_ptr(c), candidate.rows.row_ptr(c) + candidate.rows.cols());
            Vector b(truth.rows.row_ptr(c), truth.rows.row_ptr(c) + truth.rows.cols());
            const double cos = cosine_sim(a, b);
            series.per_class(c, col) = cos;
            mean += cos;
        }
        series.mean_curve[col] = mean / double(raw.class_ids.size());
    }
    return series;
}

std::vector<std::pair<std::uint32_t, double>> merge_convergence_curve(
    const RunArtifacts& artifacts) {
    if (!artifacts.trail) {
        throw IncompleteArtifactsError("convergence curve needs the run's merge trail");
    }
    if (artifacts.trail->snapshot_count() < 2) {
        throw DataError("convergence curve needs at least 2 merged tasks");
    }
    std::vector<std::pair<std::uint32_t, double>> curve;
    for (std::uint32_t t = 2; t <= artifacts.trail->snapshot_count(); ++t) {
        const auto it = artifacts.proto_under_prev.find(t);
        if (it == artifacts.proto_under_prev.end()) {
            throw IncompleteArtifactsError(
                "convergence curve needs P_t under the previous snapshot; run with diagnostics");
        }
        const PrototypeMatrix& prev = it->second;
        const PrototypeMatrix& cur = artifacts.store.get(t, t);
        double mean = 0.0;
        for (std::size_t c = 0; c < cur.rows.rows(); ++c) {
            Vector a(prev.rows.row_ptr(c), prev.rows.row_ptr(c) + prev.rows.cols());
            Vector b(cur.rows.row_ptr(c), cur.rows.row_ptr(c) + cur.rows.cols());
            mean += cosine_sim(a, b);
        }
        curve.emplace_back(t, mean / double(cur.rows.rows()));
    }
    return curve;
}

}  // namespace acmap
