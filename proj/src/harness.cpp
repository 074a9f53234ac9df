#include "acmap/harness.hpp"
#include <limits>

#include <algorithm>
#include <chrono>
#include <cmath>

#include "acmap/rng.hpp"

namespace acmap {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

Batch cumulative_eval_batch(TaskStream& stream, std::uint32_t t) {
    Batch all;
    for (std::uint32_t i = 1; i <= t; ++i) {
        Batch part = stream.eval_batch(i);
        all.insert(all.end(), part.begin(), part.end());
    }
    return all;
}

double top1_accuracy(const std::vector<std::uint32_t>& predictions, const Batch& batch) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < batch.size(); ++i)
        if (predictions[i] == batch[i].label) ++correct;
    return double(correct) / double(batch.size());
}

struct EvalOutcome {
    double accuracy = 0.0;
    std::uint64_t forwards = 0;
    std::uint64_t queries = 0;
    double wall_ms = 0.0;
};

// Runs `evaluate` eval_reps times; the forward count comes from the first
// repetition, so the structural counters never depend on timing repetitions.
// The reported wall time is the fastest repetition, the usual noise-floor
// estimate of the deterministic work.
template <typename EvalFn>
EvalOutcome timed_eval(const Backbone& backbone, const Batch& eval_batch, int reps, EvalFn&& fn) {
    EvalOutcome out;
    out.queries = eval_batch.size();
    double best = std::numeric_limits<double>::infinity();
    for (int rep = 0; rep < std::max(1, reps); ++rep) {
        const std::uint64_t before = backbone.forward_count();
        const Clock::time_point start = Clock::now();
        const double accuracy = fn();
        best = std::min(best, ms_since(start));
        if (rep == 0) {
            out.accuracy = accuracy;
            out.forwards = backbone.forward_count() - before;
        }
    }
    out.wall_ms = best;
    return out;
}

}  // namespace

std::string method_name(Method m) {
    switch (m) {
        case Method::acmap: return "acmap";
        case Method::acmap_no_ir: return "acmap_no_ir";
        case Method::acmap_no_cm: return "acmap_no_cm";
        case Method::simplecil: return "simplecil";
        case Method::ensemble: return "ensemble";
    }
    throw ConfigError("unknown method enum value");
}

Method parse_method(const std::string& name) {
    if (name == "acmap") return Method::acmap;
    if (name == "acmap_no_ir") return Method::acmap_no_ir;
    if (name == "acmap_no_cm") return Method::acmap_no_cm;
    if (name == "simplecil") return Method::simplecil;
    if (name == "ensemble") return Method::ensemble;
    throw ConfigError("unknown method '" + name + "'");
}

std::uint64_t task_train_seed(std::uint64_t base, std::uint32_t task) {
    return derive_seed(base, "train_task", task);
}

std::pair<double, double> compute_metrics(const std::vector<double>& per_task_accuracy) {
    if (per_task_accuracy.empty()) throw DataError("compute_metrics: empty accuracy list");
    double sum = 0.0;
    double comp = 0.0;
    for (double a : per_task_accuracy) {
        if (!(a >= 0.0 && a <= 1.0)) {
            throw DataError("compute_metrics: accuracy outside [0,1]");
        }
        const double t = sum + a;
        if (std::abs(sum) >= std::abs(a)) {
            comp += (sum - t) + a;
        } else {
            comp += (a - t) + sum;
        }
        sum = t;
    }
    const double n = double(per_task_accuracy.size());
    return {sum / n + comp / n, per_task_accuracy.back()};
}

RunArtifacts run_acmap(TaskStream& stream, const BackboneConfig& backbone_cfg,
                       const TrainConfig& train_cfg, std::optional<std::size_t> early_stop,
                       bool ir_enabled, bool cm_enabled, const RunOptions& opts) {
    validate_train_config(train_cfg);
    if (early_stop && *early_stop < 1) throw ConfigError("early-stop threshold must be >= 1");
    const Backbone backbone(backbone_cfg);
    stream.reset_violations();
    stream.set_diagnostics_mode(false);

    RunArtifacts art;
    art.diagnostics = opts.diagnostics;
    art.proto_split = opts.proto_split;
    if (cm_enabled) {
        art.report.method = ir_enabled ? "acmap" : "acmap_no_ir";
    } else {
        art.report.method = ir_enabled ? "acmap_no_cm" : "acmap_no_ir_no_cm";
    }
    art.report.seed = opts.seed;

    AdapterWeights theta_init =
        init_adapter(backbone_cfg.n_blocks, backbone_cfg.embed_dim, opts.adapter.bottleneck,
                     opts.adapter.scale, nullptr, derive_seed(opts.seed, "adapter_init"));
    MergeTrail trail(std::move(theta_init), early_stop, ir_enabled);

    const std::size_t n_tasks = stream.task_count();
    for (std::uint32_t t = 1; t <= n_tasks; ++t) {
        stream.begin_phase(t);
        PhaseTiming timing;

        if (should_merge(t, early_stop)) {
            const Clock::time_point start = Clock::now();
            TrainConfig cfg = train_cfg;
            cfg.seed = task_train_seed(opts.seed, t);
            AdapterWeights theta_t;
            try {
                theta_t = train_task_adapter(backbone, trail.init_weights(),
                                             stream.train_batch(t), cfg);
            } catch (const DivergenceError& e) {
                // abort with the partial report covering the finished tasks
                art.report.aborted = true;
                art.report.abort_reason = e.what();
                break;
            }
            trail.merge_step(theta_t);
            timing.train_ms = ms_since(start);
            if (opts.diagnostics) art.task_adapters.push_back(std::move(theta_t));
        } else {
            trail.merge_step(trail.current());  // counter advances, weights frozen
        }

        const std::uint32_t cur_tag = trail.current_tag();
        const AdapterWeights& current = trail.current();
        const TaskDataset& task = stream.task(t);

        Clock::time_point start = Clock::now();
        const Batch proto_batch =
            opts.proto_split == Split::train ? stream.train_batch(t) : stream.eval_batch(t);
        PrototypeMatrix p_t_cur = compute_prototypes(backbone, &current, proto_batch, t, cur_tag,
                                                     &task.class_ids, opts.exec);
        timing.prototype_ms = ms_since(start);

        // Centroid mapping for stale past-task prototypes. The shift for each
        // earlier snapshot is measured on the current task's data, which is
        // the only data available at this phase. Nothing is stale once the
        // merge is frozen: later tasks' prototypes are born in the final
        // subspace.
        start = Clock::now();
        const bool new_snapshot = cur_tag == t;
        if (new_snapshot && t >= 2 && (cm_enabled || opts.diagnostics)) {
            for (std::uint32_t i = 1; i < t; ++i) {
                PrototypeMatrix p_t_old = compute_prototypes(
                    backbone, &trail.snapshot(i), proto_batch, t, i, &task.class_ids, opts.exec);
                CentroidShift shift = centroid_shift(p_t_cur, p_t_old);
                art.shifts[{i, cur_tag}] = shift;
                if (i + 1 == t) {
                    art.step_shifts.push_back(shift);
                    if (opts.diagnostics) art.proto_under_prev.emplace(t, std::move(p_t_old));
                }
                if (cm_enabled) {
                    art.store.put(centroid_map(art.store.get(i, i), shift));
                }
            }
        }
        timing.mapping_ms = ms_since(start);

        art.store.put(std::move(p_t_cur));

        const ClassifierWeights classifier = build_classifier(
            art.store, cur_tag, cm_enabled ? StaleFallback::forbid : StaleFallback::allow);

        const Batch eval = cumulative_eval_batch(stream, t);
        const EvalOutcome outcome =
            timed_eval(backbone, eval, opts.eval_reps, [&]() {
                const Matrix feats = backbone.features(eval, &current, opts.exec);
                return top1_accuracy(predict_batch(classifier, feats, opts.exec), eval);
            });
        timing.eval_ms = outcome.wall_ms;
        timing.eval_forward_passes = outcome.forwards;
        timing.eval_queries = outcome.queries;

        art.report.per_task_accuracy.push_back(outcome.accuracy);
        art.report.forward_passes_per_query.push_back(double(outcome.forwards) /
                                                      double(outcome.queries));
        art.report.timing.push_back(timing);
    }

    if (!art.report.per_task_accuracy.empty()) {
        std::tie(art.report.avg_accuracy, art.report.final_accuracy) =
            compute_metrics(art.report.per_task_accuracy);
    }
    art.report.data_access_violations = stream.violation_count();
    art.trail.emplace(std::move(trail));
    return art;
}

RunArtifacts run_simplecil(TaskStream& stream, const BackboneConfig& backbone_cfg,
                           const RunOptions& opts) {
    const Backbone backbone(backbone_cfg);
    stream.reset_violations();
    stream.set_diagnostics_mode(false);

    RunArtifacts art;
    art.proto_split = opts.proto_split;
    art.report.method = "simplecil";
    art.report.seed = opts.seed;

    const std::size_t n_tasks = stream.task_count();
    for (std::uint32_t t = 1; t <= n_tasks; ++t) {
        stream.begin_phase(t);
        PhaseTiming timing;

        Clock::time_point start = Clock::now();
        const Batch proto_batch =
            opts.proto_split == Split::train ? stream.train_batch(t) : stream.eval_batch(t);
        art.store.put(compute_prototypes(backbone, nullptr, proto_batch, t, 0,
                                         &stream.task(t).class_ids, opts.exec));
        timing.prototype_ms = ms_since(start);

        const ClassifierWeights classifier = build_classifier(art.store, 0);
        const Batch eval = cumulative_eval_batch(stream, t);
        const EvalOutcome outcome =
            timed_eval(backbone, eval, opts.eval_reps, [&]() {
                const Matrix feats = backbone.features(eval, nullptr, opts.exec);
                return top1_accuracy(predict_batch(classifier, feats, opts.exec), eval);
            });
        timing.eval_ms = outcome.wall_ms;
        timing.eval_forward_passes = outcome.forwards;
        timing.eval_queries = outcome.queries;

        art.report.per_task_accuracy.push_back(outcome.accuracy);
        art.report.forward_passes_per_query.push_back(double(outcome.forwards) /
                                                      double(outcome.queries));
        art.report.timing.push_back(timing);
    }

    std::tie(art.report.avg_accuracy, art.report.final_accuracy) =
        compute_metrics(art.report.per_task_accuracy);
    art.report.data_access_violations = stream.violation_count();
    return art;
}

RunArtifacts run_ensemble_baseline(TaskStream& stream, const BackboneConfig& backbone_cfg,
                                   const TrainConfig& train_cfg, const RunOptions& opts) {
    validate_train_config(train_cfg);
    const Backbone backbone(backbone_cfg);
    stream.reset_violations();
    stream.set_diagnostics_mode(false);

    RunArtifacts art;
    art.proto_split = opts.proto_split;
    art.report.method = "ensemble";
    art.report.seed = opts.seed;

    const AdapterWeights theta_init =
        init_adapter(backbone_cfg.n_blocks, backbone_cfg.embed_dim, opts.adapter.bottleneck,
                     opts.adapter.scale, nullptr, derive_seed(opts.seed, "adapter_init"));
    const std::size_t d = backbone_cfg.embed_dim;
    const std::size_t n_tasks = stream.task_count();

    for (std::uint32_t t = 1; t <= n_tasks; ++t) {
        stream.begin_phase(t);
        PhaseTiming timing;

        Clock::time_point start = Clock::now();
        TrainConfig cfg = train_cfg;
        cfg.seed = task_train_seed(opts.seed, t);
        art.task_adapters.push_back(
            train_task_adapter(backbone, theta_init, stream.train_batch(t), cfg));
        timing.train_ms = ms_since(start);

        // current task's prototypes in every subspace available so far
        start = Clock::now();
        const Batch proto_batch =
            opts.proto_split == Split::train ? stream.train_batch(t) : stream.eval_batch(t);
        for (std::uint32_t i = 1; i <= t; ++i) {
            art.store.put(compute_prototypes(backbone, &art.task_adapters[i - 1], proto_batch, t,
                                             i, &stream.task(t).class_ids, opts.exec));
        }
        timing.prototype_ms = ms_since(start);

        // concatenated classifier: row per class, one d-wide block per
        // subspace; blocks for subspaces newer than the class's task are
        // unavailable in the exemplar-free setting and stay zero
        std::size_t total_rows = 0;
        for (std::uint32_t j = 1; j <= t; ++j) total_rows += stream.task(j).class_ids.size();
        ClassifierWeights classifier;
        classifier.w = Matrix(total_rows, d * t);
        std::size_t row = 0;
        for (std::uint32_t j = 1; j <= t; ++j) {
            const std::vector<std::uint32_t>& ids = stream.task(j).class_ids;
            for (std::size_t c = 0; c < ids.size(); ++c, ++row) {
                classifier.class_ids.push_back(ids[c]);
                for (std::uint32_t i = 1; i <= std::min(j, t); ++i) {
                    const PrototypeMatrix& p = art.store.get(j, i);
                    std::copy(p.rows.row_ptr(c), p.rows.row_ptr(c) + d,
                              classifier.w.row_ptr(row) + (i - 1) * d);
                }
            }
        }

        const Batch eval = cumulative_eval_batch(stream, t);
        const EvalOutcome outcome = timed_eval(backbone, eval, opts.eval_reps, [&]() {
            Matrix feats(eval.size(), d * t);
            for (std::uint32_t i = 1; i <= t; ++i) {
                const Matrix block = backbone.features(eval, &art.task_adapters[i - 1], opts.exec);
                for (std::size_t q = 0; q < eval.size(); ++q) {
                    std::copy(block.row_ptr(q), block.row_ptr(q) + d,
                              feats.row_ptr(q) + (i - 1) * d);
                }
            }
            return top1_accuracy(predict_batch(classifier, feats, opts.exec), eval);
        });
        timing.eval_ms = outcome.wall_ms;
        timing.eval_forward_passes = outcome.forwards;
        timing.eval_queries = outcome.queries;

        art.report.per_task_accuracy.push_back(outcome.accuracy);
        art.report.forward_passes_per_query.push_back(double(outcome.forwards) /
                                                      double(outcome.queries));
        art.report.timing.push_back(timing);
    }

    std::tie(art.report.avg_accuracy, art.report.final_accuracy) =
        compute_metrics(art.report.per_task_accuracy);
    art.report.data_access_violations = stream.violation_count();
    return art;
}

}  // namespace acmap
