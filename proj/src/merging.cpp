#include "acmap/merging.hpp"

#include <cmath>

#include "acmap/classifier.hpp"
#include "acmap/prototype.hpp"
#include "acmap/stream.hpp"

namespace acmap {

bool should_merge(std::size_t t, std::optional<std::size_t> early_stop) {
    if (t < 1) throw ConfigError("should_merge: task index must be >= 1");
    return !early_stop || t <= *early_stop;
}

MergeTrail::MergeTrail(AdapterWeights initial, std::optional<std::size_t> early_stop,
                       bool ir_enabled)
    : init_weights_(std::move(initial)), early_stop_(early_stop), ir_enabled_(ir_enabled) {
    validate_adapter_shapes(init_weights_);
    if (early_stop_ && *early_stop_ < 1) {
        throw ConfigError("merge trail: early-stop threshold must be >= 1");
    }
}

void MergeTrail::merge_step(const AdapterWeights& theta_t) {
    if (theta_t.n_blocks() != init_weights_.n_blocks() ||
        theta_t.embed_dim() != init_weights_.embed_dim() ||
        theta_t.bottleneck() != init_weights_.bottleneck()) {
        throw ShapeError("merge_step: adapter shapes do not match the trail");
    }
    const std::size_t t = ++merge_count_;
    if (t == 1) {
        snapshots_.push_back(theta_t);
        if (ir_enabled_) init_weights_ = theta_t;
        return;
    }
    if (early_stop_ && t > *early_stop_) return;  // merge frozen, counter still advances

    // (1 - 1/t)*prev + (1/t)*theta in the incremental form prev + (theta -
    // prev)/t: same average, and merging a snapshot into itself is exact.
    const double inv_t = 1.0 / double(t);
    AdapterWeights merged = snapshots_.back();
    for (std::size_t b = 0; b < merged.n_blocks(); ++b) {
        double* down = merged.blocks[b].down.data().data();
        const double* tdown = theta_t.blocks[b].down.data().data();
        for (std::size_t i = 0; i < merged.blocks[b].down.size(); ++i)
            down[i] += (tdown[i] - down[i]) * inv_t;
        double* up = merged.blocks[b].up.data().data();
        const double* tup = theta_t.blocks[b].up.data().data();
        for (std::size_t i = 0; i < merged.blocks[b].up.size(); ++i)
            up[i] += (tup[i] - up[i]) * inv_t;
    }
    snapshots_.push_back(std::move(merged));
}

const AdapterWeights& MergeTrail::snapshot(std::size_t i) const {
    if (i < 1 || i > snapshots_.size()) {
        throw IncompleteArtifactsError("merge trail has no snapshot " + std::to_string(i));
    }
    return snapshots_[i - 1];
}

const AdapterWeights& MergeTrail::current() const {
    if (snapshots_.empty()) throw IncompleteArtifactsError("merge trail is empty");
    return snapshots_.back();
}

std::uint32_t MergeTrail::current_tag() const {
    return static_cast<std::uint32_t>(snapshots_.size());
}

AdapterWeights interpolate3(const AdapterWeights& a, const AdapterWeights& b,
                            const AdapterWeights& c, const InterpolationPoint& p) {
    if (a.n_blocks() != b.n_blocks() || a.n_blocks() != c.n_blocks() ||
        a.embed_dim() != b.embed_dim() || a.embed_dim() != c.embed_dim() ||
        a.bottleneck() != b.bottleneck() || a.bottleneck() != c.bottleneck()) {
        throw ShapeError("interpolate3: adapter shapes do not match");
    }
    if (!(p.u >= 0.0 && p.v >= 0.0 && p.u <= 1.0 && p.v <= 1.0 && p.u + p.v <= 1.0)) {
        throw ConfigError("interpolate3: point outside the simplex");
    }
    // vertices return their input bitwise
    if (p.u == 1.0) return a;
    if (p.v == 1.0) return b;
    if (p.u == 0.0 && p.v == 0.0) return c;

    const double w = 1.0 - p.u - p.v;
    AdapterWeights out = a;
    for (std::size_t blk = 0; blk < out.n_blocks(); ++blk) {
        for (auto [dst, mb, mc] : {std::tuple{&out.blocks[blk].down, &b.blocks[blk].down,
                                              &c.blocks[blk].down},
                                   std::tuple{&out.blocks[blk].up, &b.blocks[blk].up,
                                              &c.blocks[blk].up}}) {
            double* o = dst->data().data();
            const double* pb = mb->data().data();
            const double* pc = mc->data().data();
            for (std::size_t i = 0; i < dst->size(); ++i)
                o[i] = p.u * o[i] + p.v * pb[i] + w * pc[i];
        }
    }
    return out;
}

namespace {

// Shared protocol for the landscape scan and standalone vertex errors:
// prototypes from each task's train split, top-1 error on combined evals.
double interpolation_error(const Backbone& backbone, const AdapterWeights& adapter,
                           std::span<const TaskDataset> tasks, Exec exec) {
    PrototypeStore store;
    for (const TaskDataset& task : tasks) {
        store.put(compute_prototypes(backbone, &adapter, task.batch(Split::train), task.task_id, 1,
                                     &task.class_ids, exec));
    }
    ClassifierWeights weights = build_classifier(store, 1);
    std::size_t wrong = 0;
    std::size_t total = 0;
    for (const TaskDataset& task : tasks) {
        const Batch eval = task.batch(Split::eval);
        const Matrix feats = backbone.features(eval, &adapter, exec);
        const std::vector<std::uint32_t> pred = predict_batch(weights, feats, exec);
        for (std::size_t i = 0; i < eval.size(); ++i)
            if (pred[i] != eval[i].label) ++wrong;
        total += eval.size();
    }
    return double(wrong) / double(total);
}

}  // namespace

double standalone_error(const Backbone& backbone, const AdapterWeights& adapter,
                        std::span<const TaskDataset> tasks, Exec exec) {
    if (tasks.empty()) throw DataError("standalone_error: no tasks");
    return interpolation_error(backbone, adapter, tasks, exec);
}

LandscapeGrid landscape_scan(const Backbone& backbone, const AdapterWeights& a,
                             const AdapterWeights& b, const AdapterWeights& c,
                             std::span<const TaskDataset> tasks, std::size_t grid_size,
                             Exec exec) {
    if (grid_size < 2) throw ConfigError("landscape_scan: grid size must be >= 2");
    if (tasks.empty()) throw DataError("landscape_scan: empty test set");
    for (const TaskDataset& task : tasks) {
        if (task.eval_idx.empty()) throw DataError("landscape_scan: empty eval split");
    }
    LandscapeGrid grid;
    grid.grid_size = grid_size;
    grid.error.assign(grid_size * grid_size, std::nan(""));
    const double denom = double(grid_size - 1);
    for (std::size_t i = 0; i < grid_size; ++i) {
        for (std::size_t j = 0; j + i < grid_size; ++j) {
            InterpolationPoint p{double(i) / denom, double(j) / denom};
            const AdapterWeights theta = interpolate3(a, b, c, p);
            grid.at(i, j) = interpolation_error(backbone, theta, tasks, exec);
        }
    }
    return grid;
}

}  // namespace acmap
