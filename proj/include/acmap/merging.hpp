#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "acmap/adapter.hpp"
#include "acmap/backbone.hpp"

namespace acmap {

struct TaskDataset;

// true iff task t should still train and merge; L empty means no limit.
bool should_merge(std::size_t t, std::optional<std::size_t> early_stop);

// Running-average merge state. Snapshot k holds the merged weights after k
// tasks; once the early-stop threshold L is reached the last snapshot is
// frozen and later merge steps only advance the counter.
class MergeTrail {
public:
    MergeTrail(AdapterWeights initial, std::optional<std::size_t> early_stop, bool ir_enabled);

    // Folds theta_t in: snapshot_1 = theta_1 (replacing the shared init when
    // IR is on), then each later snapshot is (1-1/t)*prev + (1/t)*theta_t.
    void merge_step(const AdapterWeights& theta_t);

    std::size_t merge_count() const { return merge_count_; }
    std::size_t snapshot_count() const { return snapshots_.size(); }
    const AdapterWeights& snapshot(std::size_t i) const;  // 1-based, i <= snapshot_count()
    const AdapterWeights& current() const;
    std::uint32_t current_tag() const;  // min(t, L)
    const AdapterWeights& init_weights() const { return init_weights_; }
    bool ir_enabled() const { return ir_enabled_; }
    std::optional<std::size_t> early_stop() const { return early_stop_; }

private:
    std::vector<AdapterWeights> snapshots_;
    std::size_t merge_count_ = 0;
    AdapterWeights init_weights_;
    std::optional<std::size_t> early_stop_;
    bool ir_enabled_;
};

// Barycentric coordinates over three adapters; w(c) = 1 - u - v.
struct InterpolationPoint {
    double u = 0.0;
    double v = 0.0;
};

// u*a + v*b + (1-u-v)*c entrywise. Vertices return the corresponding input
// bitwise.
AdapterWeights interpolate3(const AdapterWeights& a, const AdapterWeights& b,
                            const AdapterWeights& c, const InterpolationPoint& p);

// Classification-error surface over the (u, v) simplex lattice. Entry (i, j)
// is the error of the adapter interpolated at u=i/(G-1), v=j/(G-1); lattice
// points outside the simplex are NaN.
struct LandscapeGrid {
    std::size_t grid_size = 0;
    std::vector<double> error;  // grid_size x grid_size, row-major over (i, j)

    bool valid(std::size_t i, std::size_t j) const { return i + j <= grid_size - 1; }
    double at(std::size_t i, std::size_t j) const { return error[i * grid_size + j]; }
    double& at(std::size_t i, std::size_t j) { return error[i * grid_size + j]; }
    std::size_t valid_points() const { return grid_size * (grid_size + 1) / 2; }
};

// For each lattice point: rebuild a cosine-prototype classifier from the
// tasks' train splits under the interpolated adapter and measure top-1 error
// on the tasks' combined eval splits.
LandscapeGrid landscape_scan(const Backbone& backbone, const AdapterWeights& a,
                             const AdapterWeights& b, const AdapterWeights& c,
                             std::span<const TaskDataset> tasks, std::size_t grid_size,
                             Exec exec = Exec::parallel);

// Error of a single adapter under the same protocol as landscape_scan; the
// grid's vertices reproduce these values exactly.
double standalone_error(const Backbone& backbone, const AdapterWeights& adapter,
                        std::span<const TaskDataset> tasks, Exec exec = Exec::parallel);

}  // namespace acmap
