#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "acmap/adapter.hpp"
#include "acmap/backbone.hpp"
#include "acmap/classifier.hpp"
#include "acmap/merging.hpp"
#include "acmap/prototype.hpp"
#include "acmap/stream.hpp"

namespace acmap {

enum class Method { acmap, acmap_no_ir, acmap_no_cm, simplecil, ensemble };

std::string method_name(Method m);
Method parse_method(const std::string& name);

struct AdapterConfig {
    std::size_t bottleneck = 8;  // r
    double scale = 1.5;
};

struct PhaseTiming {
    double train_ms = 0.0;
    double prototype_ms = 0.0;
    double mapping_ms = 0.0;
    double eval_ms = 0.0;  // median over eval_reps repetitions
    std::uint64_t eval_forward_passes = 0;
    std::uint64_t eval_queries = 0;

    bool operator==(const PhaseTiming&) const = default;
};

// Everything a run reports. The config echo is the flat resolved key=value
// settings of the experiment, sufficient to reproduce the run.
struct RunReport {
    std::string method;
    std::uint64_t seed = 0;
    std::map<std::string, std::string> config_echo;
    std::vector<double> per_task_accuracy;  // top-1 on the cumulative eval set
    double avg_accuracy = 0.0;              // mean of per_task_accuracy
    double final_accuracy = 0.0;            // last entry
    std::vector<double> forward_passes_per_query;  // structural, per task
    std::vector<PhaseTiming> timing;
    std::uint64_t data_access_violations = 0;
    bool aborted = false;      // divergence cut the run short
    std::string abort_reason;  // empty unless aborted

    bool operator==(const RunReport&) const = default;
};

struct RunOptions {
    std::uint64_t seed = 1993;  // base for per-task training seeds
    AdapterConfig adapter;
    Split proto_split = Split::train;
    bool diagnostics = false;  // retain snapshots, shifts and P_t(prev) for analysis
    Exec exec = Exec::parallel;
    int eval_reps = 1;  // eval phase timing repetitions (median)
};

// Outputs beyond the report, retained for the diagnostics module and tests.
struct RunArtifacts {
    RunReport report;
    std::optional<MergeTrail> trail;
    PrototypeStore store;  // raw and mapped prototypes, keyed (task, tag)
    std::vector<AdapterWeights> task_adapters;  // per-task adapters (diagnostics / ensemble)
    std::map<std::uint32_t, PrototypeMatrix> proto_under_prev;  // t -> P_t under snapshot t-1
    std::map<std::pair<std::uint32_t, std::uint32_t>, CentroidShift> shifts;  // (task, to_tag)
    std::vector<CentroidShift> step_shifts;  // consecutive-snapshot shifts, index 0 = tag 1->2
    Split proto_split = Split::train;
    bool diagnostics = false;
};

// Per-task training seed; shared by every method so that identical seeds
// give identical task-1 adapters across methods.
std::uint64_t task_train_seed(std::uint64_t base, std::uint32_t task);

// The full incremental loop: train-and-merge while should_merge(t, L), task
// prototypes under the current merged adapter, centroid mapping of stale
// past-task prototypes when cm_enabled, cosine classifier, cumulative
// evaluation with exactly one backbone pass per query.
RunArtifacts run_acmap(TaskStream& stream, const BackboneConfig& backbone_cfg,
                       const TrainConfig& train_cfg, std::optional<std::size_t> early_stop,
                       bool ir_enabled, bool cm_enabled, const RunOptions& opts);

// Prototype classifier over the raw frozen backbone; no training at all.
RunArtifacts run_simplecil(TaskStream& stream, const BackboneConfig& backbone_cfg,
                           const RunOptions& opts);

// Per-task-adapter ensemble cost baseline: keeps every task adapter, extracts
// one feature block per adapter for each query (t passes at task t), and
// zero-fills past-task prototypes in subspaces created after their data was
// gone. Exists to expose the O(T) inference cost scaling.
RunArtifacts run_ensemble_baseline(TaskStream& stream, const BackboneConfig& backbone_cfg,
                                   const TrainConfig& train_cfg, const RunOptions& opts);

// (mean, last). Mean uses compensated summation.
std::pair<double, double> compute_metrics(const std::vector<double>& per_task_accuracy);

}  // namespace acmap
