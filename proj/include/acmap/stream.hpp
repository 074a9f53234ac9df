#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "acmap/data.hpp"
#include "acmap/numerics.hpp"

namespace acmap {

enum class Split { train, eval };

// One task of a class-incremental stream: samples with global labels from a
// class set disjoint from every other task, plus train/eval index sets.
struct TaskDataset {
    std::uint32_t task_id = 0;  // 1-based position in the stream
    std::vector<Sample> samples;
    std::vector<std::size_t> train_idx;
    std::vector<std::size_t> eval_idx;
    std::vector<std::uint32_t> class_ids;  // sorted

    Batch batch(Split split) const;
};

// Ordered task datasets with phased, access-counted handout. Training and
// prototype code may only touch the current phase's train data; eval data of
// tasks up to the phase is handed out for scoring. Any other access is a
// contract violation unless diagnostics mode is on.
class TaskStream {
public:
    TaskStream() = default;
    explicit TaskStream(std::vector<TaskDataset> tasks);

    std::size_t task_count() const { return tasks_.size(); }
    const TaskDataset& task(std::uint32_t t) const;  // 1-based
    const std::vector<TaskDataset>& tasks() const { return tasks_; }
    std::size_t input_dim() const;

    void begin_phase(std::uint32_t t);
    std::uint32_t phase() const { return phase_; }
    void set_diagnostics_mode(bool on) { diagnostics_ = on; }
    bool diagnostics_mode() const { return diagnostics_; }

    Batch train_batch(std::uint32_t t) const;
    Batch eval_batch(std::uint32_t t) const;
    Batch diagnostic_batch(std::uint32_t t, Split split) const;

    std::uint64_t violation_count() const { return violations_; }
    void reset_violations() { violations_ = 0; }

private:
    std::vector<TaskDataset> tasks_;
    std::uint32_t phase_ = 0;
    bool diagnostics_ = false;
    mutable std::uint64_t violations_ = 0;
};

enum class DriftModel { none, rotation, offset };

// B-m Inc-n synthetic stream: per class a seeded Gaussian cluster whose mean
// sits on a sphere of radius cluster_separation; task t's samples get the
// drift transform applied cumulatively (t-1 times).
struct StreamSpec {
    std::size_t n_tasks = 10;
    std::size_t base_classes = 5;  // m
    std::size_t inc_classes = 5;   // n
    std::size_t train_per_class = 100;
    std::size_t eval_per_class = 50;
    std::size_t input_dim = 48;
    double cluster_separation = 4.0;
    double noise_sigma = 1.0;
    DriftModel drift_model = DriftModel::rotation;
    double drift_rate = 0.4;  // radians/task (rotation) or magnitude/task (offset)
    std::uint64_t seed = 1993;
};

void validate_stream_spec(const StreamSpec& spec);
TaskStream generate_synthetic_stream(const StreamSpec& spec);

// B-m Inc-n partition spec for ingested embedding files. Per class, the last
// round(eval_fraction * count) samples in file order become the eval split.
struct SplitSpec {
    std::size_t base_classes = 0;
    std::size_t inc_classes = 0;
    double eval_fraction = 1.0 / 3.0;
};

// ACMEMB1 container: magic "ACMEMB1\0", u32 n, u32 d, then n records of
// { u32 class_id, d x f32 }. The CSV alternative has the header
// class_id,v0,...,v{d-1}.
void write_embedding_file(const TaskStream& stream, const std::string& path);
void write_embedding_csv(const TaskStream& stream, const std::string& path);
TaskStream load_embedding_stream(const std::string& path, const SplitSpec& split);

struct EmbeddingInfo {
    std::size_t n = 0;
    std::size_t dim = 0;
    std::size_t n_classes = 0;
    std::size_t min_class_count = 0;
};

EmbeddingInfo validate_embedding_file(const std::string& path);

}  // namespace acmap
