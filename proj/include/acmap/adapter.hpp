#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "acmap/data.hpp"
#include "acmap/numerics.hpp"

namespace acmap {

class Backbone;

// Bottleneck adapter parameters: one down/up projection pair per backbone
// block, all blocks sharing the same (d, r) shape. The up projection output
// is scaled before it joins the residual stream.
struct AdapterBlock {
    Matrix down;  // d x r
    Matrix up;    // r x d
};

struct AdapterWeights {
    std::vector<AdapterBlock> blocks;
    double scale = 0.1;

    std::size_t n_blocks() const { return blocks.size(); }
    std::size_t embed_dim() const { return blocks.empty() ? 0 : blocks.front().down.rows(); }
    std::size_t bottleneck() const { return blocks.empty() ? 0 : blocks.front().down.cols(); }
};

// Fresh adapters get a seeded Gaussian down projection (1/sqrt(d) scale) and
// an all-zero up projection, so a new adapter is exactly feature-preserving.
// When `init_from` is given the result is a deep copy of it.
AdapterWeights init_adapter(std::size_t n_blocks, std::size_t d, std::size_t r, double scale,
                            const AdapterWeights* init_from, std::uint64_t seed);

void validate_adapter_shapes(const AdapterWeights& w);

bool bitwise_equal(const AdapterWeights& a, const AdapterWeights& b);
std::uint64_t adapter_checksum(const AdapterWeights& w);

// Binary snapshot format: magic "ACMADPT1", u32 n_blocks, u32 d, u32 r,
// f64 scale, then per block the row-major little-endian f64 payload of
// W_down followed by W_up.
void save_adapter(const AdapterWeights& w, const std::string& path);
AdapterWeights load_adapter(const std::string& path);

enum class Schedule { cosine_annealing, constant };

struct TrainConfig {
    double learning_rate = 0.3;
    double weight_decay = 5e-4;
    std::size_t epochs = 12;
    std::size_t batch_size = 16;
    Schedule schedule = Schedule::cosine_annealing;
    double dropout = 0.0;
    std::uint64_t seed = 0;
};

void validate_train_config(const TrainConfig& cfg);

// Throwaway per-task softmax head; trained together with the adapter and
// discarded afterwards. Only prototypes survive into inference.
struct TaskHead {
    Matrix w;  // d x C
    Vector b;  // C
};

TaskHead make_zero_head(std::size_t d, std::size_t classes);
TaskHead make_seeded_head(std::size_t d, std::size_t classes, std::uint64_t seed);

struct AdapterGradients {
    std::vector<AdapterBlock> blocks;  // same shapes as the adapter
    Matrix head_w;
    Vector head_b;
    double loss = 0.0;  // mean cross-entropy over the batch
};

// Per-sample dropout masks over the bottleneck activation: [sample][block]
// is an r-vector of 0 or 1/(1-rate) factors.
using DropoutMasks = std::vector<std::vector<Vector>>;

// Mean softmax cross-entropy over the batch and its analytic gradients with
// respect to every adapter and head parameter. Labels are global ids mapped
// to head columns through `class_ids` (sorted ascending).
AdapterGradients adapter_batch_gradients(const Backbone& backbone, const AdapterWeights& adapter,
                                         const TaskHead& head, const Batch& batch,
                                         const std::vector<std::uint32_t>& class_ids,
                                         const DropoutMasks* dropout = nullptr);

double batch_loss(const Backbone& backbone, const AdapterWeights& adapter, const TaskHead& head,
                  const Batch& batch, const std::vector<std::uint32_t>& class_ids,
                  const DropoutMasks* dropout = nullptr);

struct TrainStats {
    double first_epoch_loss = 0.0;
    double final_epoch_loss = 0.0;
};

// Mini-batch SGD over adapter + fresh head, backbone frozen. Deterministic
// for a fixed (init, data, cfg.seed): shuffle order is seeded and gradient
// accumulation is single-threaded.
AdapterWeights train_task_adapter(const Backbone& backbone, const AdapterWeights& init,
                                  const Batch& data, const TrainConfig& cfg,
                                  TrainStats* stats = nullptr);

struct ExcludedEntry {
    std::size_t block = 0;  // n_blocks() means a head entry
    std::size_t row = 0;
    std::size_t col = 0;
};

struct GradCheckResult {
    double max_rel_err = 0.0;
    std::size_t compared = 0;
    std::vector<ExcludedEntry> excluded;
};

// Compares the analytic gradient of every adapter and head entry against
// central finite differences of the batch loss. Entries whose perturbation
// can cross a ReLU kink (bottleneck pre-activation within the perturbation's
// reach) are excluded and reported instead of compared.
GradCheckResult adapter_grad_check(const Backbone& backbone, const AdapterWeights& adapter,
                                   const Batch& batch, std::uint64_t head_seed = 7,
                                   double step = 1e-5);

}  // namespace acmap
