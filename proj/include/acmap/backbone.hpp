#pragma once

#include <atomic>
#include <cstdint>
#include <vector>

#include "acmap/adapter.hpp"
#include "acmap/data.hpp"
#include "acmap/numerics.hpp"

namespace acmap {

enum class Nonlinearity { relu, gelu };

struct BackboneConfig {
    std::size_t input_dim = 48;   // D
    std::size_t embed_dim = 32;   // d
    std::size_t n_blocks = 2;
    std::size_t hidden_dim = 64;  // frozen MLP width
    Nonlinearity nonlinearity = Nonlinearity::relu;
    std::uint64_t seed = 42;
};

// One frozen residual block: a two-layer MLP d -> hidden -> d with biases.
struct FrozenBlock {
    Matrix w1;  // hidden x d
    Vector b1;  // hidden
    Matrix w2;  // d x hidden
    Vector b2;  // d
};

// Frozen, seeded feature extractor. Blocks are residual MLPs; an adapter,
// when attached, contributes scale * (ReLU(h W_down) W_up) in parallel to
// each block's MLP. Weights are immutable after construction and fully
// determined by the config (including its seed).
class Backbone {
public:
    explicit Backbone(const BackboneConfig& config);

    Backbone(const Backbone&) = delete;
    Backbone& operator=(const Backbone&) = delete;

    // Final embedding of one input; increments the structural forward-pass
    // counter. Pure apart from that counter.
    Vector forward(const Vector& x, const AdapterWeights* adapter = nullptr) const;

    // Feature rows for a whole batch, one forward per sample. The parallel
    // path writes disjoint rows, so results match the serial path bitwise.
    Matrix features(const Batch& batch, const AdapterWeights* adapter = nullptr,
                    Exec exec = Exec::parallel) const;

    const BackboneConfig& config() const { return config_; }
    const Matrix& input_proj() const { return input_proj_; }
    const std::vector<FrozenBlock>& blocks() const { return blocks_; }

    std::uint64_t forward_count() const { return forward_count_.load(std::memory_order_relaxed); }
    void reset_forward_count() const { forward_count_.store(0, std::memory_order_relaxed); }

    std::uint64_t weight_checksum() const;

    void check_adapter(const AdapterWeights& adapter) const;

private:
    BackboneConfig config_;
    Matrix input_proj_;  // d x D
    std::vector<FrozenBlock> blocks_;
    mutable std::atomic<std::uint64_t> forward_count_{0};
};

Backbone build_backbone(const BackboneConfig& config);  // validates the config

double activate(Nonlinearity nl, double u);
double activate_deriv(Nonlinearity nl, double u);

namespace ref {
// Serial reference for the batched feature kernel.
Matrix features(const Backbone& backbone, const Batch& batch,
                const AdapterWeights* adapter = nullptr);
}  // namespace ref

}  // namespace acmap
