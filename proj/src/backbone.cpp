#include "acmap/backbone.hpp"

#include <cmath>

#include "acmap/rng.hpp"

namespace acmap {

namespace {

Matrix seeded_gaussian(std::size_t rows, std::size_t cols, double scale, std::uint64_t seed) {
    Matrix m(rows, cols);
    Rng rng(seed);
    for (double& v : m.data()) v = scale * rng.gaussian();
    return m;
}

void validate_config(const BackboneConfig& c) {
    if (c.input_dim == 0 || c.embed_dim == 0 || c.n_blocks == 0 || c.hidden_dim == 0) {
        throw ConfigError("backbone config: all dimensions must be >= 1");
    }
}

}  // namespace

double activate(Nonlinearity nl, double u) {
    if (nl == Nonlinearity::relu) return u > 0.0 ? u : 0.0;
    // exact GELU
    return 0.5 * u * (1.0 + std::erf(u * 0.7071067811865475244));
}

double activate_deriv(Nonlinearity nl, double u) {
    if (nl == Nonlinearity::relu) return u > 0.0 ? 1.0 : 0.0;  // subgradient at 0 is 0
    const double cdf = 0.5 * (1.0 + std::erf(u * 0.7071067811865475244));
    const double pdf = std::exp(-0.5 * u * u) * 0.3989422804014326779;
    return cdf + u * pdf;
}

Backbone::Backbone(const BackboneConfig& config) : config_(config) {
    validate_config(config);
    const std::size_t d = config.embed_dim;
    const std::size_t hidden = config.hidden_dim;
    input_proj_ = seeded_gaussian(d, config.input_dim, 1.0 / std::sqrt(double(config.input_dim)),
                                  derive_seed(config.seed, "input_proj"));
    blocks_.reserve(config.n_blocks);
    for (std::size_t b = 0; b < config.n_blocks; ++b) {
        FrozenBlock block;
        block.w1 = seeded_gaussian(hidden, d, 1.0 / std::sqrt(double(d)),
                                   derive_seed(config.seed, "block_w1", b));
        block.b1 = Vector(hidden, 0.0);
        block.w2 = seeded_gaussian(d, hidden, 1.0 / std::sqrt(double(hidden)),
                                   derive_seed(config.seed, "block_w2", b));
        block.b2 = Vector(d, 0.0);
        blocks_.push_back(std::move(block));
    }
}

Backbone build_backbone(const BackboneConfig& config) { return Backbone(config); }

void Backbone::check_adapter(const AdapterWeights& adapter) const {
    if (adapter.n_blocks() != config_.n_blocks) {
        throw ShapeError("adapter has " + std::to_string(adapter.n_blocks()) +
                         " blocks, backbone has " + std::to_string(config_.n_blocks));
    }
    validate_adapter_shapes(adapter);
    if (adapter.embed_dim() != config_.embed_dim) {
        throw ShapeError("adapter embed dim " + std::to_string(adapter.embed_dim()) +
                         " != backbone embed dim " + std::to_string(config_.embed_dim));
    }
}

Vector Backbone::forward(const Vector& x, const AdapterWeights* adapter) const {
    if (x.size() != config_.input_dim) {
        throw ShapeError("forward: input dim " + std::to_string(x.size()) + " != " +
                         std::to_string(config_.input_dim));
    }
    if (adapter) check_adapter(*adapter);
    forward_count_.fetch_add(1, std::memory_order_relaxed);

    const std::size_t d = config_.embed_dim;
    Vector h = matvec(input_proj_, x);
    Vector mlp_out(d);
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
        const FrozenBlock& block = blocks_[b];
        // frozen MLP: w2 * act(w1 h + b1) + b2
        Vector u = matvec(block.w1, h);
        for (std::size_t i = 0; i < u.size(); ++i) u[i] = activate(config_.nonlinearity, u[i] + block.b1[i]);
        mlp_out = matvec(block.w2, u);
        for (std::size_t i = 0; i < d; ++i) mlp_out[i] += block.b2[i];

        if (adapter) {
            const AdapterBlock& ab = adapter->blocks[b];
            const std::size_t r = ab.down.cols();
            // v = h W_down (row-vector convention), q = ReLU(v)
            Vector q(r, 0.0);
            for (std::size_t i = 0; i < d; ++i) {
                const double hi = h[i];
                const double* row = ab.down.row_ptr(i);
                for (std::size_t j = 0; j < r; ++j) q[j] += hi * row[j];
            }
            for (double& v : q) v = v > 0.0 ? v : 0.0;
            // mlp_out += scale * (q W_up)
            for (std::size_t j = 0; j < r; ++j) {
                const double qj = adapter->scale * q[j];
                if (qj == 0.0) continue;
                const double* row = ab.up.row_ptr(j);
                for (std::size_t i = 0; i < d; ++i) mlp_out[i] += qj * row[i];
            }
        }
        for (std::size_t i = 0; i < d; ++i) h[i] += mlp_out[i];
    }
    return h;
}

Matrix Backbone::features(const Batch& batch, const AdapterWeights* adapter, Exec exec) const {
    Matrix out(batch.size(), config_.embed_dim);
    const std::int64_t n = static_cast<std::int64_t>(batch.size());
#pragma omp parallel for if (exec == Exec::parallel && n > 8) schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        Vector phi = forward(*batch[static_cast<std::size_t>(i)].x, adapter);
        double* row = out.row_ptr(static_cast<std::size_t>(i));
        for (std::size_t j = 0; j < phi.size(); ++j) row[j] = phi[j];
    }
    return out;
}

std::uint64_t Backbone::weight_checksum() const {
    std::uint64_t h = checksum(input_proj_);
    for (const FrozenBlock& b : blocks_) {
        h ^= checksum(b.w1) * 0x100000001b3ull;
        h ^= checksum(b.b1) * 0x100000001b3ull;
        h ^= checksum(b.w2) * 0x100000001b3ull;
        h ^= checksum(b.b2) * 0x100000001b3ull;
    }
    return h;
}

namespace ref {

Matrix features(const Backbone& backbone, const Batch& batch, const AdapterWeights* adapter) {
    Matrix out(batch.size(), backbone.config().embed_dim);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        Vector phi = backbone.forward(*batch[i].x, adapter);
        for (std::size_t j = 0; j < phi.size(); ++j) out(i, j) = phi[j];
    }
    return out;
}

}  // namespace ref

}  // namespace acmap
