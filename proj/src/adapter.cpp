#include "acmap/adapter.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>

#include "acmap/backbone.hpp"
#include "acmap/rng.hpp"

namespace acmap {

namespace {

constexpr char kAdapterMagic[8] = {'A', 'C', 'M', 'A', 'D', 'P', 'T', '1'};

std::size_t label_index(const std::vector<std::uint32_t>& class_ids, std::uint32_t label) {
    auto it = std::lower_bound(class_ids.begin(), class_ids.end(), label);
    if (it == class_ids.end() || *it != label) {
        throw DataError("label " + std::to_string(label) + " outside the task's class set");
    }
    return static_cast<std::size_t>(it - class_ids.begin());
}

// Per-sample activations needed by the backward pass.
struct ForwardTrace {
    std::vector<Vector> h;   // block inputs, h[0..n_blocks]
    std::vector<Vector> u;   // frozen MLP pre-activations (bias included)
    std::vector<Vector> v;   // bottleneck pre-ReLU
    std::vector<Vector> qm;  // bottleneck post-ReLU, dropout mask applied
};

ForwardTrace traced_forward(const Backbone& backbone, const AdapterWeights& adapter,
                            const Vector& x, const std::vector<Vector>* masks) {
    const BackboneConfig& cfg = backbone.config();
    const std::size_t d = cfg.embed_dim;
    const std::size_t n_blocks = cfg.n_blocks;
    ForwardTrace trace;
    trace.h.resize(n_blocks + 1);
    trace.u.resize(n_blocks);
    trace.v.resize(n_blocks);
    trace.qm.resize(n_blocks);

    trace.h[0] = matvec(backbone.input_proj(), x);
    for (std::size_t b = 0; b < n_blocks; ++b) {
        const FrozenBlock& block = backbone.blocks()[b];
        const AdapterBlock& ab = adapter.blocks[b];
        const Vector& h = trace.h[b];

        Vector u = matvec(block.w1, h);
        for (std::size_t i = 0; i < u.size(); ++i) u[i] += block.b1[i];
        Vector s(u.size());
        for (std::size_t i = 0; i < u.size(); ++i) s[i] = activate(cfg.nonlinearity, u[i]);
        Vector mlp = matvec(block.w2, s);
        for (std::size_t i = 0; i < d; ++i) mlp[i] += block.b2[i];

        const std::size_t r = ab.down.cols();
        Vector v(r, 0.0);
        for (std::size_t i = 0; i < d; ++i) {
            const double hi = h[i];
            const double* row = ab.down.row_ptr(i);
            for (std::size_t j = 0; j < r; ++j) v[j] += hi * row[j];
        }
        Vector qm(r);
        for (std::size_t j = 0; j < r; ++j) {
            double q = v[j] > 0.0 ? v[j] : 0.0;
            if (masks) q *= (*masks)[b][j];
            qm[j] = q;
        }
        Vector out = trace.h[b];
        for (std::size_t i = 0; i < d; ++i) out[i] += mlp[i];
        for (std::size_t j = 0; j < r; ++j) {
            const double qj = adapter.scale * qm[j];
            if (qj == 0.0) continue;
            const double* row = ab.up.row_ptr(j);
            for (std::size_t i = 0; i < d; ++i) out[i] += qj * row[i];
        }
        trace.u[b] = std::move(u);
        trace.v[b] = std::move(v);
        trace.qm[b] = std::move(qm);
        trace.h[b + 1] = std::move(out);
    }
    return trace;
}

double head_loss_and_dz(const TaskHead& head, const Vector& phi, std::size_t y, Vector& dz) {
    const std::size_t classes = head.b.size();
    Vector z(classes);
    for (std::size_t c = 0; c < classes; ++c) {
        double acc = head.b[c];
        for (std::size_t i = 0; i < phi.size(); ++i) acc += head.w(i, c) * phi[i];
        z[c] = acc;
    }
    const double zmax = *std::max_element(z.begin(), z.end());
    double denom = 0.0;
    for (double zc : z) denom += std::exp(zc - zmax);
    const double log_denom = std::log(denom);
    dz.assign(classes, 0.0);
    for (std::size_t c = 0; c < classes; ++c) dz[c] = std::exp(z[c] - zmax - log_denom);
    const double loss = -(z[y] - zmax - log_denom);
    dz[y] -= 1.0;
    return loss;
}

double cosine_lr(const TrainConfig& cfg, std::size_t epoch) {
    if (cfg.schedule == Schedule::constant) return cfg.learning_rate;
    const double phase = 3.141592653589793238462643383279502884 * double(epoch) / double(cfg.epochs);
    return 0.5 * cfg.learning_rate * (1.0 + std::cos(phase));
}

void sgd_update(Matrix& w, const Matrix& grad, double lr, double wd) {
    double* wd_ptr = w.data().data();
    const double* gd = grad.data().data();
    for (std::size_t i = 0; i < w.size(); ++i) wd_ptr[i] -= lr * (gd[i] + wd * wd_ptr[i]);
}

}  // namespace

void validate_adapter_shapes(const AdapterWeights& w) {
    if (w.blocks.empty()) throw ConfigError("adapter: needs at least one block");
    const std::size_t d = w.blocks.front().down.rows();
    const std::size_t r = w.blocks.front().down.cols();
    if (r < 1 || r >= d) {
        throw ConfigError("adapter: bottleneck r=" + std::to_string(r) +
                          " must satisfy 1 <= r < d=" + std::to_string(d));
    }
    for (const AdapterBlock& b : w.blocks) {
        if (b.down.rows() != d || b.down.cols() != r || b.up.rows() != r || b.up.cols() != d) {
            throw ShapeError("adapter: block shapes are not uniform");
        }
    }
}

AdapterWeights init_adapter(std::size_t n_blocks, std::size_t d, std::size_t r, double scale,
                            const AdapterWeights* init_from, std::uint64_t seed) {
    if (n_blocks == 0 || d == 0 || r == 0) throw ConfigError("init_adapter: zero dimension");
    if (r >= d) {
        throw ConfigError("init_adapter: bottleneck r=" + std::to_string(r) +
                          " must be < d=" + std::to_string(d));
    }
    if (init_from) {
        validate_adapter_shapes(*init_from);
        if (init_from->n_blocks() != n_blocks || init_from->embed_dim() != d ||
            init_from->bottleneck() != r) {
            throw ConfigError("init_adapter: init_from shapes do not match requested shapes");
        }
        return *init_from;  // deep copy
    }
    AdapterWeights w;
    w.scale = scale;
    w.blocks.reserve(n_blocks);
    const double down_scale = 1.0 / std::sqrt(double(d));
    for (std::size_t b = 0; b < n_blocks; ++b) {
        AdapterBlock block;
        block.down = Matrix(d, r);
        Rng rng(derive_seed(seed, "adapter_down", b));
        for (double& x : block.down.data()) x = down_scale * rng.gaussian();
        block.up = Matrix(r, d);  // zeros: adapter starts feature-preserving
        w.blocks.push_back(std::move(block));
    }
    return w;
}

bool bitwise_equal(const AdapterWeights& a, const AdapterWeights& b) {
    if (a.n_blocks() != b.n_blocks()) return false;
    if (std::memcmp(&a.scale, &b.scale, sizeof(double)) != 0) return false;
    for (std::size_t i = 0; i < a.blocks.size(); ++i) {
        if (!bitwise_equal(a.blocks[i].down, b.blocks[i].down)) return false;
        if (!bitwise_equal(a.blocks[i].up, b.blocks[i].up)) return false;
    }
    return true;
}

std::uint64_t adapter_checksum(const AdapterWeights& w) {
    std::uint64_t h = checksum_bytes(&w.scale, sizeof(double));
    for (const AdapterBlock& b : w.blocks) {
        h ^= checksum(b.down) * 0x100000001b3ull;
        h ^= checksum(b.up) * 0x100000001b3ull;
    }
    return h;
}

void save_adapter(const AdapterWeights& w, const std::string& path) {
    validate_adapter_shapes(w);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out.write(kAdapterMagic, sizeof(kAdapterMagic));
    const std::uint32_t header[3] = {static_cast<std::uint32_t>(w.n_blocks()),
                                     static_cast<std::uint32_t>(w.embed_dim()),
                                     static_cast<std::uint32_t>(w.bottleneck())};
    out.write(reinterpret_cast<const char*>(header), sizeof(header));
    out.write(reinterpret_cast<const char*>(&w.scale), sizeof(double));
    for (const AdapterBlock& b : w.blocks) {
        out.write(reinterpret_cast<const char*>(b.down.data().data()),
                  static_cast<std::streamsize>(b.down.size() * sizeof(double)));
        out.write(reinterpret_cast<const char*>(b.up.data().data()),
                  static_cast<std::streamsize>(b.up.size() * sizeof(double)));
    }
    if (!out) throw IoError("short write to " + path);
}

AdapterWeights load_adapter(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    char magic[8];
    if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kAdapterMagic, 8) != 0) {
        throw FormatError(path + ": bad adapter magic at byte 0");
    }
    std::uint32_t header[3];
    if (!in.read(reinterpret_cast<char*>(header), sizeof(header))) {
        throw FormatError(path + ": truncated header at byte 8");
    }
    AdapterWeights w;
    if (!in.read(reinterpret_cast<char*>(&w.scale), sizeof(double))) {
        throw FormatError(path + ": truncated scale at byte 20");
    }
    const std::size_t n_blocks = header[0], d = header[1], r = header[2];
    std::size_t offset = 28;
    for (std::size_t b = 0; b < n_blocks; ++b) {
        AdapterBlock block{Matrix(d, r), Matrix(r, d)};
        for (Matrix* m : {&block.down, &block.up}) {
            const std::size_t bytes = m->size() * sizeof(double);
            if (!in.read(reinterpret_cast<char*>(m->data().data()),
                         static_cast<std::streamsize>(bytes))) {
                throw FormatError(path + ": truncated payload at byte " + std::to_string(offset));
            }
            offset += bytes;
        }
        w.blocks.push_back(std::move(block));
    }
    validate_adapter_shapes(w);
    return w;
}

void validate_train_config(const TrainConfig& cfg) {
    if (!(cfg.learning_rate >= 0.0)) throw ConfigError("train: learning_rate must be >= 0");
    if (cfg.epochs < 1) throw ConfigError("train: epochs must be >= 1");
    if (cfg.batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (!(cfg.dropout >= 0.0 && cfg.dropout < 1.0)) throw ConfigError("train: dropout in [0,1)");
    if (!(cfg.weight_decay >= 0.0)) throw ConfigError("train: weight_decay must be >= 0");
}

TaskHead make_zero_head(std::size_t d, std::size_t classes) {
    return TaskHead{Matrix(d, classes), Vector(classes, 0.0)};
}

TaskHead make_seeded_head(std::size_t d, std::size_t classes, std::uint64_t seed) {
    TaskHead head = make_zero_head(d, classes);
    Rng rng(derive_seed(seed, "task_head"));
    const double scale = 1.0 / std::sqrt(double(d));
    for (double& v : head.w.data()) v = scale * rng.gaussian();
    return head;
}

AdapterGradients adapter_batch_gradients(const Backbone& backbone, const AdapterWeights& adapter,
                                         const TaskHead& head, const Batch& batch,
                                         const std::vector<std::uint32_t>& class_ids,
                                         const DropoutMasks* dropout) {
    if (batch.empty()) throw DataError("adapter_batch_gradients: empty batch");
    backbone.check_adapter(adapter);
    const BackboneConfig& cfg = backbone.config();
    const std::size_t d = cfg.embed_dim;
    const std::size_t n_blocks = cfg.n_blocks;

    AdapterGradients grads;
    grads.blocks.resize(n_blocks);
    for (std::size_t b = 0; b < n_blocks; ++b) {
        grads.blocks[b].down = Matrix(d, adapter.bottleneck());
        grads.blocks[b].up = Matrix(adapter.bottleneck(), d);
    }
    grads.head_w = Matrix(d, class_ids.size());
    grads.head_b = Vector(class_ids.size(), 0.0);

    double loss_sum = 0.0;
    Vector dz;
    for (std::size_t s = 0; s < batch.size(); ++s) {
        const std::vector<Vector>* masks = dropout ? &(*dropout)[s] : nullptr;
        ForwardTrace trace = traced_forward(backbone, adapter, *batch[s].x, masks);
        const Vector& phi = trace.h[n_blocks];
        const std::size_t y = label_index(class_ids, batch[s].label);
        loss_sum += head_loss_and_dz(head, phi, y, dz);

        // head gradients and dL/dphi
        Vector g(d, 0.0);
        for (std::size_t i = 0; i < d; ++i) {
            const double phi_i = phi[i];
            double acc = 0.0;
            double* grow = grads.head_w.row_ptr(i);
            const double* wrow = head.w.row_ptr(i);
            for (std::size_t c = 0; c < dz.size(); ++c) {
                grow[c] += phi_i * dz[c];
                acc += wrow[c] * dz[c];
            }
            g[i] = acc;
        }
        for (std::size_t c = 0; c < dz.size(); ++c) grads.head_b[c] += dz[c];

        // walk the blocks in reverse; g holds dL/dh_{b+1}
        for (std::size_t bi = n_blocks; bi-- > 0;) {
            const FrozenBlock& block = backbone.blocks()[bi];
            const AdapterBlock& ab = adapter.blocks[bi];
            const std::size_t r = ab.down.cols();
            const Vector& h = trace.h[bi];
            const Vector& u = trace.u[bi];
            const Vector& v = trace.v[bi];
            const Vector& qm = trace.qm[bi];

            // frozen MLP path: W1^T (act'(u) .* (W2^T g))
            Vector du(u.size(), 0.0);
            for (std::size_t i = 0; i < d; ++i) {
                const double gi = g[i];
                if (gi == 0.0) continue;
                const double* w2row = block.w2.row_ptr(i);
                for (std::size_t j = 0; j < u.size(); ++j) du[j] += w2row[j] * gi;
            }
            for (std::size_t j = 0; j < u.size(); ++j)
                du[j] *= activate_deriv(cfg.nonlinearity, u[j]);
            Vector gh(d, 0.0);
            for (std::size_t j = 0; j < u.size(); ++j) {
                const double duj = du[j];
                if (duj == 0.0) continue;
                const double* w1row = block.w1.row_ptr(j);
                for (std::size_t i = 0; i < d; ++i) gh[i] += w1row[i] * duj;
            }

            // adapter path
            Vector gq(r, 0.0);
            for (std::size_t j = 0; j < r; ++j) {
                const double* uprow = ab.up.row_ptr(j);
                double acc = 0.0;
                for (std::size_t i = 0; i < d; ++i) acc += uprow[i] * g[i];
                gq[j] = adapter.scale * acc;
            }
            Vector dv(r);
            for (std::size_t j = 0; j < r; ++j) {
                double m = masks ? (*masks)[bi][j] : 1.0;
                dv[j] = (v[j] > 0.0 ? 1.0 : 0.0) * m * gq[j];
            }
            Matrix& gdown = grads.blocks[bi].down;
            for (std::size_t i = 0; i < d; ++i) {
                const double hi = h[i];
                double* grow = gdown.row_ptr(i);
                const double* drow = ab.down.row_ptr(i);
                double acc = 0.0;
                for (std::size_t j = 0; j < r; ++j) {
                    grow[j] += hi * dv[j];
                    acc += drow[j] * dv[j];
                }
                gh[i] += acc;
            }
            Matrix& gup = grads.blocks[bi].up;
            for (std::size_t j = 0; j < r; ++j) {
                const double qj = adapter.scale * qm[j];
                if (qj == 0.0) continue;
                double* grow = gup.row_ptr(j);
                for (std::size_t i = 0; i < d; ++i) grow[i] += qj * g[i];
            }
            for (std::size_t i = 0; i < d; ++i) g[i] += gh[i];
        }
    }

    const double inv_n = 1.0 / double(batch.size());
    for (AdapterBlock& b : grads.blocks) {
        for (double& x : b.down.data()) x *= inv_n;
        for (double& x : b.up.data()) x *= inv_n;
    }
    for (double& x : grads.head_w.data()) x *= inv_n;
    for (double& x : grads.head_b) x *= inv_n;
    grads.loss = loss_sum * inv_n;
    return grads;
}

double batch_loss(const Backbone& backbone, const AdapterWeights& adapter, const TaskHead& head,
                  const Batch& batch, const std::vector<std::uint32_t>& class_ids,
                  const DropoutMasks* dropout) {
    if (batch.empty()) throw DataError("batch_loss: empty batch");
    double loss_sum = 0.0;
    Vector dz;
    for (std::size_t s = 0; s < batch.size(); ++s) {
        const std::vector<Vector>* masks = dropout ? &(*dropout)[s] : nullptr;
        ForwardTrace trace = traced_forward(backbone, adapter, *batch[s].x, masks);
        const std::size_t y = label_index(class_ids, batch[s].label);
        loss_sum += head_loss_and_dz(head, trace.h.back(), y, dz);
    }
    return loss_sum / double(batch.size());
}

AdapterWeights train_task_adapter(const Backbone& backbone, const AdapterWeights& init,
                                  const Batch& data, const TrainConfig& cfg, TrainStats* stats) {
    validate_train_config(cfg);
    if (data.empty()) throw DataError("train_task_adapter: empty dataset");
    backbone.check_adapter(init);

    AdapterWeights theta = init;
    const std::vector<std::uint32_t> class_ids = batch_class_ids(data);
    TaskHead head = make_zero_head(backbone.config().embed_dim, class_ids.size());

    std::vector<std::size_t> order(data.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffle_rng(derive_seed(cfg.seed, "shuffle"));
    Rng dropout_rng(derive_seed(cfg.seed, "dropout"));
    const std::size_t r = theta.bottleneck();
    const std::size_t n_blocks = theta.n_blocks();

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = cosine_lr(cfg, epoch);
        // Fisher-Yates with the seeded generator; order is part of the contract
        for (std::size_t i = order.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(shuffle_rng.uniform_index(i));
            std::swap(order[i - 1], order[j]);
        }
        double epoch_loss = 0.0;
        std::size_t batch_index = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_index) {
            const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
            Batch chunk;
            chunk.reserve(stop - start);
            for (std::size_t i = start; i < stop; ++i) chunk.push_back(data[order[i]]);

            DropoutMasks masks;
            const DropoutMasks* masks_ptr = nullptr;
            if (cfg.dropout > 0.0) {
                masks.resize(chunk.size());
                const double keep_scale = 1.0 / (1.0 - cfg.dropout);
                for (auto& per_block : masks) {
                    per_block.resize(n_blocks);
                    for (Vector& m : per_block) {
                        m.resize(r);
                        for (double& x : m)
                            x = dropout_rng.uniform() < cfg.dropout ? 0.0 : keep_scale;
                    }
                }
                masks_ptr = &masks;
            }

            AdapterGradients grads =
                adapter_batch_gradients(backbone, theta, head, chunk, class_ids, masks_ptr);
            if (!std::isfinite(grads.loss)) {
                throw DivergenceError("training loss is not finite", epoch, batch_index);
            }
            epoch_loss += grads.loss * double(chunk.size());

            for (std::size_t b = 0; b < n_blocks; ++b) {
                sgd_update(theta.blocks[b].down, grads.blocks[b].down, lr, cfg.weight_decay);
                sgd_update(theta.blocks[b].up, grads.blocks[b].up, lr, cfg.weight_decay);
            }
            sgd_update(head.w, grads.head_w, lr, cfg.weight_decay);
            for (std::size_t c = 0; c < head.b.size(); ++c) head.b[c] -= lr * grads.head_b[c];
        }
        epoch_loss /= double(data.size());
        if (stats) {
            if (epoch == 0) stats->first_epoch_loss = epoch_loss;
            stats->final_epoch_loss = epoch_loss;
        }
    }
    return theta;
}

GradCheckResult adapter_grad_check(const Backbone& backbone, const AdapterWeights& adapter,
                                   const Batch& batch, std::uint64_t head_seed, double step) {
    if (batch.empty()) throw DataError("adapter_grad_check: empty batch");
    const std::vector<std::uint32_t> class_ids = batch_class_ids(batch);
    const TaskHead head =
        make_seeded_head(backbone.config().embed_dim, class_ids.size(), head_seed);
    const AdapterGradients analytic =
        adapter_batch_gradients(backbone, adapter, head, batch, class_ids, nullptr);

    // Pre-activation traces: used to exclude entries whose +-step perturbation
    // can push a bottleneck pre-activation across the ReLU kink.
    const std::size_t n_blocks = adapter.n_blocks();
    const std::size_t r = adapter.bottleneck();
    const std::size_t d = adapter.embed_dim();
    std::vector<ForwardTrace> traces;
    traces.reserve(batch.size());
    for (const SampleRef& s : batch) traces.push_back(traced_forward(backbone, adapter, *s.x, nullptr));

    // Coarse downstream margin: perturbing block b can move any later block's
    // pre-activation; if one sits essentially on the kink, skip block b's
    // entries entirely.
    std::vector<double> min_abs_v(n_blocks, std::numeric_limits<double>::infinity());
    for (const ForwardTrace& t : traces)
        for (std::size_t b = 0; b < n_blocks; ++b)
            for (std::size_t j = 0; j < r; ++j)
                min_abs_v[b] = std::min(min_abs_v[b], std::abs(t.v[b][j]));
    std::vector<bool> downstream_risk(n_blocks, false);
    for (std::size_t b = 0; b < n_blocks; ++b)
        for (std::size_t later = b + 1; later < n_blocks; ++later)
            if (min_abs_v[later] <= 64.0 * step) downstream_risk[b] = true;

    GradCheckResult result;
    const double floor = 1e-8;
    auto compare = [&](double analytic_g, double numeric_g) {
        const double denom = std::max({std::abs(analytic_g), std::abs(numeric_g), floor});
        result.max_rel_err = std::max(result.max_rel_err, std::abs(analytic_g - numeric_g) / denom);
        ++result.compared;
    };
    auto loss_with = [&](const AdapterWeights& probe) {
        return batch_loss(backbone, probe, head, batch, class_ids, nullptr);
    };

    AdapterWeights probe = adapter;
    for (std::size_t b = 0; b < n_blocks; ++b) {
        for (std::size_t i = 0; i < d; ++i) {
            for (std::size_t j = 0; j < r; ++j) {
                bool kink = downstream_risk[b];
                for (const ForwardTrace& t : traces) {
                    // dv_j/dW_down(i,j) = h_i: crossing when |v_j| < step*|h_i|
                    if (std::abs(t.v[b][j]) <= 8.0 * step * (std::abs(t.h[b][i]) + 1e-9)) {
                        kink = true;
                        break;
                    }
                }
                if (kink) {
                    result.excluded.push_back({b, i, j});
                    continue;
                }
                const double saved = probe.blocks[b].down(i, j);
                probe.blocks[b].down(i, j) = saved + step;
                const double up_loss = loss_with(probe);
                probe.blocks[b].down(i, j) = saved - step;
                const double down_loss = loss_with(probe);
                probe.blocks[b].down(i, j) = saved;
                compare(analytic.blocks[b].down(i, j), (up_loss - down_loss) / (2.0 * step));
            }
        }
        for (std::size_t j = 0; j < r; ++j) {
            for (std::size_t i = 0; i < d; ++i) {
                if (downstream_risk[b]) {
                    result.excluded.push_back({b, j, i});
                    continue;
                }
                const double saved = probe.blocks[b].up(j, i);
                probe.blocks[b].up(j, i) = saved + step;
                const double up_loss = loss_with(probe);
                probe.blocks[b].up(j, i) = saved - step;
                const double down_loss = loss_with(probe);
                probe.blocks[b].up(j, i) = saved;
                compare(analytic.blocks[b].up(j, i), (up_loss - down_loss) / (2.0 * step));
            }
        }
    }

    // head entries: the loss is smooth in them, always compared
    TaskHead head_probe = head;
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t c = 0; c < class_ids.size(); ++c) {
            const double saved = head_probe.w(i, c);
            head_probe.w(i, c) = saved + step;
            const double up_loss = batch_loss(backbone, adapter, head_probe, batch, class_ids);
            head_probe.w(i, c) = saved - step;
            const double down_loss = batch_loss(backbone, adapter, head_probe, batch, class_ids);
            head_probe.w(i, c) = saved;
            compare(analytic.head_w(i, c), (up_loss - down_loss) / (2.0 * step));
        }
    }
    for (std::size_t c = 0; c < class_ids.size(); ++c) {
        const double saved = head_probe.b[c];
        head_probe.b[c] = saved + step;
        const double up_loss = batch_loss(backbone, adapter, head_probe, batch, class_ids);
        head_probe.b[c] = saved - step;
        const double down_loss = batch_loss(backbone, adapter, head_probe, batch, class_ids);
        head_probe.b[c] = saved;
        compare(analytic.head_b[c], (up_loss - down_loss) / (2.0 * step));
    }
    return result;
}

}  // namespace acmap
