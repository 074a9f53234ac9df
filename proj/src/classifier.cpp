#include "acmap/classifier.hpp"

#include <algorithm>
#include <cmath>

namespace acmap {

ClassifierWeights build_classifier(const PrototypeStore& store, std::uint32_t current_tag,
                                   StaleFallback fallback) {
    const std::vector<std::uint32_t> tasks = store.task_ids();
    if (tasks.empty()) throw IncompleteStoreError("prototype store is empty");

    std::vector<const PrototypeMatrix*> parts;
    std::size_t total_rows = 0;
    std::size_t d = 0;
    for (std::uint32_t task : tasks) {
        const PrototypeMatrix* p = store.find(task, current_tag);
        if (!p && fallback == StaleFallback::allow) {
            // fall back to the oldest raw entry for this task
            for (const PrototypeMatrix* candidate : store.task_entries(task)) {
                if (!candidate->mapped && candidate->task_id == task &&
                    candidate->adapter_tag == task) {
                    p = candidate;
                    break;
                }
            }
            if (!p) {
                const auto all = store.task_entries(task);
                p = all.empty() ? nullptr : all.front();
            }
        }
        if (!p) {
            throw IncompleteStoreError("task " + std::to_string(task) +
                                       " has no prototypes under tag " +
                                       std::to_string(current_tag));
        }
        if (d == 0) d = p->rows.cols();
        if (p->rows.cols() != d) throw ShapeError("build_classifier: prototype width mismatch");
        total_rows += p->rows.rows();
        parts.push_back(p);
    }

    ClassifierWeights out;
    out.w = Matrix(total_rows, d);
    out.class_ids.reserve(total_rows);
    std::size_t row = 0;
    for (const PrototypeMatrix* p : parts) {
        for (std::size_t c = 0; c < p->rows.rows(); ++c, ++row) {
            std::copy(p->rows.row_ptr(c), p->rows.row_ptr(c) + d, out.w.row_ptr(row));
            out.class_ids.push_back(p->class_ids[c]);
        }
    }
    if (!all_finite(out.w)) throw NumericError("build_classifier: non-finite prototype row");
    for (std::size_t r = 0; r < out.w.rows(); ++r) {
        double norm = 0.0;
        for (std::size_t j = 0; j < d; ++j) norm += out.w(r, j) * out.w(r, j);
        if (norm == 0.0) {
            throw DegenerateInputError("build_classifier: zero prototype row for class " +
                                       std::to_string(out.class_ids[r]));
        }
    }
    return out;
}

namespace {

// Shared by the single and batched paths so logits agree bitwise.
std::uint32_t argmax_cosine(const ClassifierWeights& weights, const double* feature,
                            std::size_t d, double feature_norm, Vector* logits_out) {
    double best = -2.0;
    std::uint32_t best_id = 0;
    for (std::size_t r = 0; r < weights.w.rows(); ++r) {
        const double* row = weights.w.row_ptr(r);
        double dot_acc = 0.0;
        double norm_acc = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            dot_acc += row[j] * feature[j];
            norm_acc += row[j] * row[j];
        }
        const double logit =
            std::clamp(dot_acc / (std::sqrt(norm_acc) * feature_norm), -1.0, 1.0);
        if (logits_out) (*logits_out)[r] = logit;
        const std::uint32_t id = weights.class_ids[r];
        if (logit > best || (logit == best && id < best_id)) {
            best = logit;
            best_id = id;
        }
    }
    return best_id;
}

double feature_norm_checked(const double* feature, std::size_t d) {
    double acc = 0.0;
    for (std::size_t j = 0; j < d; ++j) acc += feature[j] * feature[j];
    if (acc == 0.0) throw DegenerateInputError("predict: zero-norm feature");
    return std::sqrt(acc);
}

}  // namespace

Prediction predict(const ClassifierWeights& weights, const Vector& feature) {
    if (feature.size() != weights.w.cols()) {
        throw ShapeError("predict: feature dim " + std::to_string(feature.size()) + " != " +
                         std::to_string(weights.w.cols()));
    }
    Prediction pred;
    pred.logits.resize(weights.w.rows());
    const double fnorm = feature_norm_checked(feature.data(), feature.size());
    pred.class_id = argmax_cosine(weights, feature.data(), feature.size(), fnorm, &pred.logits);
    return pred;
}

std::vector<std::uint32_t> predict_batch(const ClassifierWeights& weights, const Matrix& features,
                                         Exec exec) {
    if (features.cols() != weights.w.cols()) {
        throw ShapeError("predict_batch: feature dim mismatch");
    }
    std::vector<std::uint32_t> out(features.rows());
    const std::int64_t n = static_cast<std::int64_t>(features.rows());
#pragma omp parallel for if (exec == Exec::parallel && n > 16) schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        const std::size_t row = static_cast<std::size_t>(i);
        const double fnorm = feature_norm_checked(features.row_ptr(row), features.cols());
        out[row] = argmax_cosine(weights, features.row_ptr(row), features.cols(), fnorm, nullptr);
    }
    return out;
}

namespace ref {

std::vector<std::uint32_t> predict_batch(const ClassifierWeights& weights,
                                         const Matrix& features) {
    return acmap::predict_batch(weights, features, Exec::serial);
}

}  // namespace ref

}  // namespace acmap
