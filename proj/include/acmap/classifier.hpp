#pragma once

#include <cstdint>
#include <vector>

#include "acmap/numerics.hpp"
#include "acmap/prototype.hpp"

namespace acmap {

// Cosine classifier weights: one prototype row per class over every task
// seen so far, ordered by (task_id, class_id).
struct ClassifierWeights {
    Matrix w;  // C x d
    std::vector<std::uint32_t> class_ids;
};

enum class StaleFallback {
    forbid,  // every task must have prototypes at current_tag
    allow    // missing tasks fall back to their raw, unmapped prototypes
};

ClassifierWeights build_classifier(const PrototypeStore& store, std::uint32_t current_tag,
                                   StaleFallback fallback = StaleFallback::forbid);

struct Prediction {
    std::uint32_t class_id = 0;
    Vector logits;  // cosine similarity per row, in [-1, 1]
};

// logit_c = cos(row_c, feature); argmax with ties broken by lowest class id.
Prediction predict(const ClassifierWeights& weights, const Vector& feature);

// Predicted class id per feature row. Parallel over queries; each query's
// result is independent, so the output matches the serial path bitwise.
std::vector<std::uint32_t> predict_batch(const ClassifierWeights& weights, const Matrix& features,
                                         Exec exec = Exec::parallel);

namespace ref {
std::vector<std::uint32_t> predict_batch(const ClassifierWeights& weights, const Matrix& features);
}  // namespace ref

}  // namespace acmap
