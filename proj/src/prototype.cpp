#include "acmap/prototype.hpp"

#include <algorithm>

namespace acmap {

namespace {

// Neumaier-compensated accumulator for one vector of sums.
struct CompensatedSum {
    Vector sum;
    Vector comp;

    explicit CompensatedSum(std::size_t dim) : sum(dim, 0.0), comp(dim, 0.0) {}

    void add_row(const double* row, std::size_t dim) {
        for (std::size_t j = 0; j < dim; ++j) {
            const double x = row[j];
            const double t = sum[j] + x;
            if (std::abs(sum[j]) >= std::abs(x)) {
                comp[j] += (sum[j] - t) + x;
            } else {
                comp[j] += (x - t) + sum[j];
            }
            sum[j] = t;
        }
    }

    Vector mean(std::size_t count) const {
        Vector out(sum.size());
        for (std::size_t j = 0; j < sum.size(); ++j)
            out[j] = sum[j] / double(count) + comp[j] / double(count);
        return out;
    }
};

}  // namespace

PrototypeMatrix compute_prototypes(const Backbone& backbone, const AdapterWeights* adapter,
                                   const Batch& batch, std::uint32_t task_id,
                                   std::uint32_t adapter_tag,
                                   const std::vector<std::uint32_t>* expected_classes,
                                   Exec exec) {
    if (batch.empty()) throw DataError("compute_prototypes: empty batch");
    std::vector<std::uint32_t> class_ids =
        expected_classes ? *expected_classes : batch_class_ids(batch);
    std::sort(class_ids.begin(), class_ids.end());

    const Matrix feats = backbone.features(batch, adapter, exec);
    const std::size_t d = feats.cols();

    std::vector<CompensatedSum> sums(class_ids.size(), CompensatedSum(d));
    std::vector<std::size_t> counts(class_ids.size(), 0);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto it = std::lower_bound(class_ids.begin(), class_ids.end(), batch[i].label);
        if (it == class_ids.end() || *it != batch[i].label) {
            throw DataError("compute_prototypes: sample label " + std::to_string(batch[i].label) +
                            " not in the task's class set");
        }
        const std::size_t c = static_cast<std::size_t>(it - class_ids.begin());
        sums[c].add_row(feats.row_ptr(i), d);
        ++counts[c];
    }

    PrototypeMatrix proto;
    proto.task_id = task_id;
    proto.adapter_tag = adapter_tag;
    proto.class_ids = class_ids;
    proto.rows = Matrix(class_ids.size(), d);
    for (std::size_t c = 0; c < class_ids.size(); ++c) {
        if (counts[c] == 0) {
            throw DataError("compute_prototypes: class " + std::to_string(class_ids[c]) +
                            " has zero samples");
        }
        const Vector mean = sums[c].mean(counts[c]);
        std::copy(mean.begin(), mean.end(), proto.rows.row_ptr(c));
    }
    if (!all_finite(proto.rows)) throw NumericError("compute_prototypes: non-finite prototype");
    return proto;
}

CentroidShift centroid_shift(const PrototypeMatrix& current, const PrototypeMatrix& old) {
    if (current.task_id != old.task_id) {
        throw AlignmentError("centroid_shift: task mismatch (" + std::to_string(current.task_id) +
                             " vs " + std::to_string(old.task_id) + ")");
    }
    if (current.class_ids != old.class_ids) {
        throw AlignmentError("centroid_shift: class ordering differs");
    }
    if (current.adapter_tag == old.adapter_tag) {
        throw AlignmentError("centroid_shift: both matrices share adapter tag " +
                             std::to_string(current.adapter_tag));
    }
    const std::size_t d = current.rows.cols();
    const std::size_t n_classes = current.rows.rows();
    CompensatedSum acc(d);
    Vector diff(d);
    for (std::size_t c = 0; c < n_classes; ++c) {
        const double* cur = current.rows.row_ptr(c);
        const double* oldr = old.rows.row_ptr(c);
        for (std::size_t j = 0; j < d; ++j) diff[j] = cur[j] - oldr[j];
        acc.add_row(diff.data(), d);
    }
    CentroidShift shift;
    shift.delta = acc.mean(n_classes);
    shift.from_tag = old.adapter_tag;
    shift.to_tag = current.adapter_tag;
    return shift;
}

PrototypeMatrix centroid_map(const PrototypeMatrix& old, const CentroidShift& shift) {
    if (shift.from_tag != old.adapter_tag) {
        throw AlignmentError("centroid_map: shift starts at tag " + std::to_string(shift.from_tag) +
                             " but prototypes carry tag " + std::to_string(old.adapter_tag));
    }
    if (shift.delta.size() != old.rows.cols()) {
        throw ShapeError("centroid_map: shift dimension mismatch");
    }
    PrototypeMatrix mapped = old;
    mapped.adapter_tag = shift.to_tag;
    mapped.mapped = true;
    for (std::size_t c = 0; c < mapped.rows.rows(); ++c) {
        double* row = mapped.rows.row_ptr(c);
        for (std::size_t j = 0; j < shift.delta.size(); ++j) row[j] += shift.delta[j];
    }
    return mapped;
}

PrototypeMatrix sdc_map(const PrototypeMatrix& old, std::span<const CentroidShift> steps) {
    if (steps.empty()) {
        throw AlignmentError("sdc_map: empty shift chain");
    }
    std::uint32_t tag = old.adapter_tag;
    Vector total(old.rows.cols(), 0.0);
    for (const CentroidShift& step : steps) {
        if (step.from_tag != tag) {
            throw AlignmentError("sdc_map: broken chain, expected step from tag " +
                                 std::to_string(tag) + " but got " +
                                 std::to_string(step.from_tag));
        }
        if (step.delta.size() != total.size()) throw ShapeError("sdc_map: dimension mismatch");
        for (std::size_t j = 0; j < total.size(); ++j) total[j] += step.delta[j];
        tag = step.to_tag;
    }
    PrototypeMatrix mapped = old;
    mapped.adapter_tag = tag;
    mapped.mapped = true;
    for (std::size_t c = 0; c < mapped.rows.rows(); ++c) {
        double* row = mapped.rows.row_ptr(c);
        for (std::size_t j = 0; j < total.size(); ++j) row[j] += total[j];
    }
    return mapped;
}

void PrototypeStore::put(PrototypeMatrix p) {
    entries_[{p.task_id, p.adapter_tag}] = std::move(p);
}

const PrototypeMatrix* PrototypeStore::find(std::uint32_t task_id, std::uint32_t tag) const {
    const auto it = entries_.find({task_id, tag});
    return it == entries_.end() ? nullptr : &it->second;
}

const PrototypeMatrix& PrototypeStore::get(std::uint32_t task_id, std::uint32_t tag) const {
    const PrototypeMatrix* p = find(task_id, tag);
    if (!p) {
        throw IncompleteStoreError("no prototypes for task " + std::to_string(task_id) +
                                   " under adapter tag " + std::to_string(tag));
    }
    return *p;
}

std::vector<std::uint32_t> PrototypeStore::task_ids() const {
    std::vector<std::uint32_t> ids;
    for (const auto& [key, _] : entries_) ids.push_back(key.first);
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    return ids;
}

std::vector<const PrototypeMatrix*> PrototypeStore::task_entries(std::uint32_t task_id) const {
    std::vector<const PrototypeMatrix*> out;
    for (const auto& [key, value] : entries_) {
        if (key.first == task_id) out.push_back(&value);
    }
    return out;
}

}  // namespace acmap
