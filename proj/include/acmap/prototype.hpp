#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "acmap/backbone.hpp"
#include "acmap/data.hpp"
#include "acmap/numerics.hpp"

namespace acmap {

// Per-task class prototypes under one adapter snapshot. `adapter_tag`
// identifies the snapshot the features came from (0 = raw backbone);
// `mapped` marks matrices produced by a mapping rather than from data.
struct PrototypeMatrix {
    std::uint32_t task_id = 0;
    std::uint32_t adapter_tag = 0;
    Matrix rows;  // C_t x d, ordered by class_ids ascending
    std::vector<std::uint32_t> class_ids;
    bool mapped = false;
};

// Mean feature vector per class, rows ordered by ascending class id. Sample
// features are summed with Neumaier compensation so the result is invariant
// to sample order. `expected_classes`, when given, makes a class with no
// samples an error instead of being silently absent.
PrototypeMatrix compute_prototypes(const Backbone& backbone, const AdapterWeights* adapter,
                                   const Batch& batch, std::uint32_t task_id,
                                   std::uint32_t adapter_tag,
                                   const std::vector<std::uint32_t>* expected_classes = nullptr,
                                   Exec exec = Exec::parallel);

// Mean displacement between two prototype matrices of the same task under
// different snapshots; the affine correction applied by centroid mapping.
struct CentroidShift {
    Vector delta;
    std::uint32_t from_tag = 0;
    std::uint32_t to_tag = 0;
};

CentroidShift centroid_shift(const PrototypeMatrix& current, const PrototypeMatrix& old);

// P_hat = P_old + delta, retagged to the shift's target snapshot.
PrototypeMatrix centroid_map(const PrototypeMatrix& old, const CentroidShift& shift);

// Baseline mapping that sums a contiguous chain of per-step shifts instead
// of one direct shift; accumulates per-step estimation error.
PrototypeMatrix sdc_map(const PrototypeMatrix& old, std::span<const CentroidShift> steps);

// Keyed by (task_id, adapter_tag); both raw and mapped prototypes live here.
class PrototypeStore {
public:
    void put(PrototypeMatrix p);
    const PrototypeMatrix* find(std::uint32_t task_id, std::uint32_t tag) const;
    const PrototypeMatrix& get(std::uint32_t task_id, std::uint32_t tag) const;
    std::vector<std::uint32_t> task_ids() const;
    // Entries for one task, any tag, sorted by tag.
    std::vector<const PrototypeMatrix*> task_entries(std::uint32_t task_id) const;
    const std::map<std::pair<std::uint32_t, std::uint32_t>, PrototypeMatrix>& entries() const {
        return entries_;
    }

private:
    std::map<std::pair<std::uint32_t, std::uint32_t>, PrototypeMatrix> entries_;
};

}  // namespace acmap
