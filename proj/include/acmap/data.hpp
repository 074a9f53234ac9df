#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "acmap/numerics.hpp"

namespace acmap {

// One labelled input vector. Labels are global class ids.
struct Sample {
    Vector x;
    std::uint32_t label = 0;
};

// Non-owning view used to hand samples to the compute layers.
struct SampleRef {
    const Vector* x = nullptr;
    std::uint32_t label = 0;
};

using Batch = std::vector<SampleRef>;

inline std::vector<std::uint32_t> batch_class_ids(const Batch& batch) {
    std::vector<std::uint32_t> ids;
    ids.reserve(batch.size());
    for (const SampleRef& s : batch) ids.push_back(s.label);
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    return ids;
}

}  // namespace acmap
