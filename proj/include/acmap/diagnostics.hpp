#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "acmap/harness.hpp"

namespace acmap {

enum class AlignmentVariant { mapped, unmapped, sdc };

std::string variant_name(AlignmentVariant v);

// Cosine similarity between a candidate prototype for the anchor task and
// the true prototype recomputed from the anchor task's retained data under
// each later merged snapshot. Retaining that data is a diagnostics-only
// privilege; nothing here feeds back into the run.
struct AlignmentSeries {
    std::uint32_t anchor_task = 0;
    AlignmentVariant variant = AlignmentVariant::mapped;
    std::vector<std::uint32_t> ts;  // t = anchor..T
    std::vector<std::uint32_t> class_ids;
    Matrix per_class;                // class x t cosine values
    std::vector<double> mean_curve;  // per t, mean over classes
};

// `true_split` selects the retained data the true prototypes come from; by
// default it matches the split the run used for its own prototypes, so the
// curve is exactly 1 at t == anchor.
AlignmentSeries cosine_alignment_curve(const Backbone& backbone, TaskStream& stream,
                                       const RunArtifacts& artifacts, std::uint32_t anchor_task,
                                       AlignmentVariant variant);
AlignmentSeries cosine_alignment_curve(const Backbone& backbone, TaskStream& stream,
                                       const RunArtifacts& artifacts, std::uint32_t anchor_task,
                                       AlignmentVariant variant, Split true_split);

// Mean class-wise cosine between the current task's prototypes under the
// previous and the new merged snapshot, per merge step. Approaches 1 as the
// merge increments shrink; the documented guide for choosing the early-stop
// threshold.
std::vector<std::pair<std::uint32_t, double>> merge_convergence_curve(
    const RunArtifacts& artifacts);

}  // namespace acmap
