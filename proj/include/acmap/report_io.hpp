#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "acmap/diagnostics.hpp"
#include "acmap/harness.hpp"
#include "acmap/merging.hpp"
#include "acmap/prototype.hpp"

namespace acmap {

// Doubles survive the JSON round trip losslessly (shortest exact
// representation); CSVs carry 17 significant digits.
std::string format_g17(double v);

nlohmann::json report_to_json(const RunReport& report);
RunReport report_from_json(const nlohmann::json& j);

// write-temp-then-rename so concurrent seed runs never expose partial files
void write_text_atomic(const std::string& path, const std::string& content);
void write_json_atomic(const std::string& path, const nlohmann::json& j);
nlohmann::json read_json(const std::string& path);

void write_accuracy_csv(const RunReport& report, const std::string& path);      // task,accuracy
void write_landscape_csv(const LandscapeGrid& grid, const std::string& path);   // u,v,error
void write_convergence_csv(std::span<const std::pair<std::uint32_t, double>> curve,
                           const std::string& path);                            // t,cos
// anchor_task,class_id,t,variant,cos; per-class rows plus a mean row with
// class_id = -1
void write_alignment_csv(std::span<const AlignmentSeries> series, const std::string& path);
// task_id,class_id,adapter_tag,mapped_flag,v0..v{d-1}
void write_prototype_csv(const PrototypeStore& store, const std::string& path);

}  // namespace acmap
