#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "acmap/harness.hpp"
#include "acmap/stream.hpp"

namespace acmap {

// One experiment: a data source, model/training settings, a method and the
// seeds to run it under. Parsed from flat key=value config files; every
// field has a default so a report's resolved echo reproduces the run.
struct ExperimentConfig {
    Method method = Method::acmap;
    std::vector<std::uint64_t> seeds = {1993, 1994, 1995, 1996, 1997};
    std::string out_dir;                     // empty: ACMAP_OUT_DIR or "runs"
    std::optional<std::size_t> early_stop;   // L; empty means no limit
    StreamSpec stream;                       // synthetic source (default)
    std::string data_file;                   // embedding-file source when set
    double eval_fraction = 1.0 / 3.0;        // per-class eval share for files
    BackboneConfig backbone;
    TrainConfig train;
    AdapterConfig adapter;
    Split proto_split = Split::train;
    bool diagnostics = false;
    int eval_reps = 1;
};

ExperimentConfig default_config();

// Applies one key=value setting; unknown keys and malformed values raise
// ConfigError. Keys are documented in the README.
void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value);

// key=value lines, '#' comments, blank lines ignored.
ExperimentConfig load_config_file(const std::string& path);

// Full resolved settings (every key, defaults expanded). apply_setting of
// each pair onto default_config() reproduces the config.
std::map<std::string, std::string> resolved_settings(const ExperimentConfig& cfg);
ExperimentConfig config_from_settings(const std::map<std::string, std::string>& settings);

std::string resolve_out_dir(const ExperimentConfig& cfg);

TaskStream build_stream(const ExperimentConfig& cfg, std::uint64_t seed);

// Builds the stream for `seed`, dispatches the configured method and stamps
// the resolved config echo into the report.
RunArtifacts execute_run(const ExperimentConfig& cfg, std::uint64_t seed);

struct Summary {
    std::string method;
    std::vector<std::uint64_t> seeds;
    std::vector<double> avg_accuracy;    // per seed
    std::vector<double> final_accuracy;  // per seed
    double avg_mean = 0.0, avg_std = 0.0;
    double final_mean = 0.0, final_std = 0.0;
};

Summary summarize(const std::vector<RunReport>& reports);
nlohmann::json summary_to_json(const Summary& summary,
                               const std::map<std::string, std::string>& config_echo);

}  // namespace acmap
