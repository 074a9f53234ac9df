#include "acmap/experiment.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "acmap/report_io.hpp"

namespace acmap {

namespace {

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const std::uint64_t v = std::stoull(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected an unsigned integer, got '" + value + "'");
    }
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected a number, got '" + value + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "on") return true;
    if (value == "false" || value == "0" || value == "off") return false;
    throw ConfigError(key + ": expected true/false, got '" + value + "'");
}

std::string trim(const std::string& s) {
    const std::size_t first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return "";
    const std::size_t last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

}  // namespace

ExperimentConfig default_config() { return ExperimentConfig{}; }

void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "method") {
        cfg.method = parse_method(value);
    } else if (key == "seeds") {
        std::vector<std::uint64_t> seeds;
        std::stringstream ss(value);
        std::string item;
        while (std::getline(ss, item, ',')) {
            if (!trim(item).empty()) seeds.push_back(parse_u64(key, trim(item)));
        }
        if (seeds.empty()) throw ConfigError("seeds: the list must not be empty");
        cfg.seeds = std::move(seeds);
    } else if (key == "out_dir") {
        cfg.out_dir = value;
    } else if (key == "L") {
        if (value == "inf" || value == "infinity") {
            cfg.early_stop.reset();
        } else {
            const std::uint64_t v = parse_u64(key, value);
            if (v < 1) throw ConfigError("L: threshold must be >= 1 (or 'inf')");
            cfg.early_stop = static_cast<std::size_t>(v);
        }
    } else if (key == "tasks") {
        cfg.stream.n_tasks = parse_u64(key, value);
    } else if (key == "base_classes") {
        cfg.stream.base_classes = parse_u64(key, value);
    } else if (key == "inc_classes") {
        cfg.stream.inc_classes = parse_u64(key, value);
    } else if (key == "train_per_class") {
        cfg.stream.train_per_class = parse_u64(key, value);
    } else if (key == "eval_per_class") {
        cfg.stream.eval_per_class = parse_u64(key, value);
    } else if (key == "input_dim") {
        cfg.stream.input_dim = parse_u64(key, value);
    } else if (key == "cluster_separation") {
        cfg.stream.cluster_separation = parse_double(key, value);
    } else if (key == "noise_sigma") {
        cfg.stream.noise_sigma = parse_double(key, value);
    } else if (key == "drift") {
        if (value == "none") cfg.stream.drift_model = DriftModel::none;
        else if (value == "rotation") cfg.stream.drift_model = DriftModel::rotation;
        else if (value == "offset") cfg.stream.drift_model = DriftModel::offset;
        else throw ConfigError("drift: expected none|rotation|offset, got '" + value + "'");
    } else if (key == "drift_rate") {
        cfg.stream.drift_rate = parse_double(key, value);
    } else if (key == "data_file") {
        cfg.data_file = value;
    } else if (key == "eval_fraction") {
        cfg.eval_fraction = parse_double(key, value);
    } else if (key == "embed_dim") {
        cfg.backbone.embed_dim = parse_u64(key, value);
    } else if (key == "n_blocks") {
        cfg.backbone.n_blocks = parse_u64(key, value);
    } else if (key == "hidden_dim") {
        cfg.backbone.hidden_dim = parse_u64(key, value);
    } else if (key == "nonlinearity") {
        if (value == "relu") cfg.backbone.nonlinearity = Nonlinearity::relu;
        else if (value == "gelu") cfg.backbone.nonlinearity = Nonlinearity::gelu;
        else throw ConfigError("nonlinearity: expected relu|gelu, got '" + value + "'");
    } else if (key == "backbone_seed") {
        cfg.backbone.seed = parse_u64(key, value);
    } else if (key == "lr") {
        cfg.train.learning_rate = parse_double(key, value);
    } else if (key == "weight_decay") {
        cfg.train.weight_decay = parse_double(key, value);
    } else if (key == "epochs") {
        cfg.train.epochs = parse_u64(key, value);
    } else if (key == "batch_size") {
        cfg.train.batch_size = parse_u64(key, value);
    } else if (key == "schedule") {
        if (value == "cosine") cfg.train.schedule = Schedule::cosine_annealing;
        else if (value == "constant") cfg.train.schedule = Schedule::constant;
        else throw ConfigError("schedule: expected cosine|constant, got '" + value + "'");
    } else if (key == "dropout") {
        cfg.train.dropout = parse_double(key, value);
    } else if (key == "bottleneck") {
        cfg.adapter.bottleneck = parse_u64(key, value);
    } else if (key == "adapter_scale") {
        cfg.adapter.scale = parse_double(key, value);
    } else if (key == "proto_split") {
        if (value == "train") cfg.proto_split = Split::train;
        else if (value == "eval") cfg.proto_split = Split::eval;
        else throw ConfigError("proto_split: expected train|eval, got '" + value + "'");
    } else if (key == "diagnostics") {
        cfg.diagnostics = parse_bool(key, value);
    } else if (key == "eval_reps") {
        cfg.eval_reps = static_cast<int>(parse_u64(key, value));
        if (cfg.eval_reps < 1) throw ConfigError("eval_reps must be >= 1");
    } else {
        throw ConfigError("unknown config key '" + key + "'");
    }
}

ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path);
    ExperimentConfig cfg = default_config();
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string stripped = trim(line.substr(0, line.find('#')));
        if (stripped.empty()) continue;
        const std::size_t eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key=value");
        }
        apply_setting(cfg, trim(stripped.substr(0, eq)), trim(stripped.substr(eq + 1)));
    }
    return cfg;
}

std::map<std::string, std::string> resolved_settings(const ExperimentConfig& cfg) {
    std::map<std::string, std::string> s;
    s["method"] = method_name(cfg.method);
    std::string seeds;
    for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
        if (i) seeds += ",";
        seeds += std::to_string(cfg.seeds[i]);
    }
    s["seeds"] = seeds;
    s["out_dir"] = cfg.out_dir;
    s["L"] = cfg.early_stop ? std::to_string(*cfg.early_stop) : "inf";
    s["tasks"] = std::to_string(cfg.stream.n_tasks);
    s["base_classes"] = std::to_string(cfg.stream.base_classes);
    s["inc_classes"] = std::to_string(cfg.stream.inc_classes);
    s["train_per_class"] = std::to_string(cfg.stream.train_per_class);
    s["eval_per_class"] = std::to_string(cfg.stream.eval_per_class);
    s["input_dim"] = std::to_string(cfg.stream.input_dim);
    s["cluster_separation"] = format_g17(cfg.stream.cluster_separation);
    s["noise_sigma"] = format_g17(cfg.stream.noise_sigma);
    s["drift"] = cfg.stream.drift_model == DriftModel::none      ? "none"
                 : cfg.stream.drift_model == DriftModel::rotation ? "rotation"
                                                                   : "offset";
    s["drift_rate"] = format_g17(cfg.stream.drift_rate);
    s["data_file"] = cfg.data_file;
    s["eval_fraction"] = format_g17(cfg.eval_fraction);
    s["embed_dim"] = std::to_string(cfg.backbone.embed_dim);
    s["n_blocks"] = std::to_string(cfg.backbone.n_blocks);
    s["hidden_dim"] = std::to_string(cfg.backbone.hidden_dim);
    s["nonlinearity"] = cfg.backbone.nonlinearity == Nonlinearity::relu ? "relu" : "gelu";
    s["backbone_seed"] = std::to_string(cfg.backbone.seed);
    s["lr"] = format_g17(cfg.train.learning_rate);
    s["weight_decay"] = format_g17(cfg.train.weight_decay);
    s["epochs"] = std::to_string(cfg.train.epochs);
    s["batch_size"] = std::to_string(cfg.train.batch_size);
    s["schedule"] = cfg.train.schedule == Schedule::cosine_annealing ? "cosine" : "constant";
    s["dropout"] = format_g17(cfg.train.dropout);
    s["bottleneck"] = std::to_string(cfg.adapter.bottleneck);
    s["adapter_scale"] = format_g17(cfg.adapter.scale);
    s["proto_split"] = cfg.proto_split == Split::train ? "train" : "eval";
    s["diagnostics"] = cfg.diagnostics ? "true" : "false";
    s["eval_reps"] = std::to_string(cfg.eval_reps);
    return s;
}

ExperimentConfig config_from_settings(const std::map<std::string, std::string>& settings) {
    ExperimentConfig cfg = default_config();
    for (const auto& [key, value] : settings) {
        if (key == "out_dir" || key == "data_file") {
            apply_setting(cfg, key, value);
        } else if (!value.empty()) {
            apply_setting(cfg, key, value);
        }
    }
    return cfg;
}

std::string resolve_out_dir(const ExperimentConfig& cfg) {
    if (!cfg.out_dir.empty()) return cfg.out_dir;
    if (const char* env = std::getenv("ACMAP_OUT_DIR"); env && *env) return env;
    return "runs";
}

TaskStream build_stream(const ExperimentConfig& cfg, std::uint64_t seed) {
    if (!cfg.data_file.empty()) {
        SplitSpec split;
        split.base_classes = cfg.stream.base_classes;
        split.inc_classes = cfg.stream.inc_classes;
        split.eval_fraction = cfg.eval_fraction;
        return load_embedding_stream(cfg.data_file, split);
    }
    StreamSpec spec = cfg.stream;
    spec.seed = seed;
    return generate_synthetic_stream(spec);
}

RunArtifacts execute_run(const ExperimentConfig& cfg, std::uint64_t seed) {
    TaskStream stream = build_stream(cfg, seed);
    BackboneConfig backbone_cfg = cfg.backbone;
    backbone_cfg.input_dim = stream.input_dim();

    RunOptions opts;
    opts.seed = seed;
    opts.adapter = cfg.adapter;
    opts.proto_split = cfg.proto_split;
    opts.diagnostics = cfg.diagnostics;
    opts.eval_reps = cfg.eval_reps;

    RunArtifacts art;
    switch (cfg.method) {
        case Method::acmap:
            art = run_acmap(stream, backbone_cfg, cfg.train, cfg.early_stop, true, true, opts);
            break;
        case Method::acmap_no_ir:
            art = run_acmap(stream, backbone_cfg, cfg.train, cfg.early_stop, false, true, opts);
            break;
        case Method::acmap_no_cm:
            art = run_acmap(stream, backbone_cfg, cfg.train, cfg.early_stop, true, false, opts);
            break;
        case Method::simplecil:
            art = run_simplecil(stream, backbone_cfg, opts);
            break;
        case Method::ensemble:
            art = run_ensemble_baseline(stream, backbone_cfg, cfg.train, opts);
            break;
    }
    ExperimentConfig echo = cfg;
    echo.seeds = {seed};
    art.report.config_echo = resolved_settings(echo);
    return art;
}

Summary summarize(const std::vector<RunReport>& reports) {
    if (reports.empty()) throw DataError("summarize: no reports");
    Summary s;
    s.method = reports.front().method;
    for (const RunReport& r : reports) {
        s.seeds.push_back(r.seed);
        s.avg_accuracy.push_back(r.avg_accuracy);
        s.final_accuracy.push_back(r.final_accuracy);
    }
    auto mean_std = [](const std::vector<double>& xs) {
        double mean = 0.0;
        for (double x : xs) mean += x;
        mean /= double(xs.size());
        double var = 0.0;
        for (double x : xs) var += (x - mean) * (x - mean);
        var /= double(xs.size());
        return std::pair<double, double>{mean, std::sqrt(var)};
    };
    std::tie(s.avg_mean, s.avg_std) = mean_std(s.avg_accuracy);
    std::tie(s.final_mean, s.final_std) = mean_std(s.final_accuracy);
    return s;
}

nlohmann::json summary_to_json(const Summary& summary,
                               const std::map<std::string, std::string>& config_echo) {
    return nlohmann::json{{"method", summary.method},
                          {"seeds", summary.seeds},
                          {"avg_accuracy", summary.avg_accuracy},
                          {"final_accuracy", summary.final_accuracy},
                          {"avg_accuracy_mean", summary.avg_mean},
                          {"avg_accuracy_std", summary.avg_std},
                          {"final_accuracy_mean", summary.final_mean},
                          {"final_accuracy_std", summary.final_std},
                          {"config", config_echo}};
}

}  // namespace acmap
