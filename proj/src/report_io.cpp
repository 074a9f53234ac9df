#include "acmap/report_io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace acmap {

using nlohmann::json;

std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

json report_to_json(const RunReport& report) {
    json timing = json::array();
    for (const PhaseTiming& t : report.timing) {
        timing.push_back({{"train_ms", t.train_ms},
                          {"prototype_ms", t.prototype_ms},
                          {"mapping_ms", t.mapping_ms},
                          {"eval_ms", t.eval_ms},
                          {"eval_forward_passes", t.eval_forward_passes},
                          {"eval_queries", t.eval_queries}});
    }
    return json{{"method", report.method},
                {"seed", report.seed},
                {"config", report.config_echo},
                {"per_task_accuracy", report.per_task_accuracy},
                {"avg_accuracy", report.avg_accuracy},
                {"final_accuracy", report.final_accuracy},
                {"forward_passes_per_query", report.forward_passes_per_query},
                {"data_access_violations", report.data_access_violations},
                {"aborted", report.aborted},
                {"abort_reason", report.abort_reason},
                {"timing", timing}};
}

RunReport report_from_json(const json& j) {
    RunReport report;
    report.method = j.at("method").get<std::string>();
    report.seed = j.at("seed").get<std::uint64_t>();
    report.config_echo = j.at("config").get<std::map<std::string, std::string>>();
    report.per_task_accuracy = j.at("per_task_accuracy").get<std::vector<double>>();
    report.avg_accuracy = j.at("avg_accuracy").get<double>();
    report.final_accuracy = j.at("final_accuracy").get<double>();
    report.forward_passes_per_query =
        j.at("forward_passes_per_query").get<std::vector<double>>();
    report.data_access_violations = j.at("data_access_violations").get<std::uint64_t>();
    report.aborted = j.at("aborted").get<bool>();
    report.abort_reason = j.at("abort_reason").get<std::string>();
    for (const json& t : j.at("timing")) {
        PhaseTiming timing;
        timing.train_ms = t.at("train_ms").get<double>();
        timing.prototype_ms = t.at("prototype_ms").get<double>();
        timing.mapping_ms = t.at("mapping_ms").get<double>();
        timing.eval_ms = t.at("eval_ms").get<double>();
        timing.eval_forward_passes = t.at("eval_forward_passes").get<std::uint64_t>();
        timing.eval_queries = t.at("eval_queries").get<std::uint64_t>();
        report.timing.push_back(timing);
    }
    return report;
}

void write_text_atomic(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    if (target.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(target.parent_path(), ec);
    }
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc | std::ios::binary);
        if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
        out << content;
        if (!out) throw IoError("short write to " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path + ": " + ec.message());
}

void write_json_atomic(const std::string& path, const json& j) {
    write_text_atomic(path, j.dump(2) + "\n");
}

json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw FormatError(path + ": " + e.what());
    }
    return j;
}

void write_accuracy_csv(const RunReport& report, const std::string& path) {
    std::ostringstream out;
    out << "task,accuracy\n";
    for (std::size_t t = 0; t < report.per_task_accuracy.size(); ++t) {
        out << (t + 1) << "," << format_g17(report.per_task_accuracy[t]) << "\n";
    }
    write_text_atomic(path, out.str());
}

void write_landscape_csv(const LandscapeGrid& grid, const std::string& path) {
    std::ostringstream out;
    out << "u,v,error\n";
    const double denom = double(grid.grid_size - 1);
    for (std::size_t i = 0; i < grid.grid_size; ++i) {
        for (std::size_t j = 0; j + i < grid.grid_size; ++j) {
            out << format_g17(double(i) / denom) << "," << format_g17(double(j) / denom) << ","
                << format_g17(grid.at(i, j)) << "\n";
        }
    }
    write_text_atomic(path, out.str());
}

void write_convergence_csv(std::span<const std::pair<std::uint32_t, double>> curve,
                           const std::string& path) {
    std::ostringstream out;
    out << "t,cos\n";
    for (const auto& [t, cos] : curve) out << t << "," << format_g17(cos) << "\n";
    write_text_atomic(path, out.str());
}

void write_alignment_csv(std::span<const AlignmentSeries> series, const std::string& path) {
    std::ostringstream out;
    out << "anchor_task,class_id,t,variant,cos\n";
    for (const AlignmentSeries& s : series) {
        const std::string name = variant_name(s.variant);
        for (std::size_t c = 0; c < s.class_ids.size(); ++c) {
            for (std::size_t col = 0; col < s.ts.size(); ++col) {
                out << s.anchor_task << "," << s.class_ids[c] << "," << s.ts[col] << "," << name
                    << "," << format_g17(s.per_class(c, col)) << "\n";
            }
        }
        for (std::size_t col = 0; col < s.ts.size(); ++col) {
            out << s.anchor_task << ",-1," << s.ts[col] << "," << name << ","
                << format_g17(s.mean_curve[col]) << "\n";
        }
    }
    write_text_atomic(path, out.str());
}

void write_prototype_csv(const PrototypeStore& store, const std::string& path) {
    std::ostringstream out;
    out << "task_id,class_id,adapter_tag,mapped_flag";
    std::size_t d = 0;
    for (const auto& [key, p] : store.entries()) {
        d = p.rows.cols();
        break;
    }
    for (std::size_t j = 0; j < d; ++j) out << ",v" << j;
    out << "\n";
    for (const auto& [key, p] : store.entries()) {
        for (std::size_t c = 0; c < p.class_ids.size(); ++c) {
            out << p.task_id << "," << p.class_ids[c] << "," << p.adapter_tag << ","
                << (p.mapped ? 1 : 0);
            for (std::size_t j = 0; j < p.rows.cols(); ++j)
                out << "," << format_g17(p.rows(c, j));
            out << "\n";
        }
    }
    write_text_atomic(path, out.str());
}

}  // namespace acmap
