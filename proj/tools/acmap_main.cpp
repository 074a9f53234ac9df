#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "acmap/diagnostics.hpp"
#include "acmap/experiment.hpp"
#include "acmap/report_io.hpp"
#include "acmap/rng.hpp"

namespace {

using namespace acmap;

struct CommonOpts {
    std::string config_path;
    std::vector<std::string> sets;
    std::string method;
    std::string seeds;
    std::string out_dir;
    std::string early_stop;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("-c,--config", opts.config_path, "key=value config file");
    cmd->add_option("--set", opts.sets, "override one config key (key=value, repeatable)");
    cmd->add_option("--method", opts.method,
                    "acmap | acmap_no_ir | acmap_no_cm | simplecil | ensemble");
    cmd->add_option("--seeds", opts.seeds, "comma-separated seed list");
    cmd->add_option("--out", opts.out_dir, "output directory");
    cmd->add_option("--L", opts.early_stop, "early-stop threshold (integer or 'inf')");
}

ExperimentConfig make_config(const CommonOpts& opts) {
    ExperimentConfig cfg =
        opts.config_path.empty() ? default_config() : load_config_file(opts.config_path);
    for (const std::string& kv : opts.sets) {
        const std::size_t eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
        apply_setting(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!opts.method.empty()) apply_setting(cfg, "method", opts.method);
    if (!opts.seeds.empty()) apply_setting(cfg, "seeds", opts.seeds);
    if (!opts.out_dir.empty()) apply_setting(cfg, "out_dir", opts.out_dir);
    if (!opts.early_stop.empty()) apply_setting(cfg, "L", opts.early_stop);
    return cfg;
}

std::string join_path(const std::string& dir, const std::string& name) {
    return (std::filesystem::path(dir) / name).string();
}

int cmd_run(const CommonOpts& common) {
    const ExperimentConfig cfg = make_config(common);
    const std::string out_dir = resolve_out_dir(cfg);
    const std::string method = method_name(cfg.method);
    std::vector<RunReport> reports;
    for (std::uint64_t seed : cfg.seeds) {
        RunArtifacts art = execute_run(cfg, seed);
        const std::string stem = "report_" + method + "_seed" + std::to_string(seed);
        write_json_atomic(join_path(out_dir, stem + ".json"), report_to_json(art.report));
        write_accuracy_csv(art.report, join_path(out_dir, stem + ".csv"));
        if (art.report.aborted) {
            // the partial report is on disk; the batch itself failed
            std::cerr << "error: [divergence] seed " << seed << ": " << art.report.abort_reason
                      << std::endl;
            return 1;
        }
        std::cout << method << " seed " << seed << ": avg=" << art.report.avg_accuracy
                  << " final=" << art.report.final_accuracy << "\n";
        reports.push_back(std::move(art.report));
    }
    const Summary summary = summarize(reports);
    write_json_atomic(join_path(out_dir, "summary_" + method + ".json"),
                      summary_to_json(summary, resolved_settings(cfg)));
    std::cout << method << " over " << reports.size() << " seeds: avg=" << summary.avg_mean
              << "+-" << summary.avg_std << " final=" << summary.final_mean << "+-"
              << summary.final_std << "\n";
    return 0;
}

int cmd_landscape(const CommonOpts& common, std::size_t first_task, std::size_t grid,
                  std::string out_file) {
    const ExperimentConfig cfg = make_config(common);
    if (cfg.method == Method::simplecil || cfg.method == Method::ensemble) {
        throw ConfigError("landscape expects an acmap method (it trains per-task adapters)");
    }
    const std::uint64_t seed = cfg.seeds.front();
    TaskStream stream = build_stream(cfg, seed);
    if (first_task < 1 || first_task + 2 > stream.task_count()) {
        throw ConfigError("landscape needs tasks " + std::to_string(first_task) + ".." +
                          std::to_string(first_task + 2) + " but the stream has " +
                          std::to_string(stream.task_count()) + " tasks");
    }
    BackboneConfig backbone_cfg = cfg.backbone;
    backbone_cfg.input_dim = stream.input_dim();
    const Backbone backbone(backbone_cfg);

    const bool ir = cfg.method != Method::acmap_no_ir;
    AdapterWeights theta_init =
        init_adapter(backbone_cfg.n_blocks, backbone_cfg.embed_dim, cfg.adapter.bottleneck,
                     cfg.adapter.scale, nullptr, derive_seed(seed, "adapter_init"));
    MergeTrail trail(std::move(theta_init), cfg.early_stop, ir);
    std::vector<AdapterWeights> kept;
    for (std::uint32_t t = 1; t <= first_task + 2; ++t) {
        stream.begin_phase(t);
        TrainConfig tc = cfg.train;
        tc.seed = task_train_seed(seed, t);
        AdapterWeights theta =
            train_task_adapter(backbone, trail.init_weights(), stream.train_batch(t), tc);
        trail.merge_step(theta);
        if (t >= first_task) kept.push_back(std::move(theta));
    }

    const std::span<const TaskDataset> tasks(stream.tasks().data() + (first_task - 1), 3);
    const LandscapeGrid result =
        landscape_scan(backbone, kept[0], kept[1], kept[2], tasks, grid);
    if (out_file.empty()) out_file = join_path(resolve_out_dir(cfg), "landscape.csv");
    write_landscape_csv(result, out_file);
    std::cout << "landscape grid G=" << grid << " over tasks " << first_task << ".."
              << first_task + 2 << " -> " << out_file << "\n";
    return 0;
}

int cmd_diagnose(const CommonOpts& common, const std::string& report_path, std::size_t anchor,
                 const std::string& true_split, std::string out_dir) {
    ExperimentConfig cfg;
    std::uint64_t seed;
    if (!report_path.empty()) {
        const RunReport saved = report_from_json(read_json(report_path));
        cfg = config_from_settings(saved.config_echo);
        seed = saved.seed;
    } else {
        cfg = make_config(common);
        seed = cfg.seeds.front();
    }
    if (cfg.method == Method::simplecil || cfg.method == Method::ensemble) {
        throw ConfigError("diagnose expects an acmap method (it needs the merge trail)");
    }
    cfg.diagnostics = true;

    TaskStream stream = build_stream(cfg, seed);
    BackboneConfig backbone_cfg = cfg.backbone;
    backbone_cfg.input_dim = stream.input_dim();

    RunOptions opts;
    opts.seed = seed;
    opts.adapter = cfg.adapter;
    opts.proto_split = cfg.proto_split;
    opts.diagnostics = true;
    const bool ir = cfg.method != Method::acmap_no_ir;
    const bool cm = cfg.method != Method::acmap_no_cm;
    RunArtifacts art =
        run_acmap(stream, backbone_cfg, cfg.train, cfg.early_stop, ir, cm, opts);
    ExperimentConfig echo = cfg;
    echo.seeds = {seed};
    art.report.config_echo = resolved_settings(echo);

    const Backbone backbone(backbone_cfg);
    if (out_dir.empty()) out_dir = join_path(resolve_out_dir(cfg), "diagnose");

    std::vector<AlignmentSeries> series;
    for (AlignmentVariant variant :
         {AlignmentVariant::mapped, AlignmentVariant::unmapped, AlignmentVariant::sdc}) {
        if (true_split.empty()) {
            series.push_back(cosine_alignment_curve(backbone, stream, art,
                                                    static_cast<std::uint32_t>(anchor), variant));
        } else if (true_split == "train" || true_split == "eval") {
            series.push_back(cosine_alignment_curve(
                backbone, stream, art, static_cast<std::uint32_t>(anchor), variant,
                true_split == "train" ? Split::train : Split::eval));
        } else {
            throw ConfigError("--true-split expects train|eval");
        }
    }
    write_alignment_csv(series, join_path(out_dir, "alignment.csv"));
    if (art.trail && art.trail->snapshot_count() >= 2) {
        const auto curve = merge_convergence_curve(art);
        write_convergence_csv(curve, join_path(out_dir, "convergence.csv"));
    }
    write_prototype_csv(art.store, join_path(out_dir, "prototypes.csv"));
    write_json_atomic(join_path(out_dir, "report.json"), report_to_json(art.report));
    std::cout << "diagnostics for anchor task " << anchor << " -> " << out_dir << "\n";
    return 0;
}

int cmd_gen_data(const CommonOpts& common, std::string out_file, const std::string& format) {
    const ExperimentConfig cfg = make_config(common);
    StreamSpec spec = cfg.stream;
    spec.seed = cfg.seeds.front();
    const TaskStream stream = generate_synthetic_stream(spec);
    if (out_file.empty()) {
        out_file = join_path(resolve_out_dir(cfg),
                             format == "csv" ? "stream.csv" : "stream.emb");
    }
    if (format == "emb") {
        write_embedding_file(stream, out_file);
    } else if (format == "csv") {
        write_embedding_csv(stream, out_file);
    } else {
        throw ConfigError("--format expects emb|csv");
    }
    std::size_t n = 0;
    for (const TaskDataset& t : stream.tasks()) n += t.samples.size();
    std::cout << "wrote " << n << " samples, dim " << stream.input_dim() << ", "
              << (spec.base_classes + (spec.n_tasks - 1) * spec.inc_classes) << " classes -> "
              << out_file << "\n";
    return 0;
}

int cmd_validate(const std::string& file) {
    const EmbeddingInfo info = validate_embedding_file(file);
    std::cout << file << ": " << info.n << " records, dim " << info.dim << ", "
              << info.n_classes << " classes, min " << info.min_class_count
              << " samples per class\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"exemplar-free class-incremental learning with merged bottleneck adapters"};
    app.require_subcommand(1);

    CommonOpts run_opts;
    CLI::App* run = app.add_subcommand("run", "run a method over all seeds and write reports");
    add_common(run, run_opts);

    CommonOpts landscape_opts;
    std::size_t first_task = 1;
    std::size_t grid = 11;
    std::string landscape_out;
    CLI::App* landscape = app.add_subcommand(
        "landscape", "train three consecutive task adapters and scan the interpolation simplex");
    add_common(landscape, landscape_opts);
    landscape->add_option("--first-task", first_task, "first of the three consecutive tasks");
    landscape->add_option("--grid", grid, "lattice points per side");
    landscape->add_option("--out-file", landscape_out, "output CSV path");

    CommonOpts diag_opts;
    std::string report_path;
    std::size_t anchor = 1;
    std::string true_split;
    std::string diag_out;
    CLI::App* diagnose =
        app.add_subcommand("diagnose", "alignment and convergence curves from a saved run");
    add_common(diagnose, diag_opts);
    diagnose->add_option("--report", report_path, "reproduce the run from this report JSON");
    diagnose->add_option("--anchor", anchor, "anchor task for the alignment curves");
    diagnose->add_option("--true-split", true_split,
                         "split the true prototypes come from (default: the run's prototype split)");
    diagnose->add_option("--out-dir", diag_out, "output directory for the curve CSVs");

    CommonOpts gen_opts;
    std::string gen_out;
    std::string gen_format = "emb";
    CLI::App* gen = app.add_subcommand("gen-data", "write a synthetic stream as an embedding file");
    add_common(gen, gen_opts);
    gen->add_option("--out-file", gen_out, "output path");
    gen->add_option("--format", gen_format, "emb (binary) or csv");

    std::string validate_file;
    CLI::App* validate = app.add_subcommand("validate", "check an embedding file");
    validate->add_option("file", validate_file, "embedding file to check")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        std::cerr << "error: [usage] " << e.what() << std::endl;
        return 2;
    }

    try {
        if (app.got_subcommand(run)) return cmd_run(run_opts);
        if (app.got_subcommand(landscape))
            return cmd_landscape(landscape_opts, first_task, grid, landscape_out);
        if (app.got_subcommand(diagnose))
            return cmd_diagnose(diag_opts, report_path, anchor, true_split, diag_out);
        if (app.got_subcommand(gen)) return cmd_gen_data(gen_opts, gen_out, gen_format);
        if (app.got_subcommand(validate)) return cmd_validate(validate_file);
    } catch (const ConfigError& e) {
        std::cerr << "error: [config] " << e.what() << std::endl;
        return 3;
    } catch (const Error& e) {
        std::cerr << "error: [" << e.kind() << "] " << e.what() << std::endl;
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: [runtime] " << e.what() << std::endl;
        return 1;
    }
    return 0;
}
