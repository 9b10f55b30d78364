#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "flowpath/bench.hpp"
#include "flowpath/version.hpp"

namespace {

using flowpath::bench::ExperimentConfig;

/// Precedence: command line > environment > config file.
void apply_overrides(ExperimentConfig& cfg, const std::string& cli_out, int cli_workers) {
    if (const char* env = std::getenv("FLOWBENCH_OUT"); env && *env) cfg.output_dir = env;
    if (const char* env = std::getenv("FLOWBENCH_WORKERS"); env && *env)
        cfg.workers = std::atoi(env);
    if (!cli_out.empty()) cfg.output_dir = cli_out;
    if (cli_workers >= 0) cfg.workers = cli_workers;
}

ExperimentConfig load_config(const std::string& path) {
    return path.empty() ? flowpath::bench::default_config() : flowpath::bench::validate_config(path);
}

int report(const flowpath::bench::RunManifest& manifest) {
    int bad = 0;
    for (const auto& c : manifest.cells)
        if (c.status != "ok") {
            std::cerr << "cell (" << c.target << ", " << c.sampler << ", N=" << c.steps
                      << ", seed=" << c.seed << ") failed: " << c.status << "\n";
            ++bad;
        }
    for (const auto& o : manifest.orders)
        if (o.status != "ok") {
            std::cerr << "order cell (" << o.target << ", " << o.sampler
                      << ") failed: " << o.status << "\n";
            ++bad;
        }
    std::cout << "wrote " << manifest.output_dir << " (config " << manifest.config_hash << ", "
              << manifest.cells.size() + manifest.orders.size() << " cells, " << bad
              << " failed)\n";
    return bad > 0 ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"flow-path sampler benchmark harness"};
    app.set_version_flag("--version", flowpath::kToolVersion);
    app.require_subcommand(1);

    std::string config_path, out_dir, manifest_path;
    int workers = -1;

    auto add_common = [&](CLI::App* cmd, bool config_required) {
        auto* opt = cmd->add_option("--config", config_path, "JSON experiment config");
        if (config_required) opt->required();
        cmd->add_option("--out", out_dir, "output directory override");
        cmd->add_option("--workers", workers, "worker thread count (0 = all cores)");
    };

    auto* cmd_run = app.add_subcommand("run", "run the benchmark sweep");
    add_common(cmd_run, false);
    auto* cmd_order = app.add_subcommand("order-study", "convergence-order study vs rk4 oracle");
    add_common(cmd_order, false);
    auto* cmd_plot = app.add_subcommand("plot", "render SVG plots from a sweep manifest");
    cmd_plot->add_option("--manifest", manifest_path, "manifest.json from a sweep")->required();
    cmd_plot->add_option("--out", out_dir, "output directory for SVGs");
    auto* cmd_validate = app.add_subcommand("validate", "parse and validate a config file");
    cmd_validate->add_option("--config", config_path, "JSON experiment config")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (cmd_validate->parsed()) {
            const ExperimentConfig cfg = load_config(config_path);
            std::cout << "ok: " << cfg.targets.size() << " targets, " << cfg.samplers.size()
                      << " samplers, " << cfg.steps.size() << " step counts, "
                      << cfg.seeds.size() << " seeds (hash " << cfg.hash() << ")\n";
            return 0;
        }
        if (cmd_run->parsed()) {
            ExperimentConfig cfg = load_config(config_path);
            apply_overrides(cfg, out_dir, workers);
            return report(flowpath::bench::run_sweep(cfg));
        }
        if (cmd_order->parsed()) {
            ExperimentConfig cfg = load_config(config_path);
            apply_overrides(cfg, out_dir, workers);
            return report(flowpath::bench::run_order_study(cfg));
        }
        if (cmd_plot->parsed()) {
            std::ifstream in(manifest_path);
            if (!in) {
                std::cerr << "cannot open manifest '" << manifest_path << "'\n";
                return 2;
            }
            nlohmann::json j;
            in >> j;
            auto manifest = flowpath::bench::RunManifest::from_json(j);
            if (const char* env = std::getenv("FLOWBENCH_OUT"); env && *env && out_dir.empty())
                out_dir = env;
            const std::string dest = out_dir.empty() ? manifest.output_dir : out_dir;
            const auto files = flowpath::bench::emit_plots(manifest, dest);
            for (const auto& w : manifest.warnings) std::cerr << "warning: " << w << "\n";
            std::ofstream(manifest_path, std::ios::binary) << manifest.to_json().dump(2) << "\n";
            for (const auto& f : files) std::cout << f << "\n";
            return 0;
        }
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
