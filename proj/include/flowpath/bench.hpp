#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "flowpath/samplers.hpp"
#include "flowpath/target.hpp"

namespace flowpath::bench {

struct TargetSpec {
    std::string name;
    TargetDistribution dist;
};

struct SamplerSpec {
    std::string id;  // ddim | euler-fm | heun-fm | flops | aflops | a-euler | rk4-oracle
    AdaptiveConfig adaptive;
    bool alg1_verbatim = false;
};

struct ScheduleSpec {
    std::string kind = "vp-linear";
    double beta0 = 0.1, beta1 = 20.0;
    double horizon = 1.0;
    double offset = 0.008, shave = 0.005;  // vp-cosine
    NoiseSchedule build() const;
};

struct MetricsConfig {
    int projections = 128;
    bool energy = true;
    bool moments = true;
    bool oracle_rmse = false;
    Eigen::Index energy_subsample = 2048;
};

struct OracleConfig {
    long long fine_steps = 20000;
    std::vector<int> ladder = {10, 20, 40, 80, 160};
    int chains = 16;
};

struct ExperimentConfig {
    std::vector<TargetSpec> targets;
    ScheduleSpec schedule;
    std::vector<SamplerSpec> samplers;
    std::vector<int> steps = {5, 6, 7, 8, 9, 10};
    int chains = 10000;
    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
    MetricsConfig metrics;
    OracleConfig oracle;
    std::string output_dir = "out";
    int workers = 0;  // 0 = hardware concurrency

    nlohmann::json canonical;  // fully-defaulted form; hashing input
    std::string hash() const;
};

/// The shipped benchmark suite: five 2-D targets (dirac, standard gaussian,
/// anisotropic gaussian, 3-component symmetric mixture, 8-component ring),
/// vp-linear(0.1, 20) schedule, all samplers, N in 5..10, 10^4 chains, 5 seeds.
ExperimentConfig default_config();

/// Parse + strict-validate a JSON config file: unknown keys are errors, all
/// omitted sections take defaults, diagnostics name the offending key.
ExperimentConfig validate_config(const std::string& path);
ExperimentConfig config_from_json(const nlohmann::json& j);

struct CellResult {
    std::string target, sampler;
    int steps = 0;
    long long nfe = 0;
    std::uint64_t seed = 0;
    double sliced_w2 = 0, energy = 0, mean_err = 0, cov_err = 0, oracle_rmse = 0;
    double wall_ms = 0;
    std::uint64_t x0_hash = 0;
    std::string status = "ok";
};

struct OrderResult {
    std::string target, sampler;
    double slope = 0;
    std::vector<std::pair<int, double>> rmse;  // (N, endpoint rmse vs oracle)
    std::string status = "ok";
};

struct RunManifest {
    std::string config_hash, tool_version, platform;
    std::string output_dir;
    std::string mode;  // "sweep" | "order-study"
    int failures = 0;
    std::vector<CellResult> cells;
    std::vector<OrderResult> orders;
    std::vector<std::string> warnings;
    // target -> (exact-points file, sampler -> endpoint-points file)
    std::map<std::string, std::pair<std::string, std::map<std::string, std::string>>> points;

    nlohmann::json to_json() const;
    static RunManifest from_json(const nlohmann::json& j);
};

/// Full (target x sampler x N x seed) sweep. Per cell: shared seeded initial
/// batch (identical across samplers), sampler run per chain, metrics against
/// a fresh exact sample of equal size. Cell errors are recorded and the
/// sweep continues. Writes results.csv, manifest.json, and point sidecars
/// under config.output_dir.
RunManifest run_sweep(const ExperimentConfig& config);

/// Endpoint-RMSE-vs-oracle ladder per (target, sampler) and the fitted
/// log-log slope. Writes order.csv and manifest.json.
RunManifest run_order_study(const ExperimentConfig& config);

/// Per target: a scatter overlay (exact sample vs sampler endpoints at the
/// smallest N) and a metric-vs-NFE chart. Missing cells leave gaps and add
/// manifest warnings. Returns the created file paths.
std::vector<std::string> emit_plots(RunManifest& manifest, const std::string& out_dir);

/// CSV renderings (also written to disk by the runners).
std::string sweep_csv(const RunManifest& manifest);
std::string order_csv(const RunManifest& manifest);

std::string platform_string();

}  // namespace flowpath::bench
