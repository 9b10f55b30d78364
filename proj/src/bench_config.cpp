#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

#include "flowpath/bench.hpp"
#include "flowpath/rng.hpp"
#include "flowpath/version.hpp"

namespace flowpath::bench {

using nlohmann::json;

namespace {

const std::set<std::string> kSamplerIds = {"ddim",   "euler-fm", "heun-fm",   "flops",
                                           "aflops", "a-euler",  "rk4-oracle"};

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) fail(where + ": expected a table");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key())) fail(where + ": unknown key '" + it.key() + "'");
}

Eigen::VectorXd parse_vector(const json& j, const std::string& where) {
    if (!j.is_array() || j.empty()) fail(where + ": expected a nonempty array of numbers");
    Eigen::VectorXd v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) fail(where + ": expected numbers");
        v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    }
    return v;
}

Eigen::MatrixXd parse_matrix(const json& j, const std::string& where) {
    if (!j.is_array() || j.empty()) fail(where + ": expected an array of rows");
    const std::size_t rows = j.size();
    Eigen::MatrixXd m;
    for (std::size_t i = 0; i < rows; ++i) {
        const Eigen::VectorXd row = parse_vector(j[i], where + " row " + std::to_string(i));
        if (i == 0) m.resize(static_cast<Eigen::Index>(rows), row.size());
        if (row.size() != m.cols()) fail(where + ": ragged rows");
        m.row(static_cast<Eigen::Index>(i)) = row.transpose();
    }
    return m;
}

TargetSpec parse_target(const json& j, std::size_t index) {
    const std::string where = "targets[" + std::to_string(index) + "]";
    check_keys(j, {"name", "kind", "mean", "cov", "components"}, where);
    const std::string name = j.value("name", "target" + std::to_string(index));
    const std::string kind = j.value("kind", "gaussian");
    try {
        if (kind == "dirac") {
            if (!j.contains("mean")) fail(where + ": dirac needs 'mean'");
            return {name, TargetDistribution::dirac(parse_vector(j.at("mean"), where + ".mean"))};
        }
        if (kind == "gaussian") {
            if (!j.contains("mean") || !j.contains("cov"))
                fail(where + ": gaussian needs 'mean' and 'cov'");
            return {name, TargetDistribution::gaussian(parse_vector(j.at("mean"), where + ".mean"),
                                                       parse_matrix(j.at("cov"), where + ".cov"))};
        }
        if (kind == "mixture" || kind == "gaussian-mixture") {
            if (!j.contains("components")) fail(where + ": mixture needs 'components'");
            std::vector<MixtureComponent> comps;
            const auto& arr = j.at("components");
            if (!arr.is_array() || arr.empty()) fail(where + ".components: nonempty array expected");
            for (std::size_t k = 0; k < arr.size(); ++k) {
                const std::string cw = where + ".components[" + std::to_string(k) + "]";
                check_keys(arr[k], {"weight", "mean", "cov"}, cw);
                MixtureComponent c;
                c.weight = arr[k].value("weight", 1.0);
                c.mean = parse_vector(arr[k].at("mean"), cw + ".mean");
                c.cov = parse_matrix(arr[k].at("cov"), cw + ".cov");
                comps.push_back(std::move(c));
            }
            return {name, TargetDistribution::mixture(std::move(comps))};
        }
        fail(where + ": kind must be dirac | gaussian | mixture");
    } catch (const std::invalid_argument& e) {
        fail("target '" + name + "': " + e.what());
    }
}

SamplerSpec parse_sampler(const json& j, std::size_t index) {
    const std::string where = "samplers[" + std::to_string(index) + "]";
    check_keys(j, {"id", "lambda_clamp", "coefficient_mode", "degenerate_eps", "alg1_verbatim"},
               where);
    SamplerSpec spec;
    if (!j.contains("id")) fail(where + ": missing 'id'");
    spec.id = j.at("id").get<std::string>();
    if (!kSamplerIds.count(spec.id))
        fail(where + ": unknown sampler id '" + spec.id +
             "' (expected ddim | euler-fm | heun-fm | flops | aflops | a-euler | rk4-oracle)");
    if (j.contains("lambda_clamp")) {
        const auto& c = j.at("lambda_clamp");
        if (!c.is_array() || c.size() != 2) fail(where + ".lambda_clamp: expected [lo, hi]");
        spec.adaptive.lambda_min = c[0].get<double>();
        spec.adaptive.lambda_max = c[1].get<double>();
        if (spec.adaptive.lambda_min > spec.adaptive.lambda_max)
            fail(where + ".lambda_clamp: empty interval [" + std::to_string(spec.adaptive.lambda_min) +
                 ", " + std::to_string(spec.adaptive.lambda_max) + "]");
    }
    if (j.contains("coefficient_mode")) {
        const std::string m = j.at("coefficient_mode").get<std::string>();
        if (m == "taylor2")
            spec.adaptive.mode = CoefficientMode::Taylor2;
        else if (m == "exact-integral")
            spec.adaptive.mode = CoefficientMode::ExactIntegral;
        else if (m == "paper-eq12")
            spec.adaptive.mode = CoefficientMode::PaperEq12;
        else
            fail(where + ".coefficient_mode: expected taylor2 | exact-integral | paper-eq12");
    }
    spec.adaptive.degenerate_dx_eps = j.value("degenerate_eps", 1e-12);
    if (!(spec.adaptive.degenerate_dx_eps > 0.0)) fail(where + ".degenerate_eps: must be > 0");
    spec.alg1_verbatim = j.value("alg1_verbatim", false);
    return spec;
}

ScheduleSpec parse_schedule(const json& j) {
    check_keys(j, {"kind", "beta0", "beta1", "horizon", "offset", "shave"}, "schedule");
    ScheduleSpec s;
    s.kind = j.value("kind", "vp-linear");
    if (s.kind != "vp-linear" && s.kind != "vp-cosine")
        fail("schedule.kind: expected vp-linear | vp-cosine");
    s.beta0 = j.value("beta0", 0.1);
    s.beta1 = j.value("beta1", 20.0);
    s.horizon = j.value("horizon", 1.0);
    s.offset = j.value("offset", 0.008);
    s.shave = j.value("shave", 0.005);
    s.build();  // surface parameter errors at validation time
    return s;
}

const char* mode_name(CoefficientMode m) {
    switch (m) {
        case CoefficientMode::Taylor2: return "taylor2";
        case CoefficientMode::ExactIntegral: return "exact-integral";
        case CoefficientMode::PaperEq12: return "paper-eq12";
    }
    return "taylor2";
}

json target_canonical(const TargetSpec& t) {
    json comps = json::array();
    for (const auto& c : t.dist.components()) {
        json jc;
        jc["weight"] = c.weight;
        jc["mean"] = std::vector<double>(c.mean.data(), c.mean.data() + c.mean.size());
        json rows = json::array();
        for (Eigen::Index i = 0; i < c.cov.rows(); ++i)
            rows.push_back(std::vector<double>(c.cov.row(i).begin(), c.cov.row(i).end()));
        jc["cov"] = rows;
        comps.push_back(jc);
    }
    json out;
    out["name"] = t.name;
    out["kind"] = t.dist.is_dirac() ? "dirac" : "mixture";
    out["components"] = comps;
    return out;
}

void build_canonical(ExperimentConfig& c) {
    json j;
    j["chains"] = c.chains;
    j["steps"] = c.steps;
    j["seeds"] = c.seeds;
    j["schedule"] = {{"kind", c.schedule.kind},     {"beta0", c.schedule.beta0},
                     {"beta1", c.schedule.beta1},   {"horizon", c.schedule.horizon},
                     {"offset", c.schedule.offset}, {"shave", c.schedule.shave}};
    j["metrics"] = {{"projections", c.metrics.projections},
                    {"energy", c.metrics.energy},
                    {"moments", c.metrics.moments},
                    {"oracle_rmse", c.metrics.oracle_rmse},
                    {"energy_subsample", c.metrics.energy_subsample}};
    j["oracle"] = {{"fine_steps", c.oracle.fine_steps},
                   {"ladder", c.oracle.ladder},
                   {"chains", c.oracle.chains}};
    json samplers = json::array();
    for (const auto& s : c.samplers)
        samplers.push_back({{"id", s.id},
                            {"lambda_clamp", {s.adaptive.lambda_min, s.adaptive.lambda_max}},
                            {"coefficient_mode", mode_name(s.adaptive.mode)},
                            {"degenerate_eps", s.adaptive.degenerate_dx_eps},
                            {"alg1_verbatim", s.alg1_verbatim}});
    j["samplers"] = samplers;
    json targets = json::array();
    for (const auto& t : c.targets) targets.push_back(target_canonical(t));
    j["targets"] = targets;
    c.canonical = std::move(j);
}

void validate_invariants(const ExperimentConfig& c) {
    if (c.targets.empty()) fail("targets: at least one target required");
    if (c.samplers.empty()) fail("samplers: at least one sampler required");
    if (c.steps.empty()) fail("steps: at least one step count required");
    for (int n : c.steps)
        if (n < 1) fail("steps: step counts must be >= 1");
    if (c.chains < 2) fail("chains: need at least 2 chains for metrics");
    if (c.seeds.empty()) fail("seeds: at least one seed required");
    std::set<std::uint64_t> distinct(c.seeds.begin(), c.seeds.end());
    if (distinct.size() != c.seeds.size()) fail("seeds: all seeds must be distinct");
    const int min_steps = *std::min_element(c.steps.begin(), c.steps.end());
    for (const auto& s : c.samplers)
        if ((s.id == "aflops" || s.id == "a-euler") && min_steps < 2)
            fail("sampler '" + s.id + "' needs step counts >= 2");
    if (c.metrics.projections < 1) fail("metrics.projections: must be >= 1");
    if (c.metrics.energy_subsample < 2) fail("metrics.energy_subsample: must be >= 2");
    if (c.oracle.fine_steps < 10000) fail("oracle.fine_steps: must be >= 10000");
    if (c.oracle.chains < 1) fail("oracle.chains: must be >= 1");
    std::set<std::string> names;
    for (const auto& t : c.targets)
        if (!names.insert(t.name).second) fail("targets: duplicate name '" + t.name + "'");
}

}  // namespace

NoiseSchedule ScheduleSpec::build() const {
    if (kind == "vp-linear") return NoiseSchedule::vp_linear(beta0, beta1, horizon);
    if (kind == "vp-cosine") return NoiseSchedule::vp_cosine(horizon, offset, shave);
    fail("schedule.kind: expected vp-linear | vp-cosine");
}

std::string ExperimentConfig::hash() const {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(canonical.dump())));
    return buf;
}

ExperimentConfig default_config() {
    ExperimentConfig c;

    c.targets.push_back({"dirac", TargetDistribution::dirac(Eigen::Vector2d(1.0, -0.5))});
    c.targets.push_back({"gauss", TargetDistribution::gaussian(Eigen::Vector2d(0.0, 0.0),
                                                               Eigen::Matrix2d::Identity())});
    Eigen::Matrix2d aniso;
    aniso << 2.0, 0.6, 0.6, 0.4;
    c.targets.push_back(
        {"aniso", TargetDistribution::gaussian(Eigen::Vector2d(0.0, 0.0), aniso)});

    std::vector<MixtureComponent> mix3;
    const double r3 = 2.0;
    for (int k = 0; k < 3; ++k) {
        const double ang = 2.0 * M_PI * k / 3.0;
        mix3.push_back({1.0 / 3.0, Eigen::Vector2d(r3 * std::cos(ang), r3 * std::sin(ang)),
                        0.25 * Eigen::Matrix2d::Identity()});
    }
    c.targets.push_back({"mix3", TargetDistribution::mixture(std::move(mix3))});

    std::vector<MixtureComponent> ring;
    const double r8 = 3.0;
    for (int k = 0; k < 8; ++k) {
        const double ang = 2.0 * M_PI * k / 8.0;
        ring.push_back({1.0 / 8.0, Eigen::Vector2d(r8 * std::cos(ang), r8 * std::sin(ang)),
                        0.16 * Eigen::Matrix2d::Identity()});
    }
    c.targets.push_back({"ring8", TargetDistribution::mixture(std::move(ring))});

    for (const char* id : {"ddim", "euler-fm", "heun-fm", "flops", "aflops", "a-euler"}) {
        SamplerSpec s;
        s.id = id;
        c.samplers.push_back(std::move(s));
    }

    build_canonical(c);
    validate_invariants(c);
    return c;
}

namespace {
ExperimentConfig config_from_json_impl(const json& j);
}

ExperimentConfig config_from_json(const json& j) {
    try {
        return config_from_json_impl(j);
    } catch (const json::exception& e) {
        fail(std::string("config: ") + e.what());
    }
}

namespace {

ExperimentConfig config_from_json_impl(const json& j) {
    check_keys(j,
               {"targets", "schedule", "samplers", "steps", "chains", "seeds", "metrics", "oracle",
                "output_dir", "workers"},
               "config");
    ExperimentConfig defaults = default_config();
    ExperimentConfig c;

    if (j.contains("targets")) {
        const auto& arr = j.at("targets");
        if (!arr.is_array() || arr.empty()) fail("targets: nonempty array expected");
        for (std::size_t i = 0; i < arr.size(); ++i) c.targets.push_back(parse_target(arr[i], i));
    } else {
        c.targets = std::move(defaults.targets);
    }

    if (j.contains("samplers")) {
        const auto& arr = j.at("samplers");
        if (!arr.is_array() || arr.empty()) fail("samplers: nonempty array expected");
        for (std::size_t i = 0; i < arr.size(); ++i) c.samplers.push_back(parse_sampler(arr[i], i));
    } else {
        c.samplers = std::move(defaults.samplers);
    }

    if (j.contains("schedule")) c.schedule = parse_schedule(j.at("schedule"));

    if (j.contains("steps")) {
        c.steps.clear();
        for (const auto& n : j.at("steps")) c.steps.push_back(n.get<int>());
    }
    if (j.contains("chains")) c.chains = j.at("chains").get<int>();
    if (j.contains("seeds")) {
        c.seeds.clear();
        for (const auto& s : j.at("seeds")) c.seeds.push_back(s.get<std::uint64_t>());
    }
    if (j.contains("metrics")) {
        const auto& m = j.at("metrics");
        check_keys(m, {"projections", "energy", "moments", "oracle_rmse", "energy_subsample"},
                   "metrics");
        c.metrics.projections = m.value("projections", c.metrics.projections);
        c.metrics.energy = m.value("energy", c.metrics.energy);
        c.metrics.moments = m.value("moments", c.metrics.moments);
        c.metrics.oracle_rmse = m.value("oracle_rmse", c.metrics.oracle_rmse);
        c.metrics.energy_subsample =
            m.value("energy_subsample", static_cast<long long>(c.metrics.energy_subsample));
    }
    if (j.contains("oracle")) {
        const auto& o = j.at("oracle");
        check_keys(o, {"fine_steps", "ladder", "chains"}, "oracle");
        c.oracle.fine_steps = o.value("fine_steps", c.oracle.fine_steps);
        if (o.contains("ladder")) {
            c.oracle.ladder.clear();
            for (const auto& n : o.at("ladder")) c.oracle.ladder.push_back(n.get<int>());
        }
        c.oracle.chains = o.value("chains", c.oracle.chains);
    }
    c.output_dir = j.value("output_dir", c.output_dir);
    c.workers = j.value("workers", c.workers);
    if (c.workers < 0) fail("workers: must be >= 0");

    build_canonical(c);
    validate_invariants(c);
    return c;
}

}  // namespace

ExperimentConfig validate_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("cannot open config file '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        fail("config parse error in '" + path + "': " + e.what());
    }
    return config_from_json(j);
}

std::string platform_string() {
    std::string s = "unknown";
#if defined(__linux__)
    s = "linux";
#elif defined(__APPLE__)
    s = "darwin";
#elif defined(_WIN32)
    s = "windows";
#endif
#if defined(__x86_64__)
    s += " x86_64";
#elif defined(__aarch64__)
    s += " aarch64";
#endif
#if defined(__clang__)
    s += " clang-" + std::to_string(__clang_major__);
#elif defined(__GNUC__)
    s += " gcc-" + std::to_string(__GNUC__) + "." + std::to_string(__GNUC_MINOR__);
#endif
    return s;
}

}  // namespace flowpath::bench
