#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <thread>

#include "flowpath/bench.hpp"
#include "flowpath/metrics.hpp"
#include "flowpath/rng.hpp"
#include "flowpath/version.hpp"

namespace flowpath::bench {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr Eigen::Index kScatterRows = 1000;

std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string sanitize(const std::string& s) {
    std::string out;
    for (char c : s) out += (std::isalnum(static_cast<unsigned char>(c)) ? c : '_');
    return out;
}

long long expected_nfe(const std::string& id, int steps, long long fine_steps) {
    if (id == "heun-fm") return 2LL * steps;
    if (id == "rk4-oracle") return 4LL * fine_steps;
    return steps;  // euler-fm, flops, aflops, a-euler, ddim
}

struct CellJob {
    const TargetSpec* target;
    const SamplerSpec* sampler;
    int steps;
    std::uint64_t seed;
    bool keep_scatter;
};

struct CellOutput {
    CellResult result;
    Eigen::MatrixXd scatter;  // only when keep_scatter
};

/// Run every chain of one (target, sampler, N, seed) cell and score it
/// against a fresh exact sample. Any exception is captured in the status.
CellOutput run_cell(const ExperimentConfig& cfg, const CellJob& job,
                    const NoiseSchedule& schedule) {
    CellOutput out;
    CellResult& r = out.result;
    r.target = job.target->name;
    r.sampler = job.sampler->id;
    r.steps = job.steps;
    r.seed = job.seed;
    r.sliced_w2 = r.energy = r.mean_err = r.cov_err = r.oracle_rmse = kNaN;

    const auto t_start = std::chrono::steady_clock::now();
    try {
        const TargetDistribution& target = job.target->dist;
        const Eigen::Index d = target.dim();
        const std::uint64_t tkey = fnv1a64(job.target->name);
        const std::string& id = job.sampler->id;
        const int N = job.steps;

        const Eigen::MatrixXd z =
            Rng(derive_seed("x0", tkey, job.seed)).normal_matrix(cfg.chains, d);
        r.x0_hash = hash_matrix(z);

        const TimeGrid grid = TimeGrid::uniform(N);
        const long long want_nfe = expected_nfe(id, N, cfg.oracle.fine_steps);
        Eigen::MatrixXd endpoints(cfg.chains, d);

        const bool diffusion_side = (id == "ddim" || id == "flops" || id == "aflops");
        ScoreOracle score = diffusion_side
                                ? exact_score_oracle(target, schedule)
                                : ScoreOracle([](const Eigen::VectorXd& y, double) { return y; },
                                              schedule);
        std::unique_ptr<VelocityField> field;
        if (id == "flops" || id == "aflops") {
            TransformOptions opt;
            opt.alg1_verbatim = job.sampler->alg1_verbatim;
            field = std::make_unique<VelocityField>(
                to_flow_velocity(score, TimeMap(schedule), std::move(opt)));
        } else if (id != "ddim") {
            field = std::make_unique<VelocityField>(analytic_fm_field(target));
        }
        const double sigma_T = schedule.marginal_coeffs(schedule.horizon()).second;

        for (Eigen::Index i = 0; i < cfg.chains; ++i) {
            const Eigen::VectorXd x0 = z.row(i).transpose();
            long long got_nfe = want_nfe;
            if (id == "ddim") {
                const SamplerRun run = ddim(score, schedule, N, sigma_T * x0);
                endpoints.row(i) = run.endpoint().transpose();
                got_nfe = run.nfe;
            } else if (id == "euler-fm" || id == "flops") {
                SamplerRun run = euler_fm(*field, grid, x0);
                endpoints.row(i) = run.endpoint().transpose();
                got_nfe = run.nfe;
            } else if (id == "heun-fm") {
                const SamplerRun run = heun_fm(*field, grid, x0);
                endpoints.row(i) = run.endpoint().transpose();
                got_nfe = run.nfe;
            } else if (id == "aflops" || id == "a-euler") {
                const SamplerRun run = a_euler(*field, grid, x0, job.sampler->adaptive);
                endpoints.row(i) = run.endpoint().transpose();
                got_nfe = run.nfe;
            } else if (id == "rk4-oracle") {
                const long long before = field->evaluations();
                endpoints.row(i) = rk4_oracle(*field, x0, cfg.oracle.fine_steps).transpose();
                got_nfe = field->evaluations() - before;
            } else {
                throw std::invalid_argument("unknown sampler id '" + id + "'");
            }
            if (got_nfe != want_nfe)
                throw std::runtime_error(id + ": nfe accounting violated (got " +
                                         std::to_string(got_nfe) + ", declared " +
                                         std::to_string(want_nfe) + ")");
        }
        r.nfe = want_nfe;

        const Eigen::MatrixXd exact =
            target.sample_exact(cfg.chains, derive_seed("exact", tkey, job.seed));
        r.sliced_w2 = sliced_w2(endpoints, exact, cfg.metrics.projections,
                                derive_seed("proj", tkey, job.seed));
        if (cfg.metrics.energy)
            r.energy = energy_distance(endpoints, exact, cfg.metrics.energy_subsample,
                                       derive_seed("energy", tkey, job.seed));
        if (cfg.metrics.moments) {
            const auto [me, ce] = moment_errors(endpoints, target);
            r.mean_err = me;
            r.cov_err = ce;
        }
        if (cfg.metrics.oracle_rmse && field) {
            double acc = 0.0;
            for (Eigen::Index i = 0; i < cfg.chains; ++i) {
                const Eigen::VectorXd ref =
                    rk4_oracle(*field, z.row(i).transpose(), cfg.oracle.fine_steps);
                acc += (endpoints.row(i).transpose() - ref).squaredNorm();
            }
            r.oracle_rmse = std::sqrt(acc / static_cast<double>(cfg.chains));
        }

        if (job.keep_scatter) {
            const Eigen::Index rows = std::min<Eigen::Index>(kScatterRows, endpoints.rows());
            out.scatter = endpoints.topRows(rows);
        }
    } catch (const std::exception& e) {
        r.status = e.what();
    }
    r.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                          t_start)
                    .count();
    return out;
}

void parallel_for_jobs(std::size_t count, int workers, const std::function<void(std::size_t)>& fn) {
    int n = workers > 0 ? workers : static_cast<int>(std::thread::hardware_concurrency());
    if (n < 1) n = 1;
    n = std::min<int>(n, static_cast<int>(count));
    if (n <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n));
    for (int w = 0; w < n; ++w)
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= count) return;
                fn(i);
            }
        });
    for (auto& t : pool) t.join();
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << content;
}

std::string points_csv(const Eigen::MatrixXd& pts) {
    std::string out = "x,y\n";
    for (Eigen::Index i = 0; i < pts.rows(); ++i) {
        out += fmt(pts(i, 0));
        out += ',';
        out += fmt(pts.cols() > 1 ? pts(i, 1) : 0.0);
        out += '\n';
    }
    return out;
}

RunManifest make_manifest(const ExperimentConfig& cfg, const std::string& mode) {
    RunManifest m;
    m.config_hash = cfg.hash();
    m.tool_version = kToolVersion;
    m.platform = platform_string();
    m.output_dir = cfg.output_dir;
    m.mode = mode;
    return m;
}

}  // namespace

RunManifest run_sweep(const ExperimentConfig& cfg) {
    const NoiseSchedule schedule = cfg.schedule.build();
    const int min_steps = *std::min_element(cfg.steps.begin(), cfg.steps.end());

    std::vector<CellJob> jobs;
    for (const auto& target : cfg.targets)
        for (const auto& sampler : cfg.samplers)
            for (int n : cfg.steps)
                for (std::uint64_t seed : cfg.seeds)
                    jobs.push_back({&target, &sampler, n, seed,
                                    n == min_steps && seed == cfg.seeds.front()});

    std::vector<CellOutput> outputs(jobs.size());
    parallel_for_jobs(jobs.size(), cfg.workers,
                      [&](std::size_t i) { outputs[i] = run_cell(cfg, jobs[i], schedule); });

    RunManifest manifest = make_manifest(cfg, "sweep");
    const fs::path out_dir(cfg.output_dir);
    fs::create_directories(out_dir / "points");

    for (std::size_t i = 0; i < jobs.size(); ++i) {
        manifest.cells.push_back(outputs[i].result);
        if (outputs[i].result.status != "ok") ++manifest.failures;
        if (jobs[i].keep_scatter && outputs[i].scatter.rows() > 0) {
            const std::string rel = "points/" + sanitize(jobs[i].target->name) + "__" +
                                    sanitize(jobs[i].sampler->id) + ".csv";
            write_file(out_dir / rel, points_csv(outputs[i].scatter));
            manifest.points[jobs[i].target->name].second[jobs[i].sampler->id] = rel;
        }
    }
    for (const auto& target : cfg.targets) {
        const Eigen::MatrixXd exact = target.dist.sample_exact(
            std::min<Eigen::Index>(kScatterRows, cfg.chains),
            derive_seed("exact-plot", fnv1a64(target.name)));
        const std::string rel = "points/" + sanitize(target.name) + "__exact.csv";
        write_file(out_dir / rel, points_csv(exact));
        manifest.points[target.name].first = rel;
    }

    write_file(out_dir / "results.csv", sweep_csv(manifest));
    write_file(out_dir / "manifest.json", manifest.to_json().dump(2) + "\n");
    return manifest;
}

RunManifest run_order_study(const ExperimentConfig& cfg) {
    const NoiseSchedule schedule = cfg.schedule.build();

    struct OrderJob {
        const TargetSpec* target;
        const SamplerSpec* sampler;
    };
    std::vector<OrderJob> jobs;
    for (const auto& target : cfg.targets)
        for (const auto& sampler : cfg.samplers) jobs.push_back({&target, &sampler});

    std::vector<OrderResult> results(jobs.size());
    parallel_for_jobs(jobs.size(), cfg.workers, [&](std::size_t ji) {
        const OrderJob& job = jobs[ji];
        OrderResult& r = results[ji];
        r.target = job.target->name;
        r.sampler = job.sampler->id;
        r.slope = kNaN;
        try {
            const std::string& id = job.sampler->id;
            if (id == "ddim" || id == "rk4-oracle")
                throw std::invalid_argument("order study not supported for sampler '" + id + "'");

            const TargetDistribution& target = job.target->dist;
            const Eigen::Index d = target.dim();
            const Eigen::MatrixXd z = Rng(derive_seed("order-x0", fnv1a64(job.target->name)))
                                          .normal_matrix(cfg.oracle.chains, d);

            ScoreOracle score = exact_score_oracle(target, schedule);
            std::unique_ptr<VelocityField> field;
            if (id == "flops" || id == "aflops") {
                TransformOptions opt;
                opt.alg1_verbatim = job.sampler->alg1_verbatim;
                field = std::make_unique<VelocityField>(
                    to_flow_velocity(score, TimeMap(schedule), std::move(opt)));
            } else {
                field = std::make_unique<VelocityField>(analytic_fm_field(target));
            }

            std::vector<Eigen::VectorXd> reference(static_cast<std::size_t>(cfg.oracle.chains));
            for (Eigen::Index i = 0; i < cfg.oracle.chains; ++i)
                reference[static_cast<std::size_t>(i)] =
                    rk4_oracle(*field, z.row(i).transpose(), cfg.oracle.fine_steps);

            for (int n : cfg.oracle.ladder) {
                const TimeGrid grid = TimeGrid::uniform(n);
                double acc = 0.0;
                for (Eigen::Index i = 0; i < cfg.oracle.chains; ++i) {
                    const Eigen::VectorXd x0 = z.row(i).transpose();
                    Eigen::VectorXd end;
                    if (id == "euler-fm" || id == "flops")
                        end = euler_fm(*field, grid, x0).endpoint();
                    else if (id == "heun-fm")
                        end = heun_fm(*field, grid, x0).endpoint();
                    else
                        end = a_euler(*field, grid, x0, job.sampler->adaptive).endpoint();
                    acc += (end - reference[static_cast<std::size_t>(i)]).squaredNorm();
                }
                r.rmse.emplace_back(n, std::sqrt(acc / static_cast<double>(cfg.oracle.chains)));
            }
            r.slope = order_estimate(r.rmse);
        } catch (const std::exception& e) {
            r.status = e.what();
        }
    });

    RunManifest manifest = make_manifest(cfg, "order-study");
    for (auto& r : results) {
        if (r.status != "ok") ++manifest.failures;
        manifest.orders.push_back(std::move(r));
    }

    const fs::path out_dir(cfg.output_dir);
    fs::create_directories(out_dir);
    write_file(out_dir / "order.csv", order_csv(manifest));
    write_file(out_dir / "manifest.json", manifest.to_json().dump(2) + "\n");
    return manifest;
}

std::string sweep_csv(const RunManifest& manifest) {
    std::string out = "target,sampler,N,nfe,seed,sliced_w2,energy,mean_err,cov_err,oracle_rmse,wall_ms\n";
    for (const auto& c : manifest.cells) {
        out += c.target + ',' + c.sampler + ',' + std::to_string(c.steps) + ',' +
               std::to_string(c.nfe) + ',' + std::to_string(c.seed) + ',' + fmt(c.sliced_w2) +
               ',' + fmt(c.energy) + ',' + fmt(c.mean_err) + ',' + fmt(c.cov_err) + ',' +
               fmt(c.oracle_rmse) + ',' + fmt(c.wall_ms) + '\n';
    }
    return out;
}

std::string order_csv(const RunManifest& manifest) {
    std::string out = "target,sampler,slope\n";
    for (const auto& o : manifest.orders)
        out += o.target + ',' + o.sampler + ',' + fmt(o.slope) + '\n';
    return out;
}

json RunManifest::to_json() const {
    json j;
    j["config_hash"] = config_hash;
    j["tool_version"] = tool_version;
    j["platform"] = platform;
    j["output_dir"] = output_dir;
    j["mode"] = mode;
    j["failures"] = failures;
    j["warnings"] = warnings;
    json cells_j = json::array();
    for (const auto& c : cells) {
        json cj;
        cj["target"] = c.target;
        cj["sampler"] = c.sampler;
        cj["N"] = c.steps;
        cj["nfe"] = c.nfe;
        cj["seed"] = c.seed;
        cj["status"] = c.status;
        cj["wall_ms"] = c.wall_ms;
        char hb[24];
        std::snprintf(hb, sizeof hb, "%016llx", static_cast<unsigned long long>(c.x0_hash));
        cj["x0_hash"] = hb;
        cj["metrics"] = {{"sliced_w2", c.sliced_w2},   {"energy", c.energy},
                         {"mean_err", c.mean_err},     {"cov_err", c.cov_err},
                         {"oracle_rmse", c.oracle_rmse}};
        cells_j.push_back(std::move(cj));
    }
    j["cells"] = std::move(cells_j);
    json orders_j = json::array();
    for (const auto& o : orders) {
        json oj;
        oj["target"] = o.target;
        oj["sampler"] = o.sampler;
        oj["slope"] = o.slope;
        oj["status"] = o.status;
        json rmse_j = json::array();
        for (const auto& [n, v] : o.rmse) rmse_j.push_back({n, v});
        oj["rmse"] = std::move(rmse_j);
        orders_j.push_back(std::move(oj));
    }
    j["orders"] = std::move(orders_j);
    json points_j;
    for (const auto& [tname, entry] : points) {
        points_j[tname] = {{"exact", entry.first}, {"samplers", entry.second}};
    }
    j["points"] = std::move(points_j);
    return j;
}

RunManifest RunManifest::from_json(const json& j) {
    RunManifest m;
    m.config_hash = j.value("config_hash", "");
    m.tool_version = j.value("tool_version", "");
    m.platform = j.value("platform", "");
    m.output_dir = j.value("output_dir", ".");
    m.mode = j.value("mode", "sweep");
    m.failures = j.value("failures", 0);
    if (j.contains("warnings"))
        for (const auto& w : j.at("warnings")) m.warnings.push_back(w.get<std::string>());
    if (j.contains("cells"))
        for (const auto& cj : j.at("cells")) {
            CellResult c;
            c.target = cj.value("target", "");
            c.sampler = cj.value("sampler", "");
            c.steps = cj.value("N", 0);
            c.nfe = cj.value("nfe", 0LL);
            c.seed = cj.value("seed", std::uint64_t{0});
            c.status = cj.value("status", "ok");
            c.wall_ms = cj.value("wall_ms", 0.0);
            if (cj.contains("x0_hash"))
                c.x0_hash = std::strtoull(cj.at("x0_hash").get<std::string>().c_str(), nullptr, 16);
            if (cj.contains("metrics")) {
                const auto& mt = cj.at("metrics");
                auto get = [&](const char* k) {
                    return mt.contains(k) && mt.at(k).is_number() ? mt.at(k).get<double>() : kNaN;
                };
                c.sliced_w2 = get("sliced_w2");
                c.energy = get("energy");
                c.mean_err = get("mean_err");
                c.cov_err = get("cov_err");
                c.oracle_rmse = get("oracle_rmse");
            }
            m.cells.push_back(std::move(c));
        }
    if (j.contains("orders"))
        for (const auto& oj : j.at("orders")) {
            OrderResult o;
            o.target = oj.value("target", "");
            o.sampler = oj.value("sampler", "");
            o.slope = oj.contains("slope") && oj.at("slope").is_number()
                          ? oj.at("slope").get<double>()
                          : kNaN;
            o.status = oj.value("status", "ok");
            if (oj.contains("rmse"))
                for (const auto& p : oj.at("rmse"))
                    o.rmse.emplace_back(p[0].get<int>(), p[1].get<double>());
            m.orders.push_back(std::move(o));
        }
    if (j.contains("points"))
        for (auto it = j.at("points").begin(); it != j.at("points").end(); ++it) {
            auto& entry = m.points[it.key()];
            entry.first = it.value().value("exact", "");
            if (it.value().contains("samplers"))
                for (auto s = it.value().at("samplers").begin();
                     s != it.value().at("samplers").end(); ++s)
                    entry.second[s.key()] = s.value().get<std::string>();
        }
    return m;
}

}  // namespace flowpath::bench
