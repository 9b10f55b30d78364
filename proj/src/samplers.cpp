#include "flowpath/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "flowpath/rng.hpp"

namespace flowpath {

namespace {

constexpr double kTimeCap = 1.0 - 1e-6;

void ensure_finite(const Eigen::VectorXd& x, const std::string& id, int step, double t) {
    if (x.allFinite()) return;
    std::ostringstream msg;
    msg << id << ": non-finite state at step " << step << ", t = " << t
        << ", |x| = " << x.norm();
    throw std::runtime_error(msg.str());
}

SamplerRun run_euler(const VelocityField& field, const TimeGrid& grid, const Eigen::VectorXd& x0,
                     std::string id) {
    const long long nfe0 = field.evaluations();
    SamplerRun run;
    run.sampler_id = std::move(id);
    run.states.reserve(grid.nodes.size());
    run.velocities.reserve(grid.nodes.size() - 1);
    Eigen::VectorXd x = x0;
    run.states.push_back(x);
    for (int n = 0; n < grid.steps(); ++n) {
        const Eigen::VectorXd v = field(x, grid.nodes[n]);
        x += grid.dt(n) * v;
        ensure_finite(x, run.sampler_id, n, grid.nodes[n]);
        run.velocities.push_back(v);
        run.states.push_back(x);
    }
    run.nfe = field.evaluations() - nfe0;
    return run;
}

/// Grid-aware variant: the backward difference uses the previous interval,
/// the exponential weights use the upcoming one. Collapses to the published
/// uniform-dt rule on uniform grids.
std::pair<Eigen::VectorXd, double> adaptive_step_impl(
    const Eigen::VectorXd& x_n, const Eigen::VectorXd& v_n, const Eigen::VectorXd& x_prev,
    const Eigen::VectorXd& v_prev, double dt_prev, double dt_next, const AdaptiveConfig& cfg) {
    const double lambda = estimate_lambda(v_n - v_prev, x_n - x_prev, cfg);
    const Eigen::VectorXd h_n = v_n - lambda * x_n;
    const Eigen::VectorXd h_prev = v_prev - lambda * x_prev;
    const Eigen::VectorXd dh = (h_n - h_prev) / dt_prev;
    const auto [a, b] = ab_coefficients(lambda, dt_next, cfg.mode);
    Eigen::VectorXd x_next = std::exp(lambda * dt_next) * x_n + a * h_n + b * dh;
    return {std::move(x_next), lambda};
}

SamplerRun run_adaptive(const VelocityField& field, const TimeGrid& grid,
                        const Eigen::VectorXd& x0, const AdaptiveConfig& cfg, std::string id) {
    if (grid.steps() < 2)
        throw std::invalid_argument(id + ": adaptive sampling needs at least 2 steps");
    const long long nfe0 = field.evaluations();
    SamplerRun run;
    run.sampler_id = std::move(id);
    run.states.reserve(grid.nodes.size());
    run.velocities.reserve(grid.nodes.size() - 1);
    run.lambdas.reserve(grid.nodes.size() - 2);

    Eigen::VectorXd x = x0;
    run.states.push_back(x);

    // Euler warm-up provides the multistep memory.
    Eigen::VectorXd v = field(x, grid.nodes[0]);
    run.velocities.push_back(v);
    Eigen::VectorXd x_prev = x;
    Eigen::VectorXd v_prev = v;
    x += grid.dt(0) * v;
    ensure_finite(x, run.sampler_id, 0, grid.nodes[0]);
    run.states.push_back(x);

    for (int n = 1; n < grid.steps(); ++n) {
        v = field(x, grid.nodes[n]);
        run.velocities.push_back(v);
        auto [x_next, lambda] =
            adaptive_step_impl(x, v, x_prev, v_prev, grid.dt(n - 1), grid.dt(n), cfg);
        ensure_finite(x_next, run.sampler_id, n, grid.nodes[n]);
        run.lambdas.push_back(lambda);
        x_prev = x;
        v_prev = v;
        x = std::move(x_next);
        run.states.push_back(x);
    }
    run.nfe = field.evaluations() - nfe0;
    return run;
}

}  // namespace

TimeGrid TimeGrid::uniform(int steps) {
    if (steps < 1) throw std::invalid_argument("time grid needs at least 1 step");
    TimeGrid g;
    g.nodes.resize(static_cast<std::size_t>(steps) + 1);
    for (int n = 0; n <= steps; ++n) g.nodes[static_cast<std::size_t>(n)] = double(n) / steps;
    g.nodes.back() = 1.0;
    return g;
}

TimeGrid TimeGrid::custom(std::vector<double> nodes) {
    if (nodes.size() < 2 || nodes.front() != 0.0 || nodes.back() != 1.0)
        throw std::invalid_argument("custom grid must run from 0 to 1");
    for (std::size_t i = 1; i < nodes.size(); ++i)
        if (!(nodes[i] > nodes[i - 1]))
            throw std::invalid_argument("custom grid must be strictly increasing");
    TimeGrid g;
    g.nodes = std::move(nodes);
    return g;
}

Eigen::VectorXd sample_init(Eigen::Index dim, std::uint64_t seed) {
    return Rng(seed).normal_vector(dim);
}

SamplerRun euler_fm(const VelocityField& field, const TimeGrid& grid, const Eigen::VectorXd& x0) {
    return run_euler(field, grid, x0, "euler-fm");
}

SamplerRun heun_fm(const VelocityField& field, const TimeGrid& grid, const Eigen::VectorXd& x0) {
    const long long nfe0 = field.evaluations();
    SamplerRun run;
    run.sampler_id = "heun-fm";
    run.states.reserve(grid.nodes.size());
    run.velocities.reserve(grid.nodes.size() - 1);
    Eigen::VectorXd x = x0;
    run.states.push_back(x);
    for (int n = 0; n < grid.steps(); ++n) {
        const double dt = grid.dt(n);
        const Eigen::VectorXd k1 = field(x, grid.nodes[n]);
        const Eigen::VectorXd x_pred = x + dt * k1;
        const double t_next = std::min(grid.nodes[n + 1], kTimeCap);
        const Eigen::VectorXd k2 = field(x_pred, t_next);
        x += 0.5 * dt * (k1 + k2);
        ensure_finite(x, run.sampler_id, n, grid.nodes[n]);
        run.velocities.push_back(k1);
        run.states.push_back(x);
    }
    run.nfe = field.evaluations() - nfe0;
    return run;
}

SamplerRun flops(const ScoreOracle& score, const TimeMap& map, const TimeGrid& grid,
                 const Eigen::VectorXd& x0, TransformOptions options) {
    const VelocityField field = to_flow_velocity(score, map, std::move(options));
    return run_euler(field, grid, x0, "flops");
}

double estimate_lambda(const Eigen::VectorXd& dv, const Eigen::VectorXd& dx,
                       const AdaptiveConfig& cfg) {
    if (dv.size() != dx.size()) throw std::invalid_argument("dv/dx dimension mismatch");
    if (!(cfg.lambda_min <= cfg.lambda_max))
        throw std::invalid_argument("empty lambda clamp interval");
    const double dx2 = dx.squaredNorm();
    if (dx2 < cfg.degenerate_dx_eps) return 0.0;  // residual absorbs the whole velocity
    return std::clamp(dv.dot(dx) / dx2, cfg.lambda_min, cfg.lambda_max);
}

std::pair<double, double> ab_coefficients(double lambda, double dt, CoefficientMode mode) {
    if (!(dt > 0.0)) throw std::invalid_argument("ab_coefficients needs dt > 0");
    const double z = lambda * dt;
    if (std::abs(z) < 1e-8) return {dt, 0.5 * dt * dt};

    switch (mode) {
        case CoefficientMode::Taylor2:
            return {dt + 0.5 * lambda * dt * dt, 0.5 * dt * dt};
        case CoefficientMode::ExactIntegral: {
            // a = int_0^dt e^{l (dt-u)} du, b = int_0^dt e^{l (dt-u)} u du
            const double a = std::expm1(z) / lambda;
            double b;
            if (std::abs(z) < 1e-3) {
                b = dt * dt * (0.5 + z * (1.0 / 6.0 + z * (1.0 / 24.0 + z / 120.0)));
            } else {
                b = (std::expm1(z) - z) / (lambda * lambda);
            }
            return {a, b};
        }
        case CoefficientMode::PaperEq12: {
            const double a = -std::expm1(-z) / lambda;
            double b;
            if (std::abs(z) < 1e-3) {
                b = dt * dt * (0.5 + z * (-1.0 / 3.0 + z * (1.0 / 8.0 - z / 30.0)));
            } else {
                b = (1.0 - (1.0 + z) * std::exp(-z)) / (lambda * lambda);
            }
            return {a, b};
        }
    }
    throw std::logic_error("unreachable coefficient mode");
}

std::pair<Eigen::VectorXd, double> adaptive_step(const Eigen::VectorXd& x_n,
                                                 const Eigen::VectorXd& v_n,
                                                 const Eigen::VectorXd& x_prev,
                                                 const Eigen::VectorXd& v_prev, double dt,
                                                 const AdaptiveConfig& cfg) {
    return adaptive_step_impl(x_n, v_n, x_prev, v_prev, dt, dt, cfg);
}

SamplerRun a_euler(const VelocityField& field, const TimeGrid& grid, const Eigen::VectorXd& x0,
                   const AdaptiveConfig& cfg) {
    return run_adaptive(field, grid, x0, cfg, "a-euler");
}

SamplerRun aflops(const ScoreOracle& score, const TimeMap& map, const TimeGrid& grid,
                  const Eigen::VectorXd& x0, const AdaptiveConfig& cfg,
                  TransformOptions options) {
    const VelocityField field = to_flow_velocity(score, map, std::move(options));
    return run_adaptive(field, grid, x0, cfg, "aflops");
}

SamplerRun ddim(const ScoreOracle& score, const NoiseSchedule& schedule, int steps,
                const Eigen::VectorXd& x_T) {
    if (steps < 1) throw std::invalid_argument("ddim needs at least 1 step");
    const long long nfe0 = score.evaluations();
    const double T = schedule.horizon();

    SamplerRun run;
    run.sampler_id = "ddim";
    run.states.reserve(static_cast<std::size_t>(steps) + 1);
    Eigen::VectorXd x = x_T;
    run.states.push_back(x);
    for (int i = 0; i < steps; ++i) {
        const double tau = T * double(steps - i) / steps;
        const double tau_next = T * double(steps - i - 1) / steps;
        const auto [abar, sigma] = schedule.marginal_coeffs(tau);
        const auto [abar_next, sigma_next] = schedule.marginal_coeffs(tau_next);
        const Eigen::VectorXd s = score(x, tau);
        const Eigen::VectorXd x0_hat = (x + sigma * sigma * s) / abar;
        const Eigen::VectorXd eps_hat = (x - abar * x0_hat) / sigma;
        x = abar_next * x0_hat + sigma_next * eps_hat;
        ensure_finite(x, run.sampler_id, i, tau_next);
        run.states.push_back(x);
    }
    run.nfe = score.evaluations() - nfe0;
    return run;
}

Eigen::VectorXd rk4_oracle(const VelocityField& field, const Eigen::VectorXd& x0,
                           long long fine_steps) {
    if (fine_steps < 10000)
        throw std::invalid_argument("rk4_oracle needs fine_steps >= 10000");
    const double t_end = kTimeCap;
    const double h = t_end / double(fine_steps);
    Eigen::VectorXd x = x0;
    for (long long i = 0; i < fine_steps; ++i) {
        const double t = double(i) * h;
        const Eigen::VectorXd k1 = field(x, t);
        const Eigen::VectorXd k2 = field(x + 0.5 * h * k1, t + 0.5 * h);
        const Eigen::VectorXd k3 = field(x + 0.5 * h * k2, t + 0.5 * h);
        const Eigen::VectorXd k4 = field(x + h * k3, std::min(t + h, t_end));
        x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!x.allFinite()) {
            std::ostringstream msg;
            msg << "rk4-oracle: non-finite state at step " << i << ", t = " << t;
            throw std::runtime_error(msg.str());
        }
    }
    return x;
}

}  // namespace flowpath
