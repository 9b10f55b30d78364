#include "flowpath/velocity.hpp"

#include <cmath>
#include <mutex>
#include <stdexcept>
#include <unordered_map>

namespace flowpath {

namespace {

constexpr double kTimeCap = 1.0 - 1e-6;

struct TimePoint {
    double tau, abar, sigma;
};

/// Shared state of a transformed field. The tau-inversion memo keys on the
/// exact double t, which pays off because sampler grids and repeated chains
/// revisit identical node times.
struct FlowTransform {
    ScoreOracle score;
    TimeMap map;
    TransformOptions options;
    TimePoint terminal;  // tau = T
    mutable std::unordered_map<double, TimePoint> memo;
    mutable std::mutex memo_mutex;

    FlowTransform(ScoreOracle s, TimeMap m, TransformOptions o)
        : score(std::move(s)), map(std::move(m)), options(std::move(o)) {
        const double T = map.schedule().horizon();
        auto [a, sg] = map.schedule().marginal_coeffs(T);
        terminal = {T, a, sg};
    }

    TimePoint at(double t) const {
        {
            std::lock_guard<std::mutex> lock(memo_mutex);
            auto it = memo.find(t);
            if (it != memo.end()) return it->second;
        }
        double tau;
        if (options.discrete_tau_grid.empty()) {
            tau = map.diffusion_time(t);
        } else {
            tau = options.discrete_tau_grid[map.nearest_tau_index(t, options.discrete_tau_grid)];
        }
        auto [a, sg] = map.schedule().marginal_coeffs(tau);
        TimePoint tp{tau, a, sg};
        std::lock_guard<std::mutex> lock(memo_mutex);
        memo.emplace(t, tp);
        return tp;
    }

    Eigen::VectorXd frozen(const Eigen::VectorXd& x) const {
        const auto& tp = terminal;
        Eigen::VectorXd v = tp.sigma / tp.abar *
                            (x + tp.sigma * score((tp.abar + tp.sigma) * x, tp.tau));
        if (!options.alg1_verbatim) v /= 1.0 - map.start_time();
        return v;
    }

    Eigen::VectorXd eval(const Eigen::VectorXd& x, double t) const {
        if (t >= 1.0) throw std::domain_error("flow velocity undefined at t >= 1");
        const double tc = std::min(t, kTimeCap);
        if (tc < map.start_time()) return frozen(x);
        const TimePoint tp = at(tc);
        const Eigen::VectorXd s = score((tp.abar + tp.sigma) * x, tp.tau);
        return tp.sigma / tp.abar * (x + tp.sigma * s) / (1.0 - tc);
    }
};

void check_same_schedule(const NoiseSchedule& a, const NoiseSchedule& b) {
    if (a.horizon() != b.horizon())
        throw std::invalid_argument("score oracle and time map use different schedules");
    for (double f : {0.25, 0.5, 1.0}) {
        const double tau = f * a.horizon();
        auto [aa, as] = a.marginal_coeffs(tau);
        auto [ba, bs] = b.marginal_coeffs(tau);
        if (std::abs(aa - ba) > 1e-9 || std::abs(as - bs) > 1e-9)
            throw std::invalid_argument("score oracle and time map use different schedules");
    }
}

}  // namespace

ScoreOracle exact_score_oracle(const TargetDistribution& target, const NoiseSchedule& schedule) {
    // target copied into the closure: oracles own what they evaluate
    auto fn = [target, schedule](const Eigen::VectorXd& y, double tau) {
        auto [abar, sigma] = schedule.marginal_coeffs(tau);
        return target.diffusion_score(y, abar, sigma);
    };
    return {std::move(fn), schedule};
}

ScoreOracle score_from_noise_predictor(ScoreOracle::Evaluator eps_hat, NoiseSchedule schedule) {
    auto fn = [eps = std::move(eps_hat), schedule](const Eigen::VectorXd& y, double tau) {
        const double sigma = schedule.marginal_coeffs(tau).second;
        return Eigen::VectorXd(-eps(y, tau) / sigma);
    };
    return {std::move(fn), std::move(schedule)};
}

ScoreOracle score_from_data_predictor(ScoreOracle::Evaluator x0_hat, NoiseSchedule schedule) {
    auto fn = [x0 = std::move(x0_hat), schedule](const Eigen::VectorXd& y, double tau) {
        auto [abar, sigma] = schedule.marginal_coeffs(tau);
        return Eigen::VectorXd((abar * x0(y, tau) - y) / (sigma * sigma));
    };
    return {std::move(fn), std::move(schedule)};
}

VelocityField analytic_fm_field(const TargetDistribution& target) {
    return {[target](const Eigen::VectorXd& x, double t) { return target.fm_velocity(x, t); },
            Provenance::AnalyticFm};
}

VelocityField to_flow_velocity(const ScoreOracle& score, const TimeMap& map,
                               TransformOptions options) {
    check_same_schedule(score.schedule(), map.schedule());
    auto state = std::make_shared<FlowTransform>(score, map, std::move(options));
    return {[state](const Eigen::VectorXd& x, double t) { return state->eval(x, t); },
            Provenance::TransformedDiffusion};
}

Eigen::VectorXd frozen_velocity(const ScoreOracle& score, const TimeMap& map,
                                const Eigen::VectorXd& x, bool alg1_verbatim) {
    TransformOptions opt;
    opt.alg1_verbatim = alg1_verbatim;
    FlowTransform state(score, map, opt);
    return state.frozen(x);
}

}  // namespace flowpath
