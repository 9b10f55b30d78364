#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "flowpath/rng.hpp"
#include "flowpath/velocity.hpp"

using namespace flowpath;
using Eigen::Vector2d;
using Eigen::VectorXd;

namespace {

const NoiseSchedule kSchedule = NoiseSchedule::vp_linear(0.1, 20.0, 1.0);

}  // namespace

TEST_CASE("transformed dirac field equals the analytic -x/(1-t)") {
    const auto dirac = TargetDistribution::dirac(Vector2d::Zero());
    const TimeMap map(kSchedule);
    const auto field = to_flow_velocity(exact_score_oracle(dirac, kSchedule), map);
    Rng rng(1);
    for (int i = 0; i < 30; ++i) {
        const double t = map.start_time() + (0.999 - map.start_time()) * rng.uniform();
        const VectorXd x = 2.0 * rng.normal_vector(2);
        CHECK((field(x, t) + x / (1.0 - t)).norm() <= 1e-9 * (1.0 + x.norm() / (1.0 - t)));
    }
}

TEST_CASE("transformed gaussian field matches the closed-form FM velocity to 1e-10") {
    const auto gauss =
        TargetDistribution::gaussian(Vector2d::Zero(), Eigen::Matrix2d::Identity());
    const TimeMap map(kSchedule);
    const auto field = to_flow_velocity(exact_score_oracle(gauss, kSchedule), map);
    Rng rng(2);
    for (int i = 0; i < 30; ++i) {
        const double t = map.start_time() + 1e-3 + (0.998 - map.start_time()) * rng.uniform();
        const VectorXd x = 2.0 * rng.normal_vector(2);
        const VectorXd expect = x * (2.0 * t - 1.0) / (t * t + (1.0 - t) * (1.0 - t));
        CHECK((field(x, t) - expect).norm() <= 1e-10 * (1.0 + expect.norm()));
    }
}

TEST_CASE("transformed mixture field equals the analytic FM velocity (worked identity)") {
    std::vector<MixtureComponent> comps;
    comps.push_back({0.4, Vector2d(1.5, 0.0), 0.3 * Eigen::Matrix2d::Identity()});
    comps.push_back({0.35, Vector2d(-1.0, 1.2), 0.2 * Eigen::Matrix2d::Identity()});
    comps.push_back({0.25, Vector2d(-0.5, -1.5), 0.4 * Eigen::Matrix2d::Identity()});
    const auto mix = TargetDistribution::mixture(std::move(comps));

    const TimeMap map(kSchedule);
    const auto field = to_flow_velocity(exact_score_oracle(mix, kSchedule), map);
    Rng rng(3);
    double worst = 0.0;
    for (int i = 0; i < 40; ++i) {
        const double t = map.start_time() + 1e-3 +
                         (0.999 - map.start_time() - 1e-3) * rng.uniform();
        const VectorXd x = 1.5 * rng.normal_vector(2);
        const VectorXd v_fm = mix.fm_velocity(x, t);
        const double rel = (field(x, t) - v_fm).norm() / (1.0 + v_fm.norm());
        worst = std::max(worst, rel);
    }
    CHECK(worst <= 1e-6);
}

TEST_CASE("each transformed evaluation costs exactly one score query") {
    const auto gauss =
        TargetDistribution::gaussian(Vector2d::Zero(), Eigen::Matrix2d::Identity());
    const auto score = exact_score_oracle(gauss, kSchedule);
    const TimeMap map(kSchedule);
    const auto field = to_flow_velocity(score, map);
    CHECK(field.evaluations() == 0);
    const VectorXd x = Vector2d(0.5, -0.5);
    (void)field(x, 0.5);
    (void)field(x, 0.5);
    (void)field(x, map.start_time() / 2.0);  // frozen branch queries the score too
    CHECK(field.evaluations() == 3);
    CHECK(score.evaluations() == 3);
    field.reset_evaluations();
    CHECK(field.evaluations() == 0);
}

TEST_CASE("evaluator is deterministic and rejects t >= 1") {
    const auto gauss =
        TargetDistribution::gaussian(Vector2d::Zero(), Eigen::Matrix2d::Identity());
    const auto field = to_flow_velocity(exact_score_oracle(gauss, kSchedule), TimeMap(kSchedule));
    const VectorXd x = Vector2d(1.0, 2.0);
    CHECK((field(x, 0.4) - field(x, 0.4)).cwiseAbs().maxCoeff() == 0.0);
    CHECK_THROWS_AS(field(x, 1.0), std::domain_error);
}

TEST_CASE("frozen branch: dirac value, constancy below t_min, verbatim variant") {
    const auto dirac = TargetDistribution::dirac(Vector2d::Zero());
    const auto score = exact_score_oracle(dirac, kSchedule);
    const TimeMap map(kSchedule);
    const double t_min = map.start_time();
    const auto field = to_flow_velocity(score, map);
    const VectorXd x = Vector2d(0.8, -0.6);

    const VectorXd frozen_half = field(x, t_min / 2.0);
    CHECK((frozen_half + x / (1.0 - t_min)).norm() <= 1e-12);

    // constant in t over [0, t_min) for fixed x
    CHECK((field(x, 0.0) - frozen_half).cwiseAbs().maxCoeff() == 0.0);
    CHECK((field(x, 0.9 * t_min) - frozen_half).cwiseAbs().maxCoeff() == 0.0);

    // helper form agrees with the in-field branch
    CHECK((frozen_velocity(score, map, x) - frozen_half).cwiseAbs().maxCoeff() == 0.0);

    // pseudocode-verbatim variant omits the 1/(1 - t_min) factor
    TransformOptions verbatim;
    verbatim.alg1_verbatim = true;
    const auto field_v = to_flow_velocity(score, map, verbatim);
    CHECK((field_v(x, t_min / 2.0) - (1.0 - t_min) * frozen_half).norm() <= 1e-14);
}

TEST_CASE("t_min = 0 override: the frozen branch is never taken") {
    const auto gauss =
        TargetDistribution::gaussian(Vector2d::Zero(), Eigen::Matrix2d::Identity());
    const auto score = exact_score_oracle(gauss, kSchedule);
    const TimeMap map(kSchedule, 0.0);
    const auto field = to_flow_velocity(score, map);
    const VectorXd x = Vector2d(0.5, 0.5);

    // at t = 0 the main branch runs with tau = T: full formula, no frozen value
    const auto [abar_T, sigma_T] = kSchedule.marginal_coeffs(1.0);
    const VectorXd expect =
        sigma_T / abar_T *
        (x + sigma_T * gauss.diffusion_score((abar_T + sigma_T) * x, abar_T, sigma_T));
    CHECK((field(x, 0.0) - expect).norm() <= 1e-9 * (1.0 + expect.norm()));
}

TEST_CASE("noise- and data-prediction adapters recover the score") {
    const auto mix = TargetDistribution::mixture(
        {{0.6, Vector2d(1.0, 0.5), 0.3 * Eigen::Matrix2d::Identity()},
         {0.4, Vector2d(-1.0, -0.5), 0.5 * Eigen::Matrix2d::Identity()}});
    const auto score = exact_score_oracle(mix, kSchedule);

    // eps_hat = -sigma * score,  x0_hat = (y + sigma^2 score)/abar
    const auto eps = [&](const VectorXd& y, double tau) {
        auto [abar, sigma] = kSchedule.marginal_coeffs(tau);
        return VectorXd(-sigma * mix.diffusion_score(y, abar, sigma));
    };
    const auto x0 = [&](const VectorXd& y, double tau) {
        auto [abar, sigma] = kSchedule.marginal_coeffs(tau);
        return mix.posterior_mean(y, abar, sigma);
    };
    const auto from_eps = score_from_noise_predictor(eps, kSchedule);
    const auto from_x0 = score_from_data_predictor(x0, kSchedule);

    Rng rng(4);
    for (int i = 0; i < 20; ++i) {
        const double tau = 0.05 + 0.95 * rng.uniform();
        const VectorXd y = 2.0 * rng.normal_vector(2);
        const VectorXd s = score(y, tau);
        CHECK((from_eps(y, tau) - s).norm() <= 1e-12 * (1.0 + s.norm()));
        CHECK((from_x0(y, tau) - s).norm() <= 1e-9 * (1.0 + s.norm()));
    }
}

TEST_CASE("transform depends on the schedule only through its marginals") {
    // same marginals, different representation: closed form vs quadrature
    const auto quad = NoiseSchedule::generic_quadrature(
        [](double tau) { return 0.5 * (0.1 + 19.9 * tau); },
        [](double tau) { return 0.1 + 19.9 * tau; }, 1.0, 4096);
    const auto mix = TargetDistribution::mixture(
        {{0.5, Vector2d(1.0, 0.0), 0.25 * Eigen::Matrix2d::Identity()},
         {0.5, Vector2d(-1.0, 0.0), 0.25 * Eigen::Matrix2d::Identity()}});

    const auto f_closed = to_flow_velocity(exact_score_oracle(mix, kSchedule), TimeMap(kSchedule));
    const auto f_quad = to_flow_velocity(exact_score_oracle(mix, quad), TimeMap(quad));
    Rng rng(6);
    for (int i = 0; i < 10; ++i) {
        const double t = 0.05 + 0.9 * rng.uniform();
        const VectorXd x = rng.normal_vector(2);
        CHECK((f_closed(x, t) - f_quad(x, t)).norm() <= 1e-7);
    }
}

TEST_CASE("discrete tau-grid inversion matches a brute-force argmin") {
    const auto gauss =
        TargetDistribution::gaussian(Vector2d::Zero(), Eigen::Matrix2d::Identity());
    const TimeMap map(kSchedule);
    std::vector<double> grid;
    for (int i = 0; i <= 40; ++i) grid.push_back(0.02 + i * 0.96 / 40.0);

    TransformOptions opt;
    opt.discrete_tau_grid = grid;
    const auto field = to_flow_velocity(exact_score_oracle(gauss, kSchedule), map, opt);

    Rng rng(8);
    for (int i = 0; i < 10; ++i) {
        const double t = map.start_time() + (0.99 - map.start_time()) * rng.uniform();
        // independent argmin over the grid
        double best_err = 1e300, tau_best = grid[0];
        for (double tau : grid) {
            const double err = std::abs(t - map.flow_time(tau));
            if (err < best_err || (err == best_err && tau > tau_best)) {
                best_err = err;
                tau_best = tau;
            }
        }
        const auto [abar, sigma] = kSchedule.marginal_coeffs(tau_best);
        const VectorXd x = rng.normal_vector(2);
        const VectorXd expect =
            sigma / abar *
            (x + sigma * gauss.diffusion_score((abar + sigma) * x, abar, sigma)) / (1.0 - t);
        CHECK((field(x, t) - expect).norm() <= 1e-12 * (1.0 + expect.norm()));
    }
}
