#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "flowpath/schedule.hpp"
#include "flowpath/velocity.hpp"

namespace flowpath {

/// Integration nodes 0 = t_0 < t_1 < ... < t_N = 1.
struct TimeGrid {
    std::vector<double> nodes;

    static TimeGrid uniform(int steps);
    static TimeGrid custom(std::vector<double> nodes);

    int steps() const { return static_cast<int>(nodes.size()) - 1; }
    double dt(int n) const { return nodes[n + 1] - nodes[n]; }
};

/// Trajectory record of one chain.
struct SamplerRun {
    std::string sampler_id;
    std::uint64_t seed = 0;
    std::vector<Eigen::VectorXd> states;      // N+1 entries
    std::vector<Eigen::VectorXd> velocities;  // N entries (empty for ddim)
    std::vector<double> lambdas;              // adaptive samplers: N-1 entries
    long long nfe = 0;

    const Eigen::VectorXd& endpoint() const { return states.back(); }
};

enum class CoefficientMode { Taylor2, ExactIntegral, PaperEq12 };

struct AdaptiveConfig {
    double lambda_min = -1.0;
    double lambda_max = 1.0;
    CoefficientMode mode = CoefficientMode::Taylor2;
    double degenerate_dx_eps = 1e-12;  // threshold on |dx|^2
};

/// Standard normal initial draw, one private generator per call.
Eigen::VectorXd sample_init(Eigen::Index dim, std::uint64_t seed);

/// Forward Euler on a velocity field; nfe = N.
SamplerRun euler_fm(const VelocityField& field, const TimeGrid& grid, const Eigen::VectorXd& x0);

/// Heun predictor-corrector; nfe = 2N.
SamplerRun heun_fm(const VelocityField& field, const TimeGrid& grid, const Eigen::VectorXd& x0);

/// Euler on the diffusion-to-flow transformed field (frozen branch below
/// t_min included); nfe = N score queries.
SamplerRun flops(const ScoreOracle& score, const TimeMap& map, const TimeGrid& grid,
                 const Eigen::VectorXd& x0, TransformOptions options = {});

/// Least-squares drift coefficient <dv, dx>/|dx|^2, clamped to the configured
/// interval; 0 when |dx|^2 falls below the degeneracy threshold.
double estimate_lambda(const Eigen::VectorXd& dv, const Eigen::VectorXd& dx,
                       const AdaptiveConfig& cfg);

/// Exponential-step weights (a, b) for x_next = e^{l dt} x + a h + b dh/dt.
/// Taylor2 keeps terms to second order in dt; ExactIntegral evaluates the
/// underlying integrals in closed form; PaperEq12 reproduces the published
/// formulas verbatim. All modes share the analytic l -> 0 limit (dt, dt^2/2).
std::pair<double, double> ab_coefficients(double lambda, double dt, CoefficientMode mode);

/// One multistep update from (x_n, v_n) with memory (x_prev, v_prev) one dt
/// back: decompose v = lambda x + h, difference h backward, integrate the
/// linear part exactly. Returns the new state and the lambda used.
std::pair<Eigen::VectorXd, double> adaptive_step(const Eigen::VectorXd& x_n,
                                                 const Eigen::VectorXd& v_n,
                                                 const Eigen::VectorXd& x_prev,
                                                 const Eigen::VectorXd& v_prev, double dt,
                                                 const AdaptiveConfig& cfg);

/// Adaptive multistep on an arbitrary velocity field: Euler warm-up step,
/// then adaptive_step per node; nfe = N.
SamplerRun a_euler(const VelocityField& field, const TimeGrid& grid, const Eigen::VectorXd& x0,
                   const AdaptiveConfig& cfg);

/// a_euler applied to the transformed diffusion field; nfe = N score queries.
SamplerRun aflops(const ScoreOracle& score, const TimeMap& map, const TimeGrid& grid,
                  const Eigen::VectorXd& x0, const AdaptiveConfig& cfg,
                  TransformOptions options = {});

/// Deterministic DDIM on a uniform tau grid from T to 0, score
/// parameterization: x0_hat by Tweedie, eps_hat re-derived, state rebuilt at
/// the next noise level; nfe = N. Expects x_T ~ N(0, sigma_T^2 I).
SamplerRun ddim(const ScoreOracle& score, const NoiseSchedule& schedule, int steps,
                const Eigen::VectorXd& x_T);

/// Classic RK4 reference endpoint at t = 1 - 1e-6 with `fine_steps` uniform
/// steps; the ground truth for convergence-order measurements.
Eigen::VectorXd rk4_oracle(const VelocityField& field, const Eigen::VectorXd& x0,
                           long long fine_steps);

}  // namespace flowpath
