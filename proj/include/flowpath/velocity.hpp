#pragma once

#include <Eigen/Dense>
#include <atomic>
#include <functional>
#include <memory>
#include <vector>

#include "flowpath/schedule.hpp"
#include "flowpath/target.hpp"

namespace flowpath {

enum class Provenance { AnalyticFm, TransformedDiffusion };

/// Evaluable velocity v(x, t) with NFE accounting: every call increments a
/// shared atomic counter by exactly one. Copies share the counter, so chains
/// running against copies of one field aggregate into the same total.
class VelocityField {
public:
    using Evaluator = std::function<Eigen::VectorXd(const Eigen::VectorXd&, double)>;

    VelocityField(Evaluator fn, Provenance tag)
        : fn_(std::move(fn)), tag_(tag), count_(std::make_shared<std::atomic<long long>>(0)) {}

    Eigen::VectorXd operator()(const Eigen::VectorXd& x, double t) const {
        count_->fetch_add(1, std::memory_order_relaxed);
        return fn_(x, t);
    }

    long long evaluations() const { return count_->load(std::memory_order_relaxed); }
    void reset_evaluations() const { count_->store(0, std::memory_order_relaxed); }
    Provenance provenance() const { return tag_; }

private:
    Evaluator fn_;
    Provenance tag_;
    std::shared_ptr<std::atomic<long long>> count_;
};

/// Score oracle s(y, tau) ~ grad log p_tau(y), carrying its schedule so
/// transforms can check compatibility. Counted like VelocityField.
class ScoreOracle {
public:
    using Evaluator = std::function<Eigen::VectorXd(const Eigen::VectorXd&, double)>;

    ScoreOracle(Evaluator fn, NoiseSchedule schedule)
        : fn_(std::move(fn)),
          schedule_(std::move(schedule)),
          count_(std::make_shared<std::atomic<long long>>(0)) {}

    Eigen::VectorXd operator()(const Eigen::VectorXd& y, double tau) const {
        count_->fetch_add(1, std::memory_order_relaxed);
        return fn_(y, tau);
    }

    const NoiseSchedule& schedule() const { return schedule_; }
    long long evaluations() const { return count_->load(std::memory_order_relaxed); }
    void reset_evaluations() const { count_->store(0, std::memory_order_relaxed); }

private:
    Evaluator fn_;
    NoiseSchedule schedule_;
    std::shared_ptr<std::atomic<long long>> count_;
};

/// Exact mixture score of `target` under `schedule`'s marginals.
ScoreOracle exact_score_oracle(const TargetDistribution& target, const NoiseSchedule& schedule);

/// Noise-prediction adapter: score = -eps_hat / sigma.
ScoreOracle score_from_noise_predictor(ScoreOracle::Evaluator eps_hat, NoiseSchedule schedule);

/// Data-prediction adapter via Tweedie inversion: score = (abar x0_hat - y) / sigma^2.
ScoreOracle score_from_data_predictor(ScoreOracle::Evaluator x0_hat, NoiseSchedule schedule);

/// Analytic FM field of a target (one velocity evaluation per call).
VelocityField analytic_fm_field(const TargetDistribution& target);

struct TransformOptions {
    /// Reproduce the pseudocode's frozen branch literally (no 1/(1 - t_min)
    /// factor). Default follows the prose: the full formula at t_min.
    bool alg1_verbatim = false;
    /// Nonempty: invert the time map by nearest grid index over these tau
    /// values instead of continuous bisection.
    std::vector<double> discrete_tau_grid;
};

/// Diffusion-to-flow reparameterization: wraps a score oracle as an FM
/// velocity field,
///   v(x, t) = (sigma/abar) [x + sigma s((abar+sigma) x, tau)] / (1 - t),
/// with tau the inverse flow time of t. For t < t_min the velocity is frozen
/// at its t_min value. Exactly one score query per evaluation. Evaluations
/// are capped at t = 1 - 1e-6; t >= 1 throws std::domain_error.
VelocityField to_flow_velocity(const ScoreOracle& score, const TimeMap& map,
                               TransformOptions options = {});

/// The t < t_min extension by itself: the transform evaluated at (x, t_min).
Eigen::VectorXd frozen_velocity(const ScoreOracle& score, const TimeMap& map,
                                const Eigen::VectorXd& x, bool alg1_verbatim = false);

}  // namespace flowpath
