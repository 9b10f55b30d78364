#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace flowpath {

struct MixtureComponent {
    double weight = 1.0;
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
};

/// Mixture-of-Gaussians data law with closed-form diffusion score,
/// posterior mean (Tweedie), and flow-matching velocity. A Dirac target is a
/// single zero-covariance component; density-based queries then require a
/// strictly positive perturbation. Immutable after construction; all
/// evaluations are pure and thread-safe.
class TargetDistribution {
public:
    enum class Kind { Dirac, Gaussian, Mixture };

    static TargetDistribution dirac(Eigen::VectorXd mean);
    static TargetDistribution gaussian(Eigen::VectorXd mean, Eigen::MatrixXd cov);
    static TargetDistribution mixture(std::vector<MixtureComponent> components);

    Kind kind() const { return kind_; }
    Eigen::Index dim() const { return dim_; }
    bool is_dirac() const { return kind_ == Kind::Dirac; }
    const std::vector<MixtureComponent>& components() const { return comps_; }

    /// i.i.d. draws, one row per sample; categorical-then-Gaussian, fully
    /// determined by the seed (private generator per call).
    Eigen::MatrixXd sample_exact(Eigen::Index n, std::uint64_t seed) const;

    /// grad_y log p_tau(y) for the noisy marginal N(abar mu_k, abar^2 Sigma_k + sigma^2 I).
    Eigen::VectorXd diffusion_score(const Eigen::VectorXd& y, double abar, double sigma) const;

    /// E[x_0 | x_tau = y] under the same marginal.
    Eigen::VectorXd posterior_mean(const Eigen::VectorXd& y, double abar, double sigma) const;

    /// Optimal FM velocity (E[x_1 | x_t = x] - x)/(1 - t) for the linear
    /// interpolation path x_t = (1-t) x_0 + t x_1, x_0 ~ N(0, I).
    Eigen::VectorXd fm_velocity(const Eigen::VectorXd& x, double t) const;

    /// Closed-form mixture moments.
    Eigen::VectorXd mean() const;
    Eigen::MatrixXd covariance() const;

private:
    TargetDistribution() = default;
    void finalize();

    Kind kind_ = Kind::Gaussian;
    Eigen::Index dim_ = 0;
    std::vector<MixtureComponent> comps_;
    std::vector<Eigen::MatrixXd> chol_;  // lower factors of data covariances (zero for dirac)

    friend class NoisyMarginal;
};

/// A target pushed through a perturbation: either the diffusion marginal
/// p_tau at (abar, sigma) or the FM interpolation marginal q_t.
class NoisyMarginal {
public:
    static NoisyMarginal diffusion(const TargetDistribution& target, double abar, double sigma);
    static NoisyMarginal fm_interp(const TargetDistribution& target, double t);

    /// log of the mixture density via log-sum-exp; throws std::domain_error
    /// if any component covariance is degenerate.
    double log_density(const Eigen::VectorXd& y) const;

private:
    NoisyMarginal(const TargetDistribution& target, double scale, double noise_sd);
    const TargetDistribution* target_;
    double scale_;     // abar or t
    double noise_sd_;  // sigma or 1 - t
};

}  // namespace flowpath
