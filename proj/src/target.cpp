#include "flowpath/target.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "flowpath/rng.hpp"

namespace flowpath {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

struct NoisyQuery {
    double log_density;
    Eigen::VectorXd score;      // grad_y log density
    Eigen::VectorXd posterior;  // E[data | observation]
};

/// Shared closed-form machinery for the observation model y = c x + s eps:
/// per-component moments under N(c mu_k, c^2 Sigma_k + s^2 I), combined with
/// log-sum-exp responsibilities.
NoisyQuery evaluate_noisy(const std::vector<MixtureComponent>& comps, const Eigen::VectorXd& y,
                          double c, double s) {
    const Eigen::Index d = y.size();
    const auto K = comps.size();

    Eigen::VectorXd logp(static_cast<Eigen::Index>(K));
    std::vector<Eigen::VectorXd> comp_score(K);
    std::vector<Eigen::VectorXd> comp_post(K);

    for (std::size_t k = 0; k < K; ++k) {
        const auto& comp = comps[k];
        Eigen::MatrixXd C = c * c * comp.cov;
        C.diagonal().array() += s * s;
        Eigen::LLT<Eigen::MatrixXd> llt(C);
        if (llt.info() != Eigen::Success || !(C.diagonal().minCoeff() > 0.0))
            throw std::domain_error("degenerate component covariance in noisy marginal");

        const Eigen::VectorXd r = y - c * comp.mean;
        const Eigen::VectorXd w = llt.matrixL().solve(r);
        const double log_det_l = Eigen::MatrixXd(llt.matrixL()).diagonal().array().log().sum();
        logp(static_cast<Eigen::Index>(k)) =
            std::log(comp.weight) - 0.5 * d * kLog2Pi - log_det_l - 0.5 * w.squaredNorm();

        comp_score[k] = -llt.matrixU().solve(w);                 // -C^{-1} (y - c mu)
        comp_post[k] = comp.mean - c * (comp.cov * comp_score[k]);  // mu + c Sigma C^{-1} (y - c mu)
    }

    const double m = logp.maxCoeff();
    const double lse = m + std::log((logp.array() - m).exp().sum());

    NoisyQuery out;
    out.log_density = lse;
    out.score = Eigen::VectorXd::Zero(d);
    out.posterior = Eigen::VectorXd::Zero(d);
    for (std::size_t k = 0; k < K; ++k) {
        const double resp = std::exp(logp(static_cast<Eigen::Index>(k)) - lse);
        out.score += resp * comp_score[k];
        out.posterior += resp * comp_post[k];
    }
    return out;
}

void check_sigma(double sigma) {
    if (!(sigma > 0.0))
        throw std::domain_error("sigma must be positive (no density at sigma = 0)");
}

}  // namespace

TargetDistribution TargetDistribution::dirac(Eigen::VectorXd mean) {
    TargetDistribution t;
    t.kind_ = Kind::Dirac;
    t.dim_ = mean.size();
    t.comps_.push_back({1.0, std::move(mean),
                        Eigen::MatrixXd::Zero(t.dim_, t.dim_)});
    t.chol_.push_back(Eigen::MatrixXd::Zero(t.dim_, t.dim_));
    return t;
}

TargetDistribution TargetDistribution::gaussian(Eigen::VectorXd mean, Eigen::MatrixXd cov) {
    TargetDistribution t;
    t.kind_ = Kind::Gaussian;
    t.dim_ = mean.size();
    t.comps_.push_back({1.0, std::move(mean), std::move(cov)});
    t.finalize();
    return t;
}

TargetDistribution TargetDistribution::mixture(std::vector<MixtureComponent> components) {
    if (components.empty()) throw std::invalid_argument("mixture needs at least one component");
    TargetDistribution t;
    t.kind_ = Kind::Mixture;
    t.dim_ = components.front().mean.size();
    t.comps_ = std::move(components);
    t.finalize();
    return t;
}

void TargetDistribution::finalize() {
    double wsum = 0.0;
    for (std::size_t k = 0; k < comps_.size(); ++k) {
        const auto& comp = comps_[k];
        if (!(comp.weight > 0.0))
            throw std::invalid_argument("component " + std::to_string(k) + ": weight must be > 0");
        if (comp.mean.size() != dim_ || comp.cov.rows() != dim_ || comp.cov.cols() != dim_)
            throw std::invalid_argument("component " + std::to_string(k) + ": dimension mismatch");
        if ((comp.cov - comp.cov.transpose()).cwiseAbs().maxCoeff() >
            1e-12 * (1.0 + comp.cov.cwiseAbs().maxCoeff()))
            throw std::invalid_argument("component " + std::to_string(k) +
                                        ": covariance not symmetric");
        Eigen::LLT<Eigen::MatrixXd> llt(comp.cov);
        if (llt.info() != Eigen::Success || !(comp.cov.diagonal().minCoeff() > 0.0))
            throw std::invalid_argument("component " + std::to_string(k) +
                                        ": covariance not positive-definite");
        chol_.push_back(llt.matrixL());
        wsum += comp.weight;
    }
    if (std::abs(wsum - 1.0) > 1e-12)
        throw std::invalid_argument("weights sum to " + std::to_string(wsum) +
                                    ", expected 1 (weights sum to 1)");
}

Eigen::MatrixXd TargetDistribution::sample_exact(Eigen::Index n, std::uint64_t seed) const {
    if (n < 1) throw std::invalid_argument("sample count must be >= 1");
    Rng rng(seed);
    std::vector<double> weights;
    weights.reserve(comps_.size());
    for (const auto& comp : comps_) weights.push_back(comp.weight);

    Eigen::MatrixXd out(n, dim_);
    for (Eigen::Index i = 0; i < n; ++i) {
        const std::size_t k = comps_.size() == 1 ? 0 : rng.categorical(weights);
        out.row(i) = (comps_[k].mean + chol_[k] * rng.normal_vector(dim_)).transpose();
    }
    return out;
}

Eigen::VectorXd TargetDistribution::diffusion_score(const Eigen::VectorXd& y, double abar,
                                                    double sigma) const {
    check_sigma(sigma);
    return evaluate_noisy(comps_, y, abar, sigma).score;
}

Eigen::VectorXd TargetDistribution::posterior_mean(const Eigen::VectorXd& y, double abar,
                                                   double sigma) const {
    check_sigma(sigma);
    return evaluate_noisy(comps_, y, abar, sigma).posterior;
}

Eigen::VectorXd TargetDistribution::fm_velocity(const Eigen::VectorXd& x, double t) const {
    if (!(t < 1.0)) throw std::domain_error("fm velocity requires t < 1");
    const auto q = evaluate_noisy(comps_, x, t, 1.0 - t);
    return (q.posterior - x) / (1.0 - t);
}

Eigen::VectorXd TargetDistribution::mean() const {
    Eigen::VectorXd m = Eigen::VectorXd::Zero(dim_);
    for (const auto& comp : comps_) m += comp.weight * comp.mean;
    return m;
}

Eigen::MatrixXd TargetDistribution::covariance() const {
    const Eigen::VectorXd m = mean();
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(dim_, dim_);
    for (const auto& comp : comps_)
        c += comp.weight * (comp.cov + comp.mean * comp.mean.transpose());
    return c - m * m.transpose();
}

NoisyMarginal::NoisyMarginal(const TargetDistribution& target, double scale, double noise_sd)
    : target_(&target), scale_(scale), noise_sd_(noise_sd) {}

NoisyMarginal NoisyMarginal::diffusion(const TargetDistribution& target, double abar,
                                       double sigma) {
    return {target, abar, sigma};
}

NoisyMarginal NoisyMarginal::fm_interp(const TargetDistribution& target, double t) {
    return {target, t, 1.0 - t};
}

double NoisyMarginal::log_density(const Eigen::VectorXd& y) const {
    return evaluate_noisy(target_->comps_, y, scale_, noise_sd_).log_density;
}

}  // namespace flowpath
