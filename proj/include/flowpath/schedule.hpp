#pragma once

#include <functional>
#include <utility>
#include <vector>

namespace flowpath {

/// Flow time assigned to a pair of marginal coefficients:
/// t = 1/(1 + sigma/alpha_bar), evaluated as alpha_bar/(alpha_bar + sigma)
/// so the sigma -> inf and alpha_bar -> 0 limits behave.
inline double flow_time_of(double abar, double sigma) { return abar / (abar + sigma); }

enum class ScheduleKind { VpLinear, VpCosine, GenericQuadrature };

/// Forward-noising schedule dx = -alpha(tau) x dtau + sqrt(beta(tau)) dw,
/// exposed through its conditional-marginal coefficients
///   x_tau | x_0 ~ N(abar_tau x_0, sigma_tau^2 I),
///   abar_tau = exp(-int_0^tau alpha),  sigma_tau^2 = int_0^tau e^{-2 int_s^tau alpha} beta(s) ds.
/// Immutable after construction; all queries are pure.
class NoiseSchedule {
public:
    /// beta(tau) = beta0 + (beta1 - beta0) tau/T, alpha = beta/2 (variance preserving).
    static NoiseSchedule vp_linear(double beta0, double beta1, double horizon = 1.0);

    /// Cosine signal schedule with offset `s`; `shave` stops the cosine argument
    /// short of pi/2 so abar(T) stays positive and Theorem-style time maps remain
    /// bijective (continuous analogue of the usual discrete beta clipping).
    static NoiseSchedule vp_cosine(double horizon = 1.0, double offset = 0.008,
                                   double shave = 0.005);

    /// Arbitrary (alpha, beta) pair; marginal integrals evaluated by composite
    /// Simpson quadrature with `panels` subintervals over [0, T].
    static NoiseSchedule generic_quadrature(std::function<double(double)> alpha,
                                            std::function<double(double)> beta,
                                            double horizon, int panels = 4096);

    ScheduleKind kind() const { return kind_; }
    double horizon() const { return horizon_; }
    bool variance_preserving() const { return kind_ != ScheduleKind::GenericQuadrature; }

    /// (abar_tau, sigma_tau); throws std::domain_error outside [0, T].
    std::pair<double, double> marginal_coeffs(double tau) const;

    double snr_ratio(double tau) const {
        auto [a, s] = marginal_coeffs(tau);
        return s / a;
    }

private:
    NoiseSchedule() = default;

    ScheduleKind kind_ = ScheduleKind::VpLinear;
    double horizon_ = 1.0;
    // vp-linear
    double beta0_ = 0.0, beta1_ = 0.0;
    // vp-cosine
    double offset_ = 0.008, shave_ = 0.005;
    // generic
    std::function<double(double)> alpha_fn_, beta_fn_;
    int panels_ = 4096;
};

/// Bijective correspondence between diffusion time tau in [0, T] and flow
/// time t in [t_min, 1], t(tau) = 1/(1 + sigma_tau/abar_tau). Strictly
/// decreasing whenever sigma/abar strictly increases. Immutable; thread-safe.
class TimeMap {
public:
    explicit TimeMap(NoiseSchedule schedule);

    /// Explicit start-time override; exists for the abar_T -> 0 limiting case
    /// where t_min tends to 0 and the frozen-velocity branch becomes empty.
    TimeMap(NoiseSchedule schedule, double t_min);

    const NoiseSchedule& schedule() const { return schedule_; }

    /// t(tau); returns exactly 1 at tau = 0.
    double flow_time(double tau) const;

    /// Continuous inverse by bisection: |flow_time(tau) - t| driven below 1e-10.
    /// Throws std::domain_error for t outside [t_min, 1]; callers own the
    /// frozen-velocity branch for t < t_min.
    double diffusion_time(double t) const;

    /// Discrete inverse over a tau grid: index minimizing |t - t(tau_s)|,
    /// ties broken toward larger tau (more noise).
    std::size_t nearest_tau_index(double t, const std::vector<double>& tau_grid) const;

    double start_time() const { return t_min_; }

private:
    NoiseSchedule schedule_;
    double t_min_ = 0.0;
};

}  // namespace flowpath
