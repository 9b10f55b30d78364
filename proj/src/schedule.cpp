#include "flowpath/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace flowpath {

namespace {

void check_tau(double tau, double horizon) {
    if (!(tau >= 0.0 && tau <= horizon))
        throw std::domain_error("tau = " + std::to_string(tau) + " outside [0, " +
                                std::to_string(horizon) + "]");
}

}  // namespace

NoiseSchedule NoiseSchedule::vp_linear(double beta0, double beta1, double horizon) {
    if (!(horizon > 0.0)) throw std::invalid_argument("schedule horizon must be positive");
    if (beta0 < 0.0 || beta1 < 0.0) throw std::invalid_argument("beta coefficients must be >= 0");
    NoiseSchedule s;
    s.kind_ = ScheduleKind::VpLinear;
    s.horizon_ = horizon;
    s.beta0_ = beta0;
    s.beta1_ = beta1;
    return s;
}

NoiseSchedule NoiseSchedule::vp_cosine(double horizon, double offset, double shave) {
    if (!(horizon > 0.0)) throw std::invalid_argument("schedule horizon must be positive");
    if (!(offset > 0.0)) throw std::invalid_argument("cosine offset must be positive");
    if (!(shave > 0.0 && shave < 1.0)) throw std::invalid_argument("cosine shave must be in (0,1)");
    NoiseSchedule s;
    s.kind_ = ScheduleKind::VpCosine;
    s.horizon_ = horizon;
    s.offset_ = offset;
    s.shave_ = shave;
    return s;
}

NoiseSchedule NoiseSchedule::generic_quadrature(std::function<double(double)> alpha,
                                                std::function<double(double)> beta,
                                                double horizon, int panels) {
    if (!(horizon > 0.0)) throw std::invalid_argument("schedule horizon must be positive");
    if (panels < 1) throw std::invalid_argument("quadrature resolution must be >= 1");
    if (!alpha || !beta) throw std::invalid_argument("generic schedule needs alpha and beta");
    NoiseSchedule s;
    s.kind_ = ScheduleKind::GenericQuadrature;
    s.horizon_ = horizon;
    s.alpha_fn_ = std::move(alpha);
    s.beta_fn_ = std::move(beta);
    s.panels_ = panels;
    return s;
}

std::pair<double, double> NoiseSchedule::marginal_coeffs(double tau) const {
    check_tau(tau, horizon_);
    if (tau == 0.0) return {1.0, 0.0};

    switch (kind_) {
        case ScheduleKind::VpLinear: {
            // int_0^tau beta = beta0 tau + (beta1-beta0) tau^2 / (2T)
            const double B = beta0_ * tau + (beta1_ - beta0_) * tau * tau / (2.0 * horizon_);
            const double abar = std::exp(-0.5 * B);
            const double sigma = std::sqrt(-std::expm1(-B));
            return {abar, sigma};
        }
        case ScheduleKind::VpCosine: {
            const double u = (1.0 - shave_) * tau / horizon_;
            const double theta0 = offset_ / (1.0 + offset_) * M_PI_2;
            const double theta = (u + offset_) / (1.0 + offset_) * M_PI_2;
            const double abar = std::cos(theta) / std::cos(theta0);
            const double sigma = std::sqrt(std::max(0.0, (1.0 - abar) * (1.0 + abar)));
            return {abar, sigma};
        }
        case ScheduleKind::GenericQuadrature: {
            // Cumulative A_j = int_0^{u_j} alpha on 2m+1 nodes (Simpson per
            // subinterval), then composite Simpson for
            //   sigma^2 = int_0^tau exp(2(A(s) - A(tau))) beta(s) ds,
            // which keeps the integrand <= beta and overflow-free.
            const int m = std::max(4, static_cast<int>(
                               std::ceil(panels_ * tau / horizon_ / 2.0)));
            const int nodes = 2 * m;  // subintervals; nodes+1 grid points
            const double h = tau / nodes;
            std::vector<double> A(static_cast<std::size_t>(nodes) + 1, 0.0);
            std::vector<double> beta_at(static_cast<std::size_t>(nodes) + 1, 0.0);
            beta_at[0] = beta_fn_(0.0);
            double a_prev = alpha_fn_(0.0);
            for (int j = 1; j <= nodes; ++j) {
                const double u1 = j * h;
                const double umid = u1 - 0.5 * h;
                const double a_mid = alpha_fn_(umid);
                const double a_next = alpha_fn_(u1);
                A[j] = A[j - 1] + h / 6.0 * (a_prev + 4.0 * a_mid + a_next);
                a_prev = a_next;
                beta_at[j] = beta_fn_(u1);
            }
            const double A_tau = A.back();
            auto g = [&](int j) { return std::exp(2.0 * (A[j] - A_tau)) * beta_at[j]; };
            double s2 = 0.0;
            for (int i = 0; i + 2 <= nodes; i += 2)
                s2 += h / 3.0 * (g(i) + 4.0 * g(i + 1) + g(i + 2));
            return {std::exp(-A_tau), std::sqrt(std::max(0.0, s2))};
        }
    }
    throw std::logic_error("unreachable schedule kind");
}

TimeMap::TimeMap(NoiseSchedule schedule) : schedule_(std::move(schedule)) {
    auto [abar_T, sigma_T] = schedule_.marginal_coeffs(schedule_.horizon());
    if (!(sigma_T > 0.0))
        throw std::invalid_argument("time map needs sigma_T > 0 (degenerate schedule)");
    if (!(abar_T > 0.0))
        throw std::invalid_argument("time map needs abar_T > 0; use the explicit t_min overload "
                                    "for the zero-signal limit");
    t_min_ = flow_time_of(abar_T, sigma_T);
}

TimeMap::TimeMap(NoiseSchedule schedule, double t_min) : schedule_(std::move(schedule)), t_min_(t_min) {
    if (!(t_min >= 0.0 && t_min < 1.0))
        throw std::invalid_argument("t_min must lie in [0, 1)");
}

double TimeMap::flow_time(double tau) const {
    if (tau == 0.0) return 1.0;  // sigma_0 = 0 limit
    auto [abar, sigma] = schedule_.marginal_coeffs(tau);
    return flow_time_of(abar, sigma);
}

double TimeMap::diffusion_time(double t) const {
    if (t > 1.0 || t < t_min_ - 1e-15)
        throw std::domain_error("flow time " + std::to_string(t) + " outside [t_min, 1]");
    if (t >= 1.0) return 0.0;
    if (t <= t_min_) return schedule_.horizon();

    // flow_time is strictly decreasing, so bisection converges unconditionally.
    double lo = 0.0, hi = schedule_.horizon();
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double f = flow_time(mid);
        if (f > t)
            lo = mid;
        else
            hi = mid;
        if (hi - lo <= 1e-15 * schedule_.horizon()) break;
    }
    return 0.5 * (lo + hi);
}

std::size_t TimeMap::nearest_tau_index(double t, const std::vector<double>& tau_grid) const {
    if (tau_grid.empty()) throw std::invalid_argument("empty tau grid");
    std::size_t best = 0;
    double best_err = std::abs(t - flow_time(tau_grid[0]));
    for (std::size_t i = 1; i < tau_grid.size(); ++i) {
        const double err = std::abs(t - flow_time(tau_grid[i]));
        // <= keeps the larger tau on exact ties when the grid is ascending
        const bool better = (err < best_err) ||
                            (err == best_err && tau_grid[i] > tau_grid[best]);
        if (better) {
            best = i;
            best_err = err;
        }
    }
    return best;
}

}  // namespace flowpath
