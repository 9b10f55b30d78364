#include "flowpath/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "flowpath/rng.hpp"

namespace flowpath {

namespace {

/// Squared 1-D W2 between two sorted samples on min(n,m) quantiles.
double w2_squared_sorted(const std::vector<double>& a, const std::vector<double>& b) {
    const std::size_t n = a.size(), m = b.size();
    const std::size_t k = std::min(n, m);
    double acc = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        const double q = (static_cast<double>(i) + 0.5) / static_cast<double>(k);
        const auto ia = std::min(n - 1, static_cast<std::size_t>(q * static_cast<double>(n)));
        const auto ib = std::min(m - 1, static_cast<std::size_t>(q * static_cast<double>(m)));
        const double d = a[ia] - b[ib];
        acc += d * d;
    }
    return acc / static_cast<double>(k);
}

Eigen::MatrixXd maybe_subsample(const Eigen::MatrixXd& x, Eigen::Index cap, std::uint64_t seed) {
    if (x.rows() <= cap) return x;
    Rng rng(mix64(seed, static_cast<std::uint64_t>(x.rows())));
    const auto idx = rng.sample_indices(x.rows(), cap);
    Eigen::MatrixXd out(cap, x.cols());
    for (Eigen::Index i = 0; i < cap; ++i) out.row(i) = x.row(idx[static_cast<std::size_t>(i)]);
    return out;
}

double mean_pairwise_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < b.rows(); ++j) acc += (a.row(i) - b.row(j)).norm();
    return acc / (static_cast<double>(a.rows()) * static_cast<double>(b.rows()));
}

}  // namespace

double sliced_w2(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, int projections,
                 std::uint64_t seed) {
    if (a.rows() < 2 || b.rows() < 2) throw std::domain_error("sliced_w2 needs >= 2 samples");
    if (a.cols() != b.cols()) throw std::invalid_argument("sliced_w2 dimension mismatch");
    if (projections < 1) throw std::invalid_argument("sliced_w2 needs >= 1 projection");

    const Eigen::Index d = a.cols();
    Rng rng(seed);
    std::vector<double> pa(static_cast<std::size_t>(a.rows()));
    std::vector<double> pb(static_cast<std::size_t>(b.rows()));
    double acc = 0.0;
    for (int p = 0; p < projections; ++p) {
        Eigen::VectorXd u = rng.normal_vector(d);
        const double nrm = u.norm();
        if (nrm == 0.0) continue;
        u /= nrm;
        Eigen::Map<Eigen::VectorXd>(pa.data(), a.rows()) = a * u;
        Eigen::Map<Eigen::VectorXd>(pb.data(), b.rows()) = b * u;
        std::sort(pa.begin(), pa.end());
        std::sort(pb.begin(), pb.end());
        acc += w2_squared_sorted(pa, pb);
    }
    return std::sqrt(acc / projections);
}

double energy_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                       Eigen::Index subsample_cap, std::uint64_t seed) {
    if (a.rows() < 2 || b.rows() < 2) throw std::domain_error("energy_distance needs >= 2 samples");
    if (a.cols() != b.cols()) throw std::invalid_argument("energy_distance dimension mismatch");

    const Eigen::MatrixXd as = maybe_subsample(a, subsample_cap, seed);
    const Eigen::MatrixXd bs = maybe_subsample(b, subsample_cap, seed);
    return 2.0 * mean_pairwise_distance(as, bs) - mean_pairwise_distance(as, as) -
           mean_pairwise_distance(bs, bs);
}

std::pair<double, double> moment_errors(const Eigen::MatrixXd& samples,
                                        const TargetDistribution& target) {
    if (samples.rows() < 2) throw std::invalid_argument("moment_errors needs >= 2 samples");
    const Eigen::Index n = samples.rows();
    const Eigen::VectorXd mean = samples.colwise().mean().transpose();
    const Eigen::MatrixXd centered = samples.rowwise() - mean.transpose();
    const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n);
    const double mean_err = (mean - target.mean()).norm();
    const double cov_err = (cov - target.covariance()).norm();
    return {mean_err, cov_err};
}

double order_estimate(const std::vector<std::pair<int, double>>& n_rmse) {
    std::vector<double> xs, ys;
    for (const auto& [n, rmse] : n_rmse) {
        if (!(rmse > 0.0) || !std::isfinite(rmse)) continue;
        xs.push_back(std::log(1.0 / n));  // log dt
        ys.push_back(std::log(rmse));
    }
    if (xs.size() < 3)
        throw std::invalid_argument("order_estimate needs >= 3 usable (N, rmse) points");
    const auto m = static_cast<double>(xs.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
    }
    const double var = sxx - sx * sx / m;
    if (var <= 0.0) throw std::invalid_argument("order_estimate needs distinct N values");
    return (sxy - sx * sy / m) / var;
}

}  // namespace flowpath
