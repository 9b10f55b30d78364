#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <utility>
#include <vector>

#include "flowpath/target.hpp"

namespace flowpath {

/// Monte-Carlo sliced 2-Wasserstein: sqrt of the average squared 1-D W2 over
/// `projections` seeded random unit directions, sorted-quantile coupling
/// (min(n,m) quantiles when sizes differ). Deterministic per seed.
double sliced_w2(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, int projections,
                 std::uint64_t seed);

/// Energy distance 2 E|a-b| - E|a-a'| - E|b-b'| (V-statistic over all pairs).
/// Inputs larger than `subsample_cap` rows are reduced to a deterministic
/// seeded row subsample before the O(n^2) pass.
double energy_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                       Eigen::Index subsample_cap = 2048, std::uint64_t seed = 0x9e3779b9u);

/// (|sample mean - exact mean|_2, |sample cov - exact cov|_F) against the
/// target's closed-form mixture moments.
std::pair<double, double> moment_errors(const Eigen::MatrixXd& samples,
                                        const TargetDistribution& target);

/// Least-squares slope of log(rmse) against log(dt), dt = 1/N. Points with
/// non-positive or non-finite rmse are dropped; fewer than 3 survivors is an
/// error.
double order_estimate(const std::vector<std::pair<int, double>>& n_rmse);

}  // namespace flowpath
