#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <random>
#include <string_view>
#include <vector>

namespace flowpath {

/// FNV-1a over raw bytes; used for seed derivation and batch hashing.
constexpr std::uint64_t fnv1a64(const void* data, std::size_t n,
                                std::uint64_t h = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t fnv1a64(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ull) {
    return fnv1a64(s.data(), s.size(), h);
}

/// splitmix64 finalizer; combines seed material into independent streams.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

constexpr std::uint64_t mix64(std::uint64_t a, std::uint64_t b) {
    return mix64(mix64(a) ^ (b + 0x9e3779b97f4a7c15ull));
}

inline std::uint64_t derive_seed(std::string_view tag, std::uint64_t a, std::uint64_t b = 0,
                                 std::uint64_t c = 0) {
    return mix64(mix64(fnv1a64(tag), a), mix64(b, c));
}

/// Hash an Eigen matrix by its IEEE-754 payload, row-major traversal.
inline std::uint64_t hash_matrix(const Eigen::MatrixXd& m) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            double v = m(i, j);
            std::uint64_t bits;
            std::memcpy(&bits, &v, sizeof bits);
            h = fnv1a64(&bits, sizeof bits, h);
        }
    return h;
}

/// Deterministic generator: mt19937_64 underneath, Box-Muller normals.
/// std::normal_distribution is implementation-defined, so normals are
/// produced explicitly to keep output stable under compiler changes.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    /// Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    Eigen::VectorXd normal_vector(Eigen::Index d) {
        Eigen::VectorXd v(d);
        for (Eigen::Index i = 0; i < d; ++i) v(i) = normal();
        return v;
    }

    Eigen::MatrixXd normal_matrix(Eigen::Index rows, Eigen::Index cols) {
        Eigen::MatrixXd m(rows, cols);
        for (Eigen::Index i = 0; i < rows; ++i)
            for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = normal();
        return m;
    }

    /// Index draw proportional to nonnegative weights (assumed to sum to ~1).
    std::size_t categorical(const std::vector<double>& weights) {
        const double u = uniform();
        double acc = 0.0;
        for (std::size_t k = 0; k < weights.size(); ++k) {
            acc += weights[k];
            if (u < acc) return k;
        }
        return weights.size() - 1;
    }

    /// Subsample `k` distinct row indices out of `n` (partial Fisher-Yates).
    std::vector<Eigen::Index> sample_indices(Eigen::Index n, Eigen::Index k) {
        std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
        for (Eigen::Index i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
        k = std::min(k, n);
        for (Eigen::Index i = 0; i < k; ++i) {
            const auto j = i + static_cast<Eigen::Index>(uniform() * static_cast<double>(n - i));
            std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
        }
        idx.resize(static_cast<std::size_t>(k));
        return idx;
    }

private:
    std::mt19937_64 gen_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace flowpath
