#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "polyspread/bordered.hpp"
#include "polyspread/errors.hpp"
#include "polyspread/finite_space.hpp"

namespace polyspread {

/// Multiplicities of the finite points of a bordered space. The border point
/// implicitly carries infinite multiplicity and is never stored.
struct Configuration {
    std::vector<int> multiplicities;

    std::size_t size() const { return multiplicities.size(); }
    int total() const {
        int t = 0;
        for (int m : multiplicities) t += m;
        return t;
    }
    bool operator==(const Configuration& o) const {
        return multiplicities == o.multiplicities;
    }
};

/// Caps and tolerances for configuration enumeration and series truncation.
struct TruncationPolicy {
    int max_multiplicity = 5;
    double tail_mass = 1e-6;
    double series_tail = 1e-9;
    std::size_t max_atoms = kDefaultMaxAtoms;
};

inline constexpr int kMaxMultiplicityCap = 20;

inline void check_policy(const TruncationPolicy& p) {
    if (p.max_multiplicity < 0 || p.max_multiplicity > kMaxMultiplicityCap)
        throw std::invalid_argument(
            "max_multiplicity must lie in [0, " +
            std::to_string(kMaxMultiplicityCap) + "]");
    if (!(p.tail_mass > 0.0))
        throw std::invalid_argument("tail_mass must be positive");
    if (!(p.series_tail > 0.0))
        throw std::invalid_argument("series_tail must be positive");
    if (p.max_atoms == 0)
        throw std::invalid_argument("max_atoms must be positive");
}

/// Exact factorial for n <= 20.
inline std::uint64_t factorial_u64(int n) {
    if (n < 0 || n > kMaxMultiplicityCap)
        throw std::invalid_argument("factorial argument out of range");
    std::uint64_t r = 1;
    for (int k = 2; k <= n; ++k) r *= static_cast<std::uint64_t>(k);
    return r;
}

/// e^{-lambda} lambda^p / p!, computed stably for any p >= 0.
inline double poisson_point_mass(double lambda, int p) {
    if (p < 0) throw std::invalid_argument("multiplicity must be >= 0");
    double r = std::exp(-lambda);
    for (int k = 1; k <= p; ++k) r *= lambda / k;
    return r;
}

inline double poisson_cdf(double lambda, int cap) {
    double term = std::exp(-lambda), cdf = 0.0;
    for (int k = 0; k <= cap; ++k) {
        cdf += term;
        term *= lambda / (k + 1);
    }
    return std::min(cdf, 1.0);
}

/// Product of independent Poisson point masses with intensities equal to the
/// point masses of the space.
inline double poisson_mass(const BorderedSpace& space, const Configuration& c) {
    if (c.size() != space.size())
        throw std::invalid_argument("configuration does not match space");
    double r = 1.0;
    for (std::size_t i = 0; i < space.size(); ++i)
        r *= poisson_point_mass(space.finite_masses[i], c.multiplicities[i]);
    return r;
}

/// Total Poisson mass of the multiplicity box {0..cap}^k.
inline double config_box_mass(const BorderedSpace& space, int cap) {
    double r = 1.0;
    for (double mu : space.finite_masses) r *= poisson_cdf(mu, cap);
    return r;
}

/// All multiplicity vectors with every entry <= policy.max_multiplicity, in
/// lexicographic order (last index fastest). Fails if the omitted Poisson
/// mass exceeds policy.tail_mass.
inline std::vector<Configuration> enumerate_configs(
    const BorderedSpace& space, const TruncationPolicy& policy) {
    check_policy(policy);
    check_space(space);
    const int cap = policy.max_multiplicity;
    const double box = config_box_mass(space, cap);
    if (1.0 - box > policy.tail_mass)
        throw TruncationError(
            "multiplicity cap " + std::to_string(cap) +
            " leaves Poisson tail " + std::to_string(1.0 - box) +
            " > " + std::to_string(policy.tail_mass) +
            "; raise max_multiplicity");

    const std::size_t k = space.size();
    double count_est = 1.0;
    for (std::size_t i = 0; i < k; ++i) count_est *= cap + 1;
    if (count_est > 2e6)
        throw TruncationError("configuration box too large to enumerate");

    std::vector<Configuration> out;
    out.reserve(static_cast<std::size_t>(count_est));
    Configuration cur;
    cur.multiplicities.assign(k, 0);
    while (true) {
        out.push_back(cur);
        std::size_t i = k;
        while (i > 0) {
            --i;
            if (cur.multiplicities[i] < cap) {
                ++cur.multiplicities[i];
                for (std::size_t j = i + 1; j < k; ++j) cur.multiplicities[j] = 0;
                break;
            }
            if (i == 0) return out;
        }
        if (k == 0) return out;
    }
}

/// Sums multiplicities within groups of finite points.
inline Configuration coarsen_config(const Configuration& c, const Partition& u) {
    if (u.size() != c.size())
        throw std::invalid_argument("partition does not match configuration");
    Configuration out;
    out.multiplicities.assign(u.group_count, 0);
    for (std::size_t i = 0; i < c.size(); ++i)
        out.multiplicities[u.group_of[i]] += c.multiplicities[i];
    return out;
}

}  // namespace polyspread
