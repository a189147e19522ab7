#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace polyspread {

/// A finite space of weighted points. Masses are strictly positive and need
/// not sum to one; probability normalization is only checked on request.
struct FiniteSpace {
    std::vector<double> masses;

    std::size_t size() const { return masses.size(); }
    double total() const {
        return std::accumulate(masses.begin(), masses.end(), 0.0);
    }
    bool is_probability(double tol = 1e-9) const {
        return std::abs(total() - 1.0) <= tol;
    }
};

inline void check_space(const FiniteSpace& s) {
    for (double m : s.masses)
        if (!(m > 0.0) || !std::isfinite(m))
            throw std::invalid_argument("space masses must be positive reals");
}

/// Assignment of each index of a finite space to a group; every group in
/// 0..group_count-1 must be nonempty.
struct Partition {
    std::vector<std::size_t> group_of;
    std::size_t group_count = 0;

    std::size_t size() const { return group_of.size(); }

    static Partition singletons(std::size_t n) {
        Partition p;
        p.group_of.resize(n);
        for (std::size_t i = 0; i < n; ++i) p.group_of[i] = i;
        p.group_count = n;
        return p;
    }

    static Partition all_in_one(std::size_t n) {
        Partition p;
        p.group_of.assign(n, 0);
        p.group_count = n == 0 ? 0 : 1;
        return p;
    }
};

inline Partition make_partition(std::vector<std::size_t> group_of) {
    Partition p;
    p.group_of = std::move(group_of);
    if (!p.group_of.empty()) {
        std::size_t g = 0;
        for (std::size_t x : p.group_of) g = std::max(g, x + 1);
        p.group_count = g;
    }
    std::vector<bool> seen(p.group_count, false);
    for (std::size_t x : p.group_of) seen[x] = true;
    for (bool b : seen)
        if (!b) throw std::invalid_argument("partition has an empty group");
    return p;
}

/// Masses of the quotient points: group sums.
inline std::vector<double> group_masses(const Partition& p,
                                        const std::vector<double>& masses) {
    if (p.group_of.size() != masses.size())
        throw std::invalid_argument("partition size mismatch");
    std::vector<double> out(p.group_count, 0.0);
    for (std::size_t i = 0; i < masses.size(); ++i)
        out[p.group_of[i]] += masses[i];
    return out;
}

}  // namespace polyspread
