#pragma once

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "polyspread/atomic_measure.hpp"
#include "polyspread/finite_space.hpp"

namespace polyspread {

inline constexpr double kSpaceMatchTol = 1e-9;
inline constexpr double kDefaultMarginalTol = 1e-9;

/// A matrix of measures over source x target points. Rows are indexed by
/// source points, columns by target points. A valid instance satisfies the
/// row law (entry masses sum to the source mass) and the column law (entry
/// first moments sum to the target mass).
struct RStarPolymorphism {
    FiniteSpace source;  // masses alpha_i
    FiniteSpace target;  // masses beta_j
    std::vector<std::vector<AtomicMeasure>> entries;  // [source][target]

    std::size_t rows() const { return source.size(); }
    std::size_t cols() const { return target.size(); }
};

inline void check_shape(const RStarPolymorphism& p) {
    check_space(p.source);
    check_space(p.target);
    if (p.entries.size() != p.source.size())
        throw std::invalid_argument("entry row count does not match source");
    for (const auto& row : p.entries)
        if (row.size() != p.target.size())
            throw std::invalid_argument("entry column count does not match target");
}

struct MarginalReport {
    double max_row_residual = 0.0;  // |sum_j mass(p_ij) - alpha_i|
    double max_col_residual = 0.0;  // |sum_i first_moment(p_ij) - beta_j|
    double tol = 0.0;
    bool accepted = false;
};

inline MarginalReport validate(const RStarPolymorphism& p,
                               double tol = kDefaultMarginalTol) {
    check_shape(p);
    MarginalReport r;
    r.tol = tol;
    for (std::size_t i = 0; i < p.rows(); ++i) {
        detail::KahanSum s;
        for (std::size_t j = 0; j < p.cols(); ++j)
            s.add(p.entries[i][j].total_mass());
        r.max_row_residual =
            std::max(r.max_row_residual, std::abs(s.value() - p.source.masses[i]));
    }
    for (std::size_t j = 0; j < p.cols(); ++j) {
        detail::KahanSum s;
        for (std::size_t i = 0; i < p.rows(); ++i)
            s.add(p.entries[i][j].first_moment());
        r.max_col_residual =
            std::max(r.max_col_residual, std::abs(s.value() - p.target.masses[j]));
    }
    r.accepted = r.max_row_residual <= tol && r.max_col_residual <= tol;
    return r;
}

/// Identity kernel: delta_1(alpha_i) on the diagonal.
inline RStarPolymorphism identity_polymorphism(const FiniteSpace& space) {
    check_space(space);
    RStarPolymorphism p;
    p.source = space;
    p.target = space;
    p.entries.assign(space.size(), std::vector<AtomicMeasure>(space.size()));
    for (std::size_t i = 0; i < space.size(); ++i)
        p.entries[i][i] = delta(1.0, space.masses[i]);
    return p;
}

/// Total uniform spreading of one probability space along another:
/// every entry is delta_1(alpha_i * beta_j).
inline RStarPolymorphism uniform_spreading(const FiniteSpace& source,
                                           const FiniteSpace& target) {
    check_space(source);
    check_space(target);
    RStarPolymorphism p;
    p.source = source;
    p.target = target;
    p.entries.assign(source.size(), std::vector<AtomicMeasure>(target.size()));
    for (std::size_t i = 0; i < source.size(); ++i)
        for (std::size_t j = 0; j < target.size(); ++j)
            p.entries[i][j] = delta(1.0, source.masses[i] * target.masses[j]);
    return p;
}

inline void check_spaces_match(const std::vector<double>& a,
                               const std::vector<double>& b,
                               const char* what) {
    if (a.size() != b.size()) throw std::invalid_argument(what);
    for (std::size_t i = 0; i < a.size(); ++i)
        if (std::abs(a[i] - b[i]) > kSpaceMatchTol)
            throw std::invalid_argument(what);
}

/// Composition of kernels, P first then Q:
///   r_ik = sum_j (1/beta_j) p_ij * q_jk,
/// where beta are the masses of the middle space (P's target, Q's source)
/// and * is multiplicative convolution.
inline RStarPolymorphism compose(const RStarPolymorphism& q,
                                 const RStarPolymorphism& p) {
    check_shape(p);
    check_shape(q);
    check_spaces_match(p.target.masses, q.source.masses,
                       "compose: middle spaces do not match");
    RStarPolymorphism r;
    r.source = p.source;
    r.target = q.target;
    r.entries.assign(p.rows(), std::vector<AtomicMeasure>(q.cols()));
    for (std::size_t i = 0; i < p.rows(); ++i) {
        for (std::size_t k = 0; k < q.cols(); ++k) {
            AtomicMeasure acc;
            for (std::size_t j = 0; j < p.cols(); ++j) {
                if (p.entries[i][j].empty() || q.entries[j][k].empty()) continue;
                acc = add(acc, scale(convolve(p.entries[i][j], q.entries[j][k]),
                                     1.0 / p.target.masses[j]));
            }
            r.entries[i][k] = std::move(acc);
        }
    }
    return r;
}

/// Quotient kernel of grouped points: entry (I,J) is the sum of the entries
/// over the groups; quotient masses are group sums.
inline RStarPolymorphism coarsen(const RStarPolymorphism& p, const Partition& s,
                                 const Partition& t) {
    check_shape(p);
    if (s.size() != p.rows() || t.size() != p.cols())
        throw std::invalid_argument("coarsen: partition sizes do not match");
    RStarPolymorphism r;
    r.source.masses = group_masses(s, p.source.masses);
    r.target.masses = group_masses(t, p.target.masses);
    r.entries.assign(s.group_count, std::vector<AtomicMeasure>(t.group_count));
    for (std::size_t i = 0; i < p.rows(); ++i)
        for (std::size_t j = 0; j < p.cols(); ++j)
            r.entries[s.group_of[i]][t.group_of[j]] =
                add(r.entries[s.group_of[i]][t.group_of[j]], p.entries[i][j]);
    return r;
}

/// Lift of a quotient kernel back to fine spaces: entry (i,j) is the group
/// entry scaled by (alpha_i/alpha_group) * (beta_j/beta_group). Coarsening a
/// lifted kernel along the same partitions restores the quotient kernel.
inline RStarPolymorphism lift(const RStarPolymorphism& r, const Partition& s,
                              const Partition& t, const FiniteSpace& fine_source,
                              const FiniteSpace& fine_target) {
    check_shape(r);
    check_space(fine_source);
    check_space(fine_target);
    if (s.size() != fine_source.size() || t.size() != fine_target.size())
        throw std::invalid_argument("lift: partition sizes do not match");
    if (s.group_count != r.rows() || t.group_count != r.cols())
        throw std::invalid_argument("lift: quotient shapes do not match");
    std::vector<double> sm = group_masses(s, fine_source.masses);
    std::vector<double> tm = group_masses(t, fine_target.masses);
    check_spaces_match(sm, r.source.masses, "lift: source group masses mismatch");
    check_spaces_match(tm, r.target.masses, "lift: target group masses mismatch");

    RStarPolymorphism out;
    out.source = fine_source;
    out.target = fine_target;
    out.entries.assign(fine_source.size(),
                       std::vector<AtomicMeasure>(fine_target.size()));
    for (std::size_t i = 0; i < fine_source.size(); ++i) {
        const std::size_t gi = s.group_of[i];
        for (std::size_t j = 0; j < fine_target.size(); ++j) {
            const std::size_t gj = t.group_of[j];
            const double w = (fine_source.masses[i] / sm[gi]) *
                             (fine_target.masses[j] / tm[gj]);
            out.entries[i][j] = scale(r.entries[gi][gj], w);
        }
    }
    return out;
}

using ComplexMatrix = std::vector<std::vector<std::complex<double>>>;

/// Matrix of the bilinear form against point indicators at exponent w:
/// M[i][j] = mellin(p_ij, w). Defined on the strip 0 <= Re w <= 1.
/// Composition maps to the weighted matrix product
///   t(compose(Q,P)) = t(P) * diag(1/beta_j) * t(Q).
inline ComplexMatrix t_operator(const RStarPolymorphism& p,
                                std::complex<double> w) {
    if (w.real() < 0.0 || w.real() > 1.0)
        throw std::domain_error("t_operator exponent must satisfy 0 <= Re w <= 1");
    check_shape(p);
    ComplexMatrix m(p.rows(), std::vector<std::complex<double>>(p.cols()));
    for (std::size_t i = 0; i < p.rows(); ++i)
        for (std::size_t j = 0; j < p.cols(); ++j)
            m[i][j] = mellin(p.entries[i][j], w);
    return m;
}

/// Applies the position map x -> x^a to every entry, then composes the
/// result with itself n times. The row/column laws intentionally are not
/// asserted: rescaling breaks the row law while the product stays defined.
inline RStarPolymorphism power_rescaled(const RStarPolymorphism& p, int n,
                                        double a) {
    if (n < 1) throw std::invalid_argument("power must be >= 1");
    if (a == 0.0) throw std::domain_error("rescaling exponent must be nonzero");
    check_shape(p);
    check_spaces_match(p.source.masses, p.target.masses,
                       "power_rescaled: kernel must be square");
    RStarPolymorphism base = p;
    for (auto& row : base.entries)
        for (auto& e : row) e = rescale_exponent(e, a);
    RStarPolymorphism acc = base;
    for (int k = 1; k < n; ++k) acc = compose(base, acc);
    return acc;
}

}  // namespace polyspread
