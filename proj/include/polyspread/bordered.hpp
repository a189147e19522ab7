#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "polyspread/atomic_measure.hpp"
#include "polyspread/finite_space.hpp"
#include "polyspread/rstar_polymorphism.hpp"

namespace polyspread {

/// A finite space plus one formal border point of infinite mass. Only the
/// finite part carries representable masses; the border is implicit. An
/// empty finite part is allowed.
struct BorderedSpace {
    std::vector<double> finite_masses;

    std::size_t size() const { return finite_masses.size(); }
};

inline void check_space(const BorderedSpace& s) {
    for (double m : s.finite_masses)
        if (!(m > 0.0) || !std::isfinite(m))
            throw std::invalid_argument("space masses must be positive reals");
}

/// Block kernel over bordered spaces.
///
/// Index conventions (pinned):
///   fin_fin[i][j]  mass leaving source point i for target point j
///   fin_inf[i]     mass leaving source point i for the target border
///   inf_fin[j]     mass arriving at target point j from the source border
///   inf_inf        pure border-to-border weight
///
/// Row law:    sum_j mass(fin_fin[i][j]) + mass(fin_inf[i]) = mu_i
/// Column law: sum_i fm(fin_fin[i][j]) + fm(inf_fin[j])     = nu_j
struct VPolymorphism {
    BorderedSpace source;  // masses mu_i
    BorderedSpace target;  // masses nu_j
    std::vector<std::vector<AtomicMeasure>> fin_fin;  // s x t
    std::vector<AtomicMeasure> fin_inf;               // length s
    std::vector<AtomicMeasure> inf_fin;               // length t
    AtomicMeasure inf_inf;

    std::size_t rows() const { return source.size(); }
    std::size_t cols() const { return target.size(); }
};

inline void check_shape(const VPolymorphism& p) {
    check_space(p.source);
    check_space(p.target);
    if (p.fin_fin.size() != p.source.size())
        throw std::invalid_argument("fin_fin row count does not match source");
    for (const auto& row : p.fin_fin)
        if (row.size() != p.target.size())
            throw std::invalid_argument("fin_fin column count does not match target");
    if (p.fin_inf.size() != p.source.size())
        throw std::invalid_argument("fin_inf length does not match source");
    if (p.inf_fin.size() != p.target.size())
        throw std::invalid_argument("inf_fin length does not match target");
}

inline MarginalReport validate_v(const VPolymorphism& p,
                                 double tol = kDefaultMarginalTol) {
    check_shape(p);
    MarginalReport r;
    r.tol = tol;
    for (std::size_t i = 0; i < p.rows(); ++i) {
        detail::KahanSum s;
        for (std::size_t j = 0; j < p.cols(); ++j)
            s.add(p.fin_fin[i][j].total_mass());
        s.add(p.fin_inf[i].total_mass());
        r.max_row_residual = std::max(
            r.max_row_residual, std::abs(s.value() - p.source.finite_masses[i]));
    }
    for (std::size_t j = 0; j < p.cols(); ++j) {
        detail::KahanSum s;
        for (std::size_t i = 0; i < p.rows(); ++i)
            s.add(p.fin_fin[i][j].first_moment());
        s.add(p.inf_fin[j].first_moment());
        r.max_col_residual = std::max(
            r.max_col_residual, std::abs(s.value() - p.target.finite_masses[j]));
    }
    r.accepted = r.max_row_residual <= tol && r.max_col_residual <= tol;
    return r;
}

/// Block product of bordered kernels, P: M->N first, then Q: N->K.
/// With D = diag(1/nu_j) over the middle finite masses, the four blocks are
///
///   r_ik      = sum_j nu_j^-1 p_ij * q_jk
///   r_i,inf   = sum_j nu_j^-1 p_ij * q_j,inf   + p_i,inf
///   r_inf,k   = sum_j nu_j^-1 p_inf,j * q_jk   + q_inf,k
///   r_inf,inf = sum_j nu_j^-1 p_inf,j * q_j,inf + p_inf,inf + q_inf,inf
///
/// Mass escaping through the middle border continues to the far border with
/// derivative one, so those corrections enter additively and never through D.
inline VPolymorphism compose_v(const VPolymorphism& q, const VPolymorphism& p) {
    check_shape(p);
    check_shape(q);
    check_spaces_match(p.target.finite_masses, q.source.finite_masses,
                       "compose_v: middle spaces do not match");
    const std::size_t s = p.rows(), t = p.cols(), r_pts = q.cols();
    const std::vector<double>& nu = p.target.finite_masses;

    VPolymorphism r;
    r.source = p.source;
    r.target = q.target;
    r.fin_fin.assign(s, std::vector<AtomicMeasure>(r_pts));
    r.fin_inf.assign(s, AtomicMeasure{});
    r.inf_fin.assign(r_pts, AtomicMeasure{});

    auto weighted_sum = [&](auto left_of_j, auto right_of_j) {
        AtomicMeasure acc;
        for (std::size_t j = 0; j < t; ++j) {
            const AtomicMeasure& a = left_of_j(j);
            const AtomicMeasure& b = right_of_j(j);
            if (a.empty() || b.empty()) continue;
            acc = add(acc, scale(convolve(a, b), 1.0 / nu[j]));
        }
        return acc;
    };

    for (std::size_t i = 0; i < s; ++i) {
        for (std::size_t k = 0; k < r_pts; ++k)
            r.fin_fin[i][k] =
                weighted_sum([&](std::size_t j) -> const AtomicMeasure& { return p.fin_fin[i][j]; },
                             [&](std::size_t j) -> const AtomicMeasure& { return q.fin_fin[j][k]; });
        r.fin_inf[i] = add(
            weighted_sum([&](std::size_t j) -> const AtomicMeasure& { return p.fin_fin[i][j]; },
                         [&](std::size_t j) -> const AtomicMeasure& { return q.fin_inf[j]; }),
            p.fin_inf[i]);
    }
    for (std::size_t k = 0; k < r_pts; ++k)
        r.inf_fin[k] = add(
            weighted_sum([&](std::size_t j) -> const AtomicMeasure& { return p.inf_fin[j]; },
                         [&](std::size_t j) -> const AtomicMeasure& { return q.fin_fin[j][k]; }),
            q.inf_fin[k]);
    r.inf_inf = add(
        weighted_sum([&](std::size_t j) -> const AtomicMeasure& { return p.inf_fin[j]; },
                     [&](std::size_t j) -> const AtomicMeasure& { return q.fin_inf[j]; }),
        add(p.inf_inf, q.inf_inf));
    return r;
}

/// Embeds an invertible map of bordered spaces, given as a bijection sigma of
/// finite indices: the only nonzero entries are fin_fin[i][sigma(i)], a point
/// mass of size mu_i at the mass ratio nu_sigma(i)/mu_i. All border blocks
/// vanish.
inline VPolymorphism embed_map(const BorderedSpace& source,
                               const std::vector<std::size_t>& sigma,
                               const BorderedSpace& target) {
    check_space(source);
    check_space(target);
    if (sigma.size() != source.size() || source.size() != target.size())
        throw std::invalid_argument("embed_map: sigma must match space sizes");
    std::vector<bool> hit(target.size(), false);
    for (std::size_t i : sigma) {
        if (i >= target.size() || hit[i])
            throw std::invalid_argument("embed_map: sigma is not a bijection");
        hit[i] = true;
    }
    VPolymorphism p;
    p.source = source;
    p.target = target;
    p.fin_fin.assign(source.size(), std::vector<AtomicMeasure>(target.size()));
    p.fin_inf.assign(source.size(), AtomicMeasure{});
    p.inf_fin.assign(target.size(), AtomicMeasure{});
    for (std::size_t i = 0; i < source.size(); ++i) {
        const double mu = source.finite_masses[i];
        const double nu = target.finite_masses[sigma[i]];
        p.fin_fin[i][sigma[i]] = delta(nu / mu, mu);
    }
    return p;
}

/// Blockwise group sums over partitions of the finite parts; the border maps
/// to the border, so the corner block is unchanged.
inline VPolymorphism coarsen_v(const VPolymorphism& p, const Partition& u,
                               const Partition& v) {
    check_shape(p);
    if (u.size() != p.rows() || v.size() != p.cols())
        throw std::invalid_argument("coarsen_v: partition sizes do not match");
    VPolymorphism r;
    r.source.finite_masses = group_masses(u, p.source.finite_masses);
    r.target.finite_masses = group_masses(v, p.target.finite_masses);
    r.fin_fin.assign(u.group_count, std::vector<AtomicMeasure>(v.group_count));
    r.fin_inf.assign(u.group_count, AtomicMeasure{});
    r.inf_fin.assign(v.group_count, AtomicMeasure{});
    for (std::size_t i = 0; i < p.rows(); ++i) {
        for (std::size_t j = 0; j < p.cols(); ++j)
            r.fin_fin[u.group_of[i]][v.group_of[j]] =
                add(r.fin_fin[u.group_of[i]][v.group_of[j]], p.fin_fin[i][j]);
        r.fin_inf[u.group_of[i]] = add(r.fin_inf[u.group_of[i]], p.fin_inf[i]);
    }
    for (std::size_t j = 0; j < p.cols(); ++j)
        r.inf_fin[v.group_of[j]] = add(r.inf_fin[v.group_of[j]], p.inf_fin[j]);
    r.inf_inf = p.inf_inf;
    return r;
}

/// Forgetful conversion of a kernel whose border blocks all vanish.
inline RStarPolymorphism as_rstar(const VPolymorphism& p) {
    check_shape(p);
    for (const AtomicMeasure& m : p.fin_inf)
        if (!m.empty())
            throw std::invalid_argument("as_rstar: nonzero border block");
    for (const AtomicMeasure& m : p.inf_fin)
        if (!m.empty())
            throw std::invalid_argument("as_rstar: nonzero border block");
    if (!p.inf_inf.empty())
        throw std::invalid_argument("as_rstar: nonzero border block");
    RStarPolymorphism r;
    r.source.masses = p.source.finite_masses;
    r.target.masses = p.target.finite_masses;
    r.entries = p.fin_fin;
    return r;
}

/// Checks the block product against ordinary multiplication of complex
/// matrices degenerating in epsilon. At a fixed Mellin exponent s the kernel
/// maps to the (n+1)x(n+1) matrix
///
///   [ A/nu      eps*b          ]      A[i][j] = mellin(p_ij, s),
///   [ eps*c/nu  1 + eps^2 * d  ]      b[i] = mellin(p_i,inf, s),
///                                     c[j] = mellin(p_inf,j, s),
///                                     d    = mellin(p_inf,inf, s),
///
/// where /nu divides each column j by the target mass nu_j. Multiplying the
/// images of P and Q ordinarily and extracting the eps^0, eps^1, eps^2 block
/// coefficients must reproduce the image of compose_v(Q, P) up to O(eps).
/// Returns the largest coefficient mismatch.
inline double eps_degeneration_check(const VPolymorphism& p,
                                     const VPolymorphism& q,
                                     std::complex<double> s, double eps) {
    if (!(eps > 0.0)) throw std::domain_error("eps must be positive");
    check_shape(p);
    check_shape(q);
    check_spaces_match(p.target.finite_masses, q.source.finite_masses,
                       "eps_degeneration_check: middle spaces do not match");
    const std::size_t ns = p.rows(), nt = p.cols(), nk = q.cols();

    auto image = [&](const VPolymorphism& x) {
        const std::size_t a = x.rows(), b = x.cols();
        const std::vector<double>& w = x.target.finite_masses;
        std::vector<std::vector<std::complex<double>>> m(
            a + 1, std::vector<std::complex<double>>(b + 1));
        for (std::size_t i = 0; i < a; ++i)
            for (std::size_t j = 0; j < b; ++j)
                m[i][j] = mellin(x.fin_fin[i][j], s) / w[j];
        for (std::size_t i = 0; i < a; ++i)
            m[i][b] = eps * mellin(x.fin_inf[i], s);
        for (std::size_t j = 0; j < b; ++j)
            m[a][j] = eps * mellin(x.inf_fin[j], s) / w[j];
        m[a][b] = 1.0 + eps * eps * mellin(x.inf_inf, s);
        return m;
    };

    auto mp = image(p);
    auto mq = image(q);
    std::vector<std::vector<std::complex<double>>> prod(
        ns + 1, std::vector<std::complex<double>>(nk + 1, 0.0));
    for (std::size_t i = 0; i <= ns; ++i)
        for (std::size_t k = 0; k <= nk; ++k)
            for (std::size_t j = 0; j <= nt; ++j)
                prod[i][k] += mp[i][j] * mq[j][k];

    const VPolymorphism r = compose_v(q, p);
    auto mr = image(r);  // same eps, same column weighting

    double resid = 0.0;
    for (std::size_t i = 0; i < ns; ++i)
        for (std::size_t k = 0; k < nk; ++k)
            resid = std::max(resid, std::abs(prod[i][k] - mr[i][k]));
    for (std::size_t i = 0; i < ns; ++i)
        resid = std::max(resid, std::abs(prod[i][nk] - mr[i][nk]) / eps);
    for (std::size_t k = 0; k < nk; ++k)
        resid = std::max(resid, std::abs(prod[ns][k] - mr[ns][k]) / eps);
    resid = std::max(resid,
                     std::abs(prod[ns][nk] - mr[ns][nk]) / (eps * eps));
    return resid;
}

}  // namespace polyspread
