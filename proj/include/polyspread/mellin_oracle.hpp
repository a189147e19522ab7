#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "polyspread/bordered.hpp"
#include "polyspread/configuration.hpp"
#include "polyspread/multipoly.hpp"

namespace polyspread {

/// Data of the operator f(z) -> prefactor * f(Az + b) * exp(sum_j c_j z_j)
/// on formal power series. A has rows indexed by the output variables of the
/// affine map and columns by the z variables; for kernel shadows, rows are
/// target points and columns are source points.
struct OperatorData {
    std::vector<std::vector<std::complex<double>>> a;  // rows x cols
    std::vector<std::complex<double>> b;               // length rows
    std::vector<std::complex<double>> c;               // length cols
    std::complex<double> prefactor = 1.0;

    std::size_t rows() const { return a.size(); }
    std::size_t cols() const { return a.empty() ? c.size() : a.front().size(); }
};

inline void check_shape(const OperatorData& op) {
    for (const auto& row : op.a)
        if (row.size() != op.cols())
            throw std::invalid_argument("operator matrix is ragged");
    if (op.b.size() != op.rows())
        throw std::invalid_argument("operator b-vector length mismatch");
    if (!op.a.empty() && op.c.size() != op.cols())
        throw std::invalid_argument("operator c-vector length mismatch");
}

/// Coefficient of z^p in prefactor * (Az + b)^q * exp(sum c_j z_j), by exact
/// expansion: truncating every factor at total degree |p| cannot disturb the
/// extracted coefficient.
inline std::complex<double> u_matrix_element(const OperatorData& op,
                                             const std::vector<int>& p,
                                             const std::vector<int>& q,
                                             int degree_cap) {
    check_shape(op);
    if (p.size() != op.cols() || q.size() != op.rows())
        throw std::invalid_argument("multi-index arity mismatch");
    int dp = 0, dq = 0;
    for (int x : p) {
        if (x < 0) throw std::invalid_argument("negative multi-index");
        dp += x;
    }
    for (int x : q) {
        if (x < 0) throw std::invalid_argument("negative multi-index");
        dq += x;
    }
    if (dp > degree_cap || dq > degree_cap)
        throw std::invalid_argument("multi-index exceeds degree cap");

    const int n = static_cast<int>(op.cols());
    TruncPoly poly = TruncPoly::one(n, dp);
    for (std::size_t j = 0; j < op.rows(); ++j)
        for (int rep = 0; rep < q[j]; ++rep)
            poly = poly.times_linear(op.a[j], op.b[j]);

    // Truncated exponential of the linear form; degree |p| suffices.
    TruncPoly exp_acc = TruncPoly::one(n, dp);
    TruncPoly term = TruncPoly::one(n, dp);
    for (int k = 1; k <= dp; ++k) {
        term = term.times_linear(op.c, 0.0);
        term.scale_by(1.0 / static_cast<double>(k));
        exp_acc.add_in(term);
    }
    poly = poly.times(exp_acc);
    return op.prefactor * poly.coeff(p);
}

/// Product of the operators as maps on power series: applying `rhs` to the
/// function argument first, then `lhs`, collapses to
///   (rhs.A * lhs.A, rhs.A * lhs.b + rhs.b, lhs.A^T * rhs.c + lhs.c)
/// with the scalar exp(sum_j lhs.b_j * rhs.c_j) joining the prefactors.
inline OperatorData operator_product(const OperatorData& lhs,
                                     const OperatorData& rhs) {
    check_shape(lhs);
    check_shape(rhs);
    if (rhs.cols() != lhs.rows())
        throw std::invalid_argument("operator shapes do not compose");
    OperatorData out;
    const std::size_t r = rhs.rows(), m = lhs.rows(), n = lhs.cols();
    out.a.assign(r, std::vector<std::complex<double>>(n, 0.0));
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t k = 0; k < n; ++k)
            for (std::size_t j = 0; j < m; ++j)
                out.a[i][k] += rhs.a[i][j] * lhs.a[j][k];
    out.b.assign(r, 0.0);
    for (std::size_t i = 0; i < r; ++i) {
        out.b[i] = rhs.b[i];
        for (std::size_t j = 0; j < m; ++j) out.b[i] += rhs.a[i][j] * lhs.b[j];
    }
    out.c.assign(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        out.c[k] = lhs.c[k];
        for (std::size_t j = 0; j < m; ++j) out.c[k] += lhs.a[j][k] * rhs.c[j];
    }
    std::complex<double> cross = 0.0;
    for (std::size_t j = 0; j < m; ++j) cross += lhs.b[j] * rhs.c[j];
    out.prefactor = lhs.prefactor * rhs.prefactor * std::exp(cross);
    return out;
}

/// Complex image of a bordered kernel at Mellin exponent s on the strip
/// 0 <= Re s <= 1.
///
/// Calibrated against the labeled matching sum: with
///   a[j][i] = mellin(fin_fin[i][j], s)   (note the transpose),
///   b[j]    = mellin(inf_fin[j], s),
///   c[i]    = mellin(fin_inf[i], s),
///   prefactor = C * h^s * exp(mellin(corner, s) - mass(corner)),
/// the matrix elements reproduce the functor entries as
///   mellin(omega_entry(P, p, q), s) = u_matrix_element(shadow, p, q) / prod q_j!.
inline OperatorData shadow_of_v(const VPolymorphism& p, std::complex<double> s) {
    if (s.real() < 0.0 || s.real() > 1.0)
        throw std::domain_error("shadow exponent must satisfy 0 <= Re s <= 1");
    check_shape(p);
    OperatorData op;
    op.a.assign(p.cols(), std::vector<std::complex<double>>(p.rows(), 0.0));
    for (std::size_t i = 0; i < p.rows(); ++i)
        for (std::size_t j = 0; j < p.cols(); ++j)
            op.a[j][i] = mellin(p.fin_fin[i][j], s);
    op.b.assign(p.cols(), 0.0);
    for (std::size_t j = 0; j < p.cols(); ++j)
        op.b[j] = mellin(p.inf_fin[j], s);
    op.c.assign(p.rows(), 0.0);
    for (std::size_t i = 0; i < p.rows(); ++i)
        op.c[i] = mellin(p.fin_inf[i], s);

    detail::KahanSum mass_no_corner, dev_all;
    for (std::size_t i = 0; i < p.rows(); ++i) {
        for (std::size_t j = 0; j < p.cols(); ++j) {
            mass_no_corner.add(p.fin_fin[i][j].total_mass());
            dev_all.add(p.fin_fin[i][j].first_moment() -
                        p.fin_fin[i][j].total_mass());
        }
        mass_no_corner.add(p.fin_inf[i].total_mass());
        dev_all.add(p.fin_inf[i].first_moment() - p.fin_inf[i].total_mass());
    }
    for (std::size_t j = 0; j < p.cols(); ++j) {
        mass_no_corner.add(p.inf_fin[j].total_mass());
        dev_all.add(p.inf_fin[j].first_moment() - p.inf_fin[j].total_mass());
    }
    dev_all.add(p.inf_inf.first_moment() - p.inf_inf.total_mass());

    const double c_scalar = std::exp(-mass_no_corner.value());
    const double h = std::exp(-dev_all.value());
    op.prefactor = c_scalar * std::exp(s * std::log(h)) *
                   std::exp(mellin(p.inf_inf, s) - p.inf_inf.total_mass());
    return op;
}

/// The shadow of a composed kernel, assembled from the factor shadows: fold
/// the middle masses into the first factor and multiply the extra
/// exp(sum nu_j) into its prefactor, then take the plain operator product.
inline OperatorData compose_shadows(const OperatorData& shadow_q,
                                    const OperatorData& shadow_p,
                                    const std::vector<double>& middle_masses) {
    check_shape(shadow_p);
    check_shape(shadow_q);
    if (middle_masses.size() != shadow_p.rows())
        throw std::invalid_argument("middle space size mismatch");
    OperatorData weighted = shadow_p;
    double total = 0.0;
    for (std::size_t j = 0; j < middle_masses.size(); ++j) {
        const double nu = middle_masses[j];
        for (auto& x : weighted.a[j]) x /= nu;
        weighted.b[j] /= nu;
        total += nu;
    }
    weighted.prefactor *= std::exp(total);
    return operator_product(weighted, shadow_q);
}

/// Normalizer relating matrix elements to functor entries.
inline double target_factorial_norm(const std::vector<int>& q) {
    double r = 1.0;
    for (int x : q) r *= static_cast<double>(factorial_u64(x));
    return r;
}

}  // namespace polyspread
