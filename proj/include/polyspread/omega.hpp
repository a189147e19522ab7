#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "polyspread/atomic_measure.hpp"
#include "polyspread/bordered.hpp"
#include "polyspread/configuration.hpp"
#include "polyspread/rstar_polymorphism.hpp"

namespace polyspread {

/// Entry-independent prefactor of the matching summation: the scalar C, the
/// shift delta_h, and the compound-Poisson exponential of the corner block,
/// combined into one measure. Computed once per kernel.
///
///   C = exp{-sum_ij mass(p_ij) - sum_i mass(p_i,inf) - sum_j mass(p_inf,j)}
///   h = exp{-(first_moment - mass) of the sum of all blocks, corner included}
struct OmegaPrefactor {
    double c = 1.0;
    double h = 1.0;
    AtomicMeasure combined;  // C * delta_h * normed_exp(corner)
};

inline OmegaPrefactor omega_prefactor(const VPolymorphism& p,
                                      const TruncationPolicy& policy) {
    check_shape(p);
    check_policy(policy);
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

    OmegaPrefactor out;
    out.c = std::exp(-mass_no_corner.value());
    out.h = std::exp(-dev_all.value());
    AtomBudget budget{policy.max_atoms, false, 0.0};
    out.combined = scale(
        convolve(delta(out.h, 1.0), normed_exp(p.inf_inf, policy.series_tail, budget),
                 budget),
        out.c);
    return out;
}

namespace detail {

// Labels of a configuration: label l carries the finite point index it sits
// on. Point i of multiplicity p_i contributes p_i consecutive labels.
inline std::vector<std::size_t> config_labels(const Configuration& c) {
    std::vector<std::size_t> pts;
    for (std::size_t i = 0; i < c.size(); ++i)
        for (int k = 0; k < c.multiplicities[i]; ++k) pts.push_back(i);
    return pts;
}

inline double factorial_product(const Configuration& c) {
    double r = 1.0;
    for (int m : c.multiplicities)
        r *= static_cast<double>(factorial_u64(m));
    return r;
}

}  // namespace detail

/// Entry of the functor on configuration pairs, by direct enumeration of all
/// partial bijections between the labeled points. Factorial cost; kept as
/// the permanent oracle for the collapsed evaluation below.
///
///   omega(phi, psi) = prefactor * (1 / prod p_i! prod q_j!) *
///     sum over partial bijections Q of labels(phi) -> labels(psi) of
///       conv of p_{i(s), j(Qs)} over matched s,
///       conv of p_{i(s), inf}  over unmatched source labels,
///       conv of p_{inf, j(t)}  over unmatched target labels,
/// with the empty convolution product equal to delta_1(1).
inline AtomicMeasure omega_entry(const VPolymorphism& p, const Configuration& phi,
                                 const Configuration& psi,
                                 const TruncationPolicy& policy,
                                 const OmegaPrefactor& pref) {
    check_shape(p);
    if (phi.size() != p.rows() || psi.size() != p.cols())
        throw std::invalid_argument("configuration does not match kernel");
    for (int m : phi.multiplicities)
        if (m < 0 || m > kMaxMultiplicityCap)
            throw std::invalid_argument("multiplicity out of range");
    for (int m : psi.multiplicities)
        if (m < 0 || m > kMaxMultiplicityCap)
            throw std::invalid_argument("multiplicity out of range");

    const std::vector<std::size_t> src = detail::config_labels(phi);
    const std::vector<std::size_t> tgt = detail::config_labels(psi);
    if (tgt.size() > 63)
        throw std::invalid_argument("configuration too large for enumeration");

    AtomBudget budget{policy.max_atoms, false, 0.0};
    AtomicMeasure sum;

    // Recurse over source labels; each is unmatched or matched to an unused
    // target label.
    std::vector<int> match(src.size(), -1);
    auto walk = [&](auto&& self, std::size_t s, std::uint64_t used) -> void {
        if (s == src.size()) {
            AtomicMeasure term = delta(1.0, 1.0);
            for (std::size_t l = 0; l < src.size(); ++l) {
                const AtomicMeasure& block =
                    match[l] < 0 ? p.fin_inf[src[l]]
                                 : p.fin_fin[src[l]][tgt[match[l]]];
                if (block.empty()) return;
                term = convolve(term, block, budget);
            }
            for (std::size_t t = 0; t < tgt.size(); ++t) {
                if (used & (std::uint64_t{1} << t)) continue;
                if (p.inf_fin[tgt[t]].empty()) return;
                term = convolve(term, p.inf_fin[tgt[t]], budget);
            }
            sum = add(sum, term);
            return;
        }
        match[s] = -1;
        self(self, s + 1, used);
        for (std::size_t t = 0; t < tgt.size(); ++t) {
            if (used & (std::uint64_t{1} << t)) continue;
            match[s] = static_cast<int>(t);
            self(self, s + 1, used | (std::uint64_t{1} << t));
        }
        match[s] = -1;
    };
    walk(walk, 0, 0);

    const double norm =
        1.0 / (detail::factorial_product(phi) * detail::factorial_product(psi));
    return convolve(pref.combined, scale(sum, norm), budget);
}

inline AtomicMeasure omega_entry(const VPolymorphism& p, const Configuration& phi,
                                 const Configuration& psi,
                                 const TruncationPolicy& policy) {
    return omega_entry(p, phi, psi, policy, omega_prefactor(p, policy));
}

namespace detail {

// Convolution power table: pow[k] = m^{*k} for k = 0..cap, pow[0] = delta_1.
inline std::vector<AtomicMeasure> convolution_powers(const AtomicMeasure& m,
                                                     int cap,
                                                     AtomBudget& budget) {
    std::vector<AtomicMeasure> pow;
    pow.reserve(cap + 1);
    pow.push_back(delta(1.0, 1.0));
    for (int k = 1; k <= cap; ++k) {
        if (m.empty()) {
            pow.push_back(AtomicMeasure{});
            continue;
        }
        pow.push_back(convolve(pow.back(), m, budget));
    }
    return pow;
}

struct OmegaPowerTables {
    std::vector<std::vector<std::vector<AtomicMeasure>>> fin;  // [i][j][k]
    std::vector<std::vector<AtomicMeasure>> src_border;        // [i][k]
    std::vector<std::vector<AtomicMeasure>> tgt_border;        // [j][k]
};

inline OmegaPowerTables omega_power_tables(const VPolymorphism& p, int cap,
                                           AtomBudget& budget) {
    OmegaPowerTables t;
    t.fin.resize(p.rows());
    t.src_border.resize(p.rows());
    for (std::size_t i = 0; i < p.rows(); ++i) {
        t.fin[i].resize(p.cols());
        for (std::size_t j = 0; j < p.cols(); ++j)
            t.fin[i][j] = convolution_powers(p.fin_fin[i][j], cap, budget);
        t.src_border[i] = convolution_powers(p.fin_inf[i], cap, budget);
    }
    t.tgt_border.resize(p.cols());
    for (std::size_t j = 0; j < p.cols(); ++j)
        t.tgt_border[j] = convolution_powers(p.inf_fin[j], cap, budget);
    return t;
}

}  // namespace detail

/// Same value as omega_entry, computed by matching type instead of labeled
/// matchings: a sum over nonnegative integer matrices K with row sums
/// r_i <= p_i and column sums c_j <= q_j,
///
///   sum_K [prod_ij p_ij^{*K_ij} * prod_i p_i,inf^{*(p_i - r_i)}
///          * prod_j p_inf,j^{*(q_j - c_j)}]
///        / (prod_ij K_ij! prod_i (p_i - r_i)! prod_j (q_j - c_j)!),
///
/// then the same prefactor. The coefficient counts the labeled matchings of
/// each type against the 1/(prod p_i! prod q_j!) normalization; its
/// correctness is gated on exhaustive agreement with omega_entry.
inline AtomicMeasure omega_entry_collapsed(const VPolymorphism& p,
                                           const Configuration& phi,
                                           const Configuration& psi,
                                           const TruncationPolicy& policy,
                                           const OmegaPrefactor& pref,
                                           const detail::OmegaPowerTables& tables) {
    check_shape(p);
    if (phi.size() != p.rows() || psi.size() != p.cols())
        throw std::invalid_argument("configuration does not match kernel");
    const std::size_t s = p.rows(), t = p.cols();
    for (int m : phi.multiplicities)
        if (m < 0 || m > kMaxMultiplicityCap)
            throw std::invalid_argument("multiplicity out of range");
    for (int m : psi.multiplicities)
        if (m < 0 || m > kMaxMultiplicityCap)
            throw std::invalid_argument("multiplicity out of range");

    AtomBudget budget{policy.max_atoms, false, 0.0};
    AtomicMeasure sum;
    std::vector<int> k_cell(s * t, 0);
    std::vector<int> row_used(s, 0), col_used(t, 0);

    auto walk = [&](auto&& self, std::size_t cell) -> void {
        if (cell == s * t) {
            AtomicMeasure term = delta(1.0, 1.0);
            double coeff = 1.0;
            for (std::size_t i = 0; i < s && !term.empty(); ++i) {
                for (std::size_t j = 0; j < t && !term.empty(); ++j) {
                    const int k = k_cell[i * t + j];
                    if (k == 0) continue;
                    term = convolve(term, tables.fin[i][j][k], budget);
                    coeff /= static_cast<double>(factorial_u64(k));
                }
                const int rest = phi.multiplicities[i] - row_used[i];
                if (rest > 0)
                    term = convolve(term, tables.src_border[i][rest], budget);
                coeff /= static_cast<double>(factorial_u64(rest));
            }
            for (std::size_t j = 0; j < t && !term.empty(); ++j) {
                const int rest = psi.multiplicities[j] - col_used[j];
                if (rest > 0)
                    term = convolve(term, tables.tgt_border[j][rest], budget);
                coeff /= static_cast<double>(factorial_u64(rest));
            }
            if (!term.empty()) sum = add(sum, scale(term, coeff));
            return;
        }
        const std::size_t i = cell / t, j = cell % t;
        const int max_k = std::min(phi.multiplicities[i] - row_used[i],
                                   psi.multiplicities[j] - col_used[j]);
        for (int k = 0; k <= max_k; ++k) {
            if (k > 0 && p.fin_fin[i][j].empty()) break;
            k_cell[cell] = k;
            row_used[i] += k;
            col_used[j] += k;
            self(self, cell + 1);
            row_used[i] -= k;
            col_used[j] -= k;
            k_cell[cell] = 0;
        }
    };
    walk(walk, 0);

    return convolve(pref.combined, sum, budget);
}

inline AtomicMeasure omega_entry_collapsed(const VPolymorphism& p,
                                           const Configuration& phi,
                                           const Configuration& psi,
                                           const TruncationPolicy& policy) {
    int cap = 0;
    for (int m : phi.multiplicities) cap = std::max(cap, m);
    for (int m : psi.multiplicities) cap = std::max(cap, m);
    AtomBudget budget{policy.max_atoms, false, 0.0};
    const auto tables = detail::omega_power_tables(p, cap, budget);
    return omega_entry_collapsed(p, phi, psi, policy, omega_prefactor(p, policy),
                                 tables);
}

/// The functor's value on truncated configuration spaces, with truncation
/// certificates. Space masses are the exact Poisson masses of the enumerated
/// configurations, so the marginal residuals of `poly` measure only what the
/// box truncation removed:
///   row residuals  <= row_tail_bound  (target-box tail under the column
///                     mass intensities lambda_j = sum_i mass(p_ij) + mass(p_inf,j))
///   col residuals  <= col_tail_bound  (source-box tail under the row
///                     first-moment intensities kappa_i).
struct OmegaMatrix {
    std::vector<Configuration> source_configs;
    std::vector<Configuration> target_configs;
    RStarPolymorphism poly;
    double source_box_tail = 0.0;
    double target_box_tail = 0.0;
    double row_tail_bound = 0.0;
    double col_tail_bound = 0.0;
};

inline OmegaMatrix omega(const VPolymorphism& p, const TruncationPolicy& policy) {
    check_shape(p);
    check_policy(policy);
    OmegaMatrix out;
    out.source_configs = enumerate_configs(p.source, policy);
    out.target_configs = enumerate_configs(p.target, policy);
    out.source_box_tail = 1.0 - config_box_mass(p.source, policy.max_multiplicity);
    out.target_box_tail = 1.0 - config_box_mass(p.target, policy.max_multiplicity);

    const OmegaPrefactor pref = omega_prefactor(p, policy);
    AtomBudget budget{policy.max_atoms, false, 0.0};
    const auto tables =
        detail::omega_power_tables(p, policy.max_multiplicity, budget);

    out.poly.source.masses.reserve(out.source_configs.size());
    for (const Configuration& c : out.source_configs)
        out.poly.source.masses.push_back(poisson_mass(p.source, c));
    out.poly.target.masses.reserve(out.target_configs.size());
    for (const Configuration& c : out.target_configs)
        out.poly.target.masses.push_back(poisson_mass(p.target, c));

    out.poly.entries.assign(out.source_configs.size(),
                            std::vector<AtomicMeasure>(out.target_configs.size()));
    for (std::size_t a = 0; a < out.source_configs.size(); ++a)
        for (std::size_t b = 0; b < out.target_configs.size(); ++b)
            out.poly.entries[a][b] = omega_entry_collapsed(
                p, out.source_configs[a], out.target_configs[b], policy, pref,
                tables);

    // Certified truncation bounds for the marginal residuals; the series
    // truncation of the corner exponential can shave at most series_tail of
    // relative mass off every entry.
    double row_bound = 1.0, col_bound = 1.0;
    for (std::size_t j = 0; j < p.cols(); ++j) {
        detail::KahanSum lambda;
        for (std::size_t i = 0; i < p.rows(); ++i)
            lambda.add(p.fin_fin[i][j].total_mass());
        lambda.add(p.inf_fin[j].total_mass());
        row_bound *= poisson_cdf(lambda.value(), policy.max_multiplicity);
    }
    for (std::size_t i = 0; i < p.rows(); ++i) {
        detail::KahanSum kappa;
        for (std::size_t j = 0; j < p.cols(); ++j)
            kappa.add(p.fin_fin[i][j].first_moment());
        kappa.add(p.fin_inf[i].first_moment());
        col_bound *= poisson_cdf(kappa.value(), policy.max_multiplicity);
    }
    out.row_tail_bound = (1.0 - row_bound) + policy.series_tail;
    out.col_tail_bound = (1.0 - col_bound) + policy.series_tail;
    return out;
}

/// Pushforward of an omega matrix along partitions of the finite points.
/// Keeps the coarse configurations whose preimages lie entirely inside the
/// enumerated fine boxes (every multiplicity <= the fine cap), for which the
/// regrouped entries are complete sums.
inline OmegaMatrix pushforward_omega(const OmegaMatrix& m,
                                     const BorderedSpace& fine_source,
                                     const Partition& u,
                                     const BorderedSpace& fine_target,
                                     const Partition& v,
                                     const TruncationPolicy& policy) {
    BorderedSpace coarse_src{group_masses(u, fine_source.finite_masses)};
    BorderedSpace coarse_tgt{group_masses(v, fine_target.finite_masses)};

    std::vector<Configuration> src_cfg, tgt_cfg;
    const int cap = policy.max_multiplicity;
    {
        TruncationPolicy box = policy;
        box.tail_mass = 1.0;  // completeness filter below, not a tail demand
        for (const Configuration& c : enumerate_configs(coarse_src, box))
            src_cfg.push_back(c);
        for (const Configuration& c : enumerate_configs(coarse_tgt, box))
            tgt_cfg.push_back(c);
    }

    auto index_of = [](const std::vector<Configuration>& list,
                       const Configuration& c) -> std::ptrdiff_t {
        for (std::size_t i = 0; i < list.size(); ++i)
            if (list[i] == c) return static_cast<std::ptrdiff_t>(i);
        return -1;
    };

    OmegaMatrix out;
    out.source_configs = src_cfg;
    out.target_configs = tgt_cfg;
    out.poly.source.masses.reserve(src_cfg.size());
    for (const Configuration& c : src_cfg)
        out.poly.source.masses.push_back(poisson_mass(coarse_src, c));
    out.poly.target.masses.reserve(tgt_cfg.size());
    for (const Configuration& c : tgt_cfg)
        out.poly.target.masses.push_back(poisson_mass(coarse_tgt, c));
    out.poly.entries.assign(src_cfg.size(),
                            std::vector<AtomicMeasure>(tgt_cfg.size()));
    out.source_box_tail = 1.0 - config_box_mass(coarse_src, cap);
    out.target_box_tail = 1.0 - config_box_mass(coarse_tgt, cap);
    out.row_tail_bound = m.row_tail_bound;
    out.col_tail_bound = m.col_tail_bound;

    for (std::size_t a = 0; a < m.source_configs.size(); ++a) {
        const std::ptrdiff_t ca =
            index_of(src_cfg, coarsen_config(m.source_configs[a], u));
        if (ca < 0) continue;
        for (std::size_t b = 0; b < m.target_configs.size(); ++b) {
            const std::ptrdiff_t cb =
                index_of(tgt_cfg, coarsen_config(m.target_configs[b], v));
            if (cb < 0) continue;
            out.poly.entries[ca][cb] =
                add(out.poly.entries[ca][cb], m.poly.entries[a][b]);
        }
    }
    return out;
}

}  // namespace polyspread
