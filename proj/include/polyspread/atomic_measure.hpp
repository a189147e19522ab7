#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

#include "polyspread/errors.hpp"

namespace polyspread {

/// One weighted point of a measure on the multiplicative group of
/// positive reals.
struct Atom {
    double position = 1.0;  // > 0
    double mass = 0.0;      // >= 0
};

inline constexpr double kDefaultMergeTol = 1e-9;  // log-position merge radius
inline constexpr std::size_t kDefaultMaxAtoms = 100000;
inline constexpr std::size_t kRawProductLimit = 20000000;

/// Atom budget for operations that can blow up the atom count.
/// By default an overflow throws; with lossy_prune the smallest masses are
/// dropped instead and the total dropped mass is accumulated here.
struct AtomBudget {
    std::size_t max_atoms = kDefaultMaxAtoms;
    bool lossy_prune = false;
    double dropped_mass = 0.0;
};

namespace detail {

// Neumaier-compensated accumulator.
class KahanSum {
  public:
    void add(double x) {
        double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

  private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

}  // namespace detail

/// A finite positive atomic measure on the multiplicative group of positive
/// reals, kept in canonical form: positions strictly increasing, no two atoms
/// within the log-position merge tolerance, no zero masses.
class AtomicMeasure {
  public:
    AtomicMeasure() = default;

    const std::vector<Atom>& atoms() const { return atoms_; }
    bool empty() const { return atoms_.empty(); }
    std::size_t size() const { return atoms_.size(); }

    double total_mass() const {
        detail::KahanSum s;
        for (const Atom& a : atoms_) s.add(a.mass);
        return s.value();
    }

    double first_moment() const {
        detail::KahanSum s;
        for (const Atom& a : atoms_) s.add(a.mass * a.position);
        return s.value();
    }

    /// Integral of |x - 1|.
    double abs_dev_mass() const {
        detail::KahanSum s;
        for (const Atom& a : atoms_) s.add(a.mass * std::abs(a.position - 1.0));
        return s.value();
    }

    bool operator==(const AtomicMeasure& o) const {
        if (atoms_.size() != o.atoms_.size()) return false;
        for (std::size_t i = 0; i < atoms_.size(); ++i)
            if (atoms_[i].position != o.atoms_[i].position ||
                atoms_[i].mass != o.atoms_[i].mass)
                return false;
        return true;
    }
    bool operator!=(const AtomicMeasure& o) const { return !(*this == o); }

    friend AtomicMeasure canonicalize(std::vector<Atom> raw, double merge_tol);

  private:
    std::vector<Atom> atoms_;
};

/// Sorts, merges atoms within |log(x1/x2)| <= merge_tol at the mass-weighted
/// geometric mean position, and drops zero masses.
inline AtomicMeasure canonicalize(std::vector<Atom> raw,
                                  double merge_tol = kDefaultMergeTol) {
    if (merge_tol < 0.0) throw std::domain_error("merge tolerance must be >= 0");
    for (const Atom& a : raw) {
        if (!(a.position > 0.0) || !std::isfinite(a.position))
            throw std::domain_error("atom position must be a positive real");
        if (a.mass < 0.0 || !std::isfinite(a.mass))
            throw std::domain_error("atom mass must be a finite nonnegative real");
    }
    raw.erase(std::remove_if(raw.begin(), raw.end(),
                             [](const Atom& a) { return a.mass == 0.0; }),
              raw.end());
    std::sort(raw.begin(), raw.end(), [](const Atom& a, const Atom& b) {
        return a.position < b.position;
    });

    AtomicMeasure out;
    out.atoms_.reserve(raw.size());
    std::size_t i = 0;
    while (i < raw.size()) {
        double lo = raw[i].position;
        double hi = raw[i].position;
        double mass = raw[i].mass;
        double wlog = raw[i].mass * std::log(raw[i].position);
        std::size_t j = i + 1;
        while (j < raw.size() &&
               std::abs(std::log(raw[j].position) - wlog / mass) <= merge_tol) {
            hi = raw[j].position;
            mass += raw[j].mass;
            wlog += raw[j].mass * std::log(raw[j].position);
            ++j;
        }
        // Identical positions keep their exact value; only genuine merges
        // move to the weighted geometric mean.
        double pos = (lo == hi) ? lo : std::exp(wlog / mass);
        out.atoms_.push_back({pos, mass});
        i = j;
    }
    return out;
}

/// Point mass at `position`.
inline AtomicMeasure delta(double position, double mass = 1.0) {
    return canonicalize({{position, mass}});
}

inline AtomicMeasure add(const AtomicMeasure& u, const AtomicMeasure& v) {
    std::vector<Atom> all;
    all.reserve(u.size() + v.size());
    all.insert(all.end(), u.atoms().begin(), u.atoms().end());
    all.insert(all.end(), v.atoms().begin(), v.atoms().end());
    return canonicalize(std::move(all));
}

inline AtomicMeasure scale(const AtomicMeasure& u, double c) {
    if (c < 0.0 || !std::isfinite(c))
        throw std::domain_error("scale factor must be a finite nonnegative real");
    if (c == 0.0) return {};
    std::vector<Atom> all = u.atoms();
    for (Atom& a : all) a.mass *= c;
    return canonicalize(std::move(all));
}

/// Drops the smallest masses until at most max_atoms remain.
/// Returns the pruned measure and the total dropped mass.
inline std::pair<AtomicMeasure, double> prune_smallest(const AtomicMeasure& u,
                                                       std::size_t max_atoms) {
    if (u.size() <= max_atoms) return {u, 0.0};
    std::vector<Atom> all = u.atoms();
    std::sort(all.begin(), all.end(),
              [](const Atom& a, const Atom& b) { return a.mass > b.mass; });
    detail::KahanSum dropped;
    for (std::size_t i = max_atoms; i < all.size(); ++i) dropped.add(all[i].mass);
    all.resize(max_atoms);
    return {canonicalize(std::move(all)), dropped.value()};
}

/// Multiplicative convolution: atoms multiply positions and masses.
inline AtomicMeasure convolve(const AtomicMeasure& u, const AtomicMeasure& v,
                              AtomBudget& budget) {
    if (u.empty() || v.empty()) return {};
    const std::size_t raw_count = u.size() * v.size();
    if (raw_count > kRawProductLimit)
        throw AtomBudgetError("convolution product too large to materialize");
    std::vector<Atom> prod;
    prod.reserve(raw_count);
    for (const Atom& a : u.atoms())
        for (const Atom& b : v.atoms())
            prod.push_back({a.position * b.position, a.mass * b.mass});
    AtomicMeasure r = canonicalize(std::move(prod));
    if (r.size() > budget.max_atoms) {
        if (!budget.lossy_prune)
            throw AtomBudgetError("atom count exceeds budget after convolution");
        auto [pruned, dropped] = prune_smallest(r, budget.max_atoms);
        budget.dropped_mass += dropped;
        return pruned;
    }
    return r;
}

inline AtomicMeasure convolve(const AtomicMeasure& u, const AtomicMeasure& v) {
    AtomBudget b;
    return convolve(u, v, b);
}

/// Mellin transform at exponent s: sum of w * x^s.
inline std::complex<double> mellin(const AtomicMeasure& u,
                                   std::complex<double> s) {
    detail::KahanSum re, im;
    for (const Atom& a : u.atoms()) {
        std::complex<double> t =
            a.mass * std::exp(s * std::log(a.position));
        re.add(t.real());
        im.add(t.imag());
    }
    return {re.value(), im.value()};
}

/// Position map x -> x^a (mass unchanged); an automorphism of the
/// convolution semigroup. Requires a != 0.
inline AtomicMeasure rescale_exponent(const AtomicMeasure& u, double a) {
    if (a == 0.0 || !std::isfinite(a))
        throw std::domain_error("rescaling exponent must be a nonzero real");
    std::vector<Atom> all = u.atoms();
    for (Atom& at : all) at.position = std::pow(at.position, a);
    return canonicalize(std::move(all));
}

/// Compound-Poisson exponential: e^{-mass(psi)} sum_k psi^{*k} / k!.
///
/// The series is cut at the smallest K whose omitted tail is <= series_tail
/// in BOTH total mass and first moment (the mass tail is the Poisson tail at
/// rate mass(psi); the first-moment tail is e^{-mass} times the tail of the
/// series at rate first_moment(psi)). Controlling both keeps the
/// sum-to-convolution identity tight on the whole verification grid, not
/// just at bounded positions.
inline AtomicMeasure normed_exp(const AtomicMeasure& psi, double series_tail,
                                AtomBudget& budget) {
    if (!(series_tail > 0.0))
        throw std::invalid_argument("series_tail must be positive");
    if (psi.empty()) return delta(1.0, 1.0);

    const long double lambda = psi.total_mass();
    const long double fmom = psi.first_moment();
    const long double scale_out = std::exp(-lambda);

    // Series terms e^{-lambda} x^k / k! for both rates, then suffix sums
    // (summed forward, no cancellation) to locate the cutoff.
    const std::size_t kMaxTerms = 10000;
    std::vector<long double> term_m, term_f;
    long double tm = scale_out, tf = scale_out;
    const long double floor = series_tail * 1e-6L;
    for (std::size_t k = 0; k < kMaxTerms; ++k) {
        term_m.push_back(tm);
        term_f.push_back(tf);
        const long double kk = static_cast<long double>(k + 1);
        tm *= lambda / kk;
        tf *= fmom / kk;
        if (kk > lambda && kk > fmom && tm < floor && tf < floor) break;
    }
    if (term_m.size() >= kMaxTerms)
        throw TruncationError("exponential series does not meet tail bound");
    // tail(K) = sum of terms beyond K plus the analytically bounded rest;
    // the stopping rule guarantees K+1 exceeds both rates, so the remainder
    // is dominated by a convergent geometric series.
    std::size_t K = term_m.size();
    const long double n2 = static_cast<long double>(K) + 2.0L;
    long double tail_m = tm * n2 / (n2 - lambda);
    long double tail_f = tf * n2 / (n2 - fmom);
    while (K > 0 && tail_m + term_m[K - 1] <= series_tail &&
           tail_f + term_f[K - 1] <= series_tail) {
        --K;
        tail_m += term_m[K];
        tail_f += term_f[K];
    }
    if (K == term_m.size())
        throw TruncationError("exponential series does not meet tail bound");

    // Retain indices 0..K-1; the omitted tail starting at K obeys the bound.
    AtomicMeasure acc = delta(1.0, static_cast<double>(scale_out));
    AtomicMeasure cur = delta(1.0, 1.0);
    for (std::size_t k = 1; k < K; ++k) {
        cur = convolve(cur, psi, budget);
        cur = scale(cur, 1.0 / static_cast<double>(k));
        acc = add(acc, scale(cur, static_cast<double>(scale_out)));
    }
    return acc;
}

inline AtomicMeasure normed_exp(const AtomicMeasure& psi,
                                double series_tail = 1e-12) {
    AtomBudget b;
    return normed_exp(psi, series_tail, b);
}

/// Verification grid of Mellin exponents: {0, 1, +-i, +-2i, 1+-i}.
inline const std::vector<std::complex<double>>& default_mellin_grid() {
    static const std::vector<std::complex<double>> grid = {
        {0.0, 0.0}, {1.0, 0.0},  {0.0, 1.0},  {0.0, -1.0},
        {0.0, 2.0}, {0.0, -2.0}, {1.0, 1.0},  {1.0, -1.0}};
    return grid;
}

/// Operational distance between measures: the largest Mellin-transform
/// discrepancy over a fixed exponent grid. Zero iff the measures agree on
/// the grid.
struct MeasureDistance {
    std::vector<std::complex<double>> grid;
    double value = 0.0;
};

inline MeasureDistance measure_distance(
    const AtomicMeasure& u, const AtomicMeasure& v,
    const std::vector<std::complex<double>>& grid = default_mellin_grid()) {
    MeasureDistance d;
    d.grid = grid;
    for (std::complex<double> s : grid)
        d.value = std::max(d.value, std::abs(mellin(u, s) - mellin(v, s)));
    return d;
}

inline bool approx_equal(const AtomicMeasure& u, const AtomicMeasure& v,
                         double tol) {
    return measure_distance(u, v).value <= tol;
}

}  // namespace polyspread
