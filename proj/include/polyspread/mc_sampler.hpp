#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include "polyspread/bordered.hpp"
#include "polyspread/configuration.hpp"

namespace polyspread {

/// Stream identity: identical (seed, stream) reproduces identical samples.
struct RngStream {
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace detail

/// Deterministic generator with hand-rolled distributions, so sequences are
/// reproducible bit for bit for a fixed (seed, stream).
class SampleRng {
  public:
    explicit SampleRng(RngStream id) {
        std::uint64_t s = id.seed ^ (0x5851f42d4c957f2dULL * (id.stream + 1));
        const std::uint64_t w0 = detail::splitmix64(s);
        const std::uint64_t w1 = detail::splitmix64(s);
        const std::uint64_t w2 = detail::splitmix64(s);
        const std::uint64_t w3 = detail::splitmix64(s);
        std::seed_seq seq{static_cast<std::uint32_t>(w0), static_cast<std::uint32_t>(w0 >> 32),
                          static_cast<std::uint32_t>(w1), static_cast<std::uint32_t>(w1 >> 32),
                          static_cast<std::uint32_t>(w2), static_cast<std::uint32_t>(w2 >> 32),
                          static_cast<std::uint32_t>(w3), static_cast<std::uint32_t>(w3 >> 32)};
        gen_.seed(seq);
    }

    double uniform01() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    /// Poisson count by sequential inversion; adequate for moderate rates.
    int poisson(double lambda) {
        if (lambda < 0.0 || !std::isfinite(lambda))
            throw std::domain_error("Poisson rate must be a nonnegative real");
        if (lambda == 0.0) return 0;
        if (lambda > 700.0)
            throw std::domain_error("Poisson rate too large for inversion sampler");
        const double u = uniform01();
        double term = std::exp(-lambda), cdf = term;
        int k = 0;
        while (u > cdf && k < 100000) {
            ++k;
            term *= lambda / k;
            cdf += term;
        }
        return k;
    }

  private:
    std::mt19937_64 gen_;
};

/// One routed point-configuration draw: the sampled source configuration,
/// where its points (plus border immigrants) landed, and the accumulated
/// positive weight.
struct RoutingSample {
    Configuration source_config;
    Configuration target_config;
    double weight = 1.0;
};

namespace detail {

struct DiscreteAtoms {
    std::vector<double> cum;  // cumulative masses, unnormalized
    std::vector<double> pos;
    double total = 0.0;

    void build(const AtomicMeasure& m) {
        cum.clear();
        pos.clear();
        double acc = 0.0;
        for (const Atom& a : m.atoms()) {
            acc += a.mass;
            cum.push_back(acc);
            pos.push_back(a.position);
        }
        total = acc;
    }

    double draw(SampleRng& rng) const {
        if (pos.empty())
            throw std::logic_error("draw from an empty measure");
        const double u = rng.uniform01() * total;
        std::size_t lo = 0;
        while (lo + 1 < cum.size() && u > cum[lo]) ++lo;
        return pos[lo];
    }
};

}  // namespace detail

/// Precomputed routing tables for repeated sampling from one kernel.
/// Each source point emits a Poisson number of points; each point picks a
/// destination (target point or border) with probability proportional to the
/// block masses and multiplies the weight by a draw from the normalized
/// block. Immigrants arrive at each target point at the border-block rates,
/// the corner contributes pure weight factors, and the constant h enters
/// every sample once.
class RoutingSampler {
  public:
    explicit RoutingSampler(const VPolymorphism& p) : s_(p.rows()), t_(p.cols()) {
        check_shape(p);
        const MarginalReport rep = validate_v(p);
        if (!rep.accepted)
            throw std::invalid_argument("sampler requires a valid kernel");
        mu_ = p.source.finite_masses;
        row_choice_.resize(s_);
        row_atoms_.resize(s_);
        for (std::size_t i = 0; i < s_; ++i) {
            row_atoms_[i].resize(t_ + 1);
            std::vector<double> cum;
            double acc = 0.0;
            for (std::size_t j = 0; j < t_; ++j) {
                acc += p.fin_fin[i][j].total_mass();
                cum.push_back(acc);
                row_atoms_[i][j].build(p.fin_fin[i][j]);
            }
            acc += p.fin_inf[i].total_mass();
            cum.push_back(acc);
            row_atoms_[i][t_].build(p.fin_inf[i]);
            row_choice_[i] = std::move(cum);
        }
        immigrant_rate_.resize(t_);
        immigrant_atoms_.resize(t_);
        for (std::size_t j = 0; j < t_; ++j) {
            immigrant_rate_[j] = p.inf_fin[j].total_mass();
            immigrant_atoms_[j].build(p.inf_fin[j]);
        }
        corner_rate_ = p.inf_inf.total_mass();
        corner_atoms_.build(p.inf_inf);

        detail::KahanSum dev;
        for (std::size_t i = 0; i < s_; ++i) {
            for (std::size_t j = 0; j < t_; ++j)
                dev.add(p.fin_fin[i][j].first_moment() -
                        p.fin_fin[i][j].total_mass());
            dev.add(p.fin_inf[i].first_moment() - p.fin_inf[i].total_mass());
        }
        for (std::size_t j = 0; j < t_; ++j)
            dev.add(p.inf_fin[j].first_moment() - p.inf_fin[j].total_mass());
        dev.add(p.inf_inf.first_moment() - p.inf_inf.total_mass());
        h_ = std::exp(-dev.value());
    }

    double shift_constant() const { return h_; }

    RoutingSample draw(SampleRng& rng) const {
        RoutingSample out;
        out.source_config.multiplicities.assign(s_, 0);
        out.target_config.multiplicities.assign(t_, 0);
        out.weight = h_;
        for (std::size_t i = 0; i < s_; ++i) {
            const int n = rng.poisson(mu_[i]);
            out.source_config.multiplicities[i] = n;
            for (int k = 0; k < n; ++k) {
                const double u = rng.uniform01() * row_choice_[i].back();
                std::size_t choice = 0;
                while (choice + 1 < row_choice_[i].size() &&
                       u > row_choice_[i][choice])
                    ++choice;
                out.weight *= row_atoms_[i][choice].draw(rng);
                if (choice < t_) ++out.target_config.multiplicities[choice];
            }
        }
        for (std::size_t j = 0; j < t_; ++j) {
            const int k = rng.poisson(immigrant_rate_[j]);
            out.target_config.multiplicities[j] += k;
            for (int r = 0; r < k; ++r)
                out.weight *= immigrant_atoms_[j].draw(rng);
        }
        const int k = rng.poisson(corner_rate_);
        for (int r = 0; r < k; ++r) out.weight *= corner_atoms_.draw(rng);
        return out;
    }

  private:
    std::size_t s_, t_;
    std::vector<double> mu_;
    std::vector<std::vector<double>> row_choice_;            // [i] cumulative
    std::vector<std::vector<detail::DiscreteAtoms>> row_atoms_;  // [i][choice]
    std::vector<double> immigrant_rate_;
    std::vector<detail::DiscreteAtoms> immigrant_atoms_;
    double corner_rate_ = 0.0;
    detail::DiscreteAtoms corner_atoms_;
    double h_ = 1.0;
};

inline RoutingSample sample_routing(const VPolymorphism& p, SampleRng& rng) {
    return RoutingSampler(p).draw(rng);
}

/// Logarithmically spaced weight bins on [lo, hi), with an underflow bin
/// below lo and an overflow bin from hi.
struct WeightBins {
    double lo = 0.125;
    double hi = 8.0;
    std::size_t count = 16;

    std::size_t total_bins() const { return count + 2; }

    std::size_t index(double w) const {
        if (w < lo) return 0;
        if (w >= hi) return count + 1;
        const double f = std::log(w / lo) / std::log(hi / lo);
        std::size_t k = static_cast<std::size_t>(f * count);
        if (k >= count) k = count - 1;
        return k + 1;
    }

    std::pair<double, double> edges(std::size_t bin) const {
        if (bin == 0) return {0.0, lo};
        if (bin >= count + 1)
            return {hi, std::numeric_limits<double>::infinity()};
        const double step = std::log(hi / lo) / count;
        return {lo * std::exp(step * (bin - 1)), lo * std::exp(step * bin)};
    }
};

inline void check_bins(const WeightBins& b) {
    if (b.count == 0) throw std::invalid_argument("bin count must be >= 1");
    if (!(b.lo > 0.0) || !(b.hi > b.lo) || !std::isfinite(b.hi))
        throw std::invalid_argument("bin range must satisfy 0 < lo < hi");
}

/// Empirical binned measure for one (phi, psi) cell, normalized by the total
/// sample count, with per-bin binomial standard errors.
struct BinnedMeasure {
    WeightBins bins;
    std::vector<double> mass;
    std::vector<double> stderrs;
    std::size_t matching = 0;
    std::size_t total = 0;
};

inline BinnedMeasure empirical_entry(const std::vector<RoutingSample>& samples,
                                     const Configuration& phi,
                                     const Configuration& psi,
                                     const WeightBins& bins) {
    check_bins(bins);
    if (samples.empty()) throw std::invalid_argument("need at least one sample");
    BinnedMeasure out;
    out.bins = bins;
    out.mass.assign(bins.total_bins(), 0.0);
    out.stderrs.assign(bins.total_bins(), 0.0);
    out.total = samples.size();
    std::vector<std::size_t> counts(bins.total_bins(), 0);
    for (const RoutingSample& s : samples) {
        if (!(s.source_config == phi) || !(s.target_config == psi)) continue;
        ++out.matching;
        ++counts[bins.index(s.weight)];
    }
    const double n = static_cast<double>(out.total);
    for (std::size_t k = 0; k < counts.size(); ++k) {
        const double m = static_cast<double>(counts[k]) / n;
        out.mass[k] = m;
        out.stderrs[k] = std::sqrt(std::max(m * (1.0 - m), 0.0) / n);
    }
    return out;
}

/// Masses of an atomic measure grouped into the same bins.
inline std::vector<double> analytic_bin_masses(const AtomicMeasure& m,
                                               const WeightBins& bins) {
    check_bins(bins);
    std::vector<double> out(bins.total_bins(), 0.0);
    for (const Atom& a : m.atoms()) out[bins.index(a.position)] += a.mass;
    return out;
}

}  // namespace polyspread
