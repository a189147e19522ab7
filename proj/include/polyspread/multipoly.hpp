#pragma once

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace polyspread {

/// Dense multivariate polynomial over complex coefficients, truncated to a
/// total degree cap. Products drop terms beyond the cap, which keeps every
/// coefficient of total degree <= cap exact.
class TruncPoly {
  public:
    TruncPoly(int nvars, int cap) : nvars_(nvars), cap_(cap) {
        if (nvars < 0 || cap < 0)
            throw std::invalid_argument("TruncPoly: bad shape");
        stride_.resize(nvars_);
        std::size_t n = 1;
        for (int v = 0; v < nvars_; ++v) {
            stride_[v] = n;
            n *= static_cast<std::size_t>(cap_ + 1);
        }
        c_.assign(n, {0.0, 0.0});
        totdeg_.assign(n, 0);
        for (std::size_t idx = 0; idx < n; ++idx) {
            std::size_t rest = idx;
            int d = 0;
            for (int v = 0; v < nvars_; ++v) {
                d += static_cast<int>(rest % (cap_ + 1));
                rest /= (cap_ + 1);
            }
            totdeg_[idx] = d;
        }
    }

    static TruncPoly one(int nvars, int cap) {
        TruncPoly p(nvars, cap);
        p.c_[0] = 1.0;
        return p;
    }

    int nvars() const { return nvars_; }
    int cap() const { return cap_; }

    std::size_t pack(const std::vector<int>& e) const {
        if (static_cast<int>(e.size()) != nvars_)
            throw std::invalid_argument("TruncPoly: exponent arity mismatch");
        std::size_t idx = 0;
        for (int v = 0; v < nvars_; ++v) {
            if (e[v] < 0 || e[v] > cap_)
                throw std::invalid_argument("TruncPoly: exponent out of range");
            idx += stride_[v] * static_cast<std::size_t>(e[v]);
        }
        return idx;
    }

    std::complex<double> coeff(const std::vector<int>& e) const {
        return c_[pack(e)];
    }

    void add_term(const std::vector<int>& e, std::complex<double> z) {
        const std::size_t idx = pack(e);
        if (totdeg_[idx] <= cap_) c_[idx] += z;
    }

    void scale_by(std::complex<double> z) {
        for (auto& x : c_) x *= z;
    }

    void add_in(const TruncPoly& o, std::complex<double> w = 1.0) {
        require_same_shape(o);
        for (std::size_t i = 0; i < c_.size(); ++i) c_[i] += w * o.c_[i];
    }

    /// this * (sum_v coeffs[v] z_v + constant), truncated.
    TruncPoly times_linear(const std::vector<std::complex<double>>& coeffs,
                           std::complex<double> constant) const {
        if (static_cast<int>(coeffs.size()) != nvars_)
            throw std::invalid_argument("TruncPoly: linear arity mismatch");
        TruncPoly out(nvars_, cap_);
        for (std::size_t idx = 0; idx < c_.size(); ++idx) {
            const std::complex<double> a = c_[idx];
            if (a == std::complex<double>(0.0, 0.0)) continue;
            if (totdeg_[idx] > cap_) continue;
            out.c_[idx] += a * constant;
            if (totdeg_[idx] == cap_) continue;
            std::size_t rest = idx;
            for (int v = 0; v < nvars_; ++v) {
                const int ev = static_cast<int>(rest % (cap_ + 1));
                rest /= (cap_ + 1);
                if (ev < cap_ && coeffs[v] != std::complex<double>(0.0, 0.0))
                    out.c_[idx + stride_[v]] += a * coeffs[v];
            }
        }
        return out;
    }

    TruncPoly times(const TruncPoly& o) const {
        require_same_shape(o);
        TruncPoly out(nvars_, cap_);
        const std::vector<std::size_t> nza = nonzero();
        const std::vector<std::size_t> nzb = o.nonzero();
        for (std::size_t ia : nza) {
            const std::complex<double> a = c_[ia];
            for (std::size_t ib : nzb) {
                if (totdeg_[ia] + o.totdeg_[ib] > cap_) continue;
                // Packed indices add without digit carries: every variable's
                // exponent sum stays within cap because the total does.
                out.c_[ia + ib] += a * o.c_[ib];
            }
        }
        return out;
    }

    template <typename Fn>
    void for_each_term(Fn&& fn) const {
        std::vector<int> e(nvars_, 0);
        for (std::size_t idx = 0; idx < c_.size(); ++idx) {
            if (c_[idx] == std::complex<double>(0.0, 0.0)) continue;
            if (totdeg_[idx] > cap_) continue;
            std::size_t rest = idx;
            for (int v = 0; v < nvars_; ++v) {
                e[v] = static_cast<int>(rest % (cap_ + 1));
                rest /= (cap_ + 1);
            }
            fn(e, c_[idx]);
        }
    }

  private:
    void require_same_shape(const TruncPoly& o) const {
        if (o.nvars_ != nvars_ || o.cap_ != cap_)
            throw std::invalid_argument("TruncPoly: shape mismatch");
    }
    std::vector<std::size_t> nonzero() const {
        std::vector<std::size_t> nz;
        for (std::size_t i = 0; i < c_.size(); ++i)
            if (c_[i] != std::complex<double>(0.0, 0.0) && totdeg_[i] <= cap_)
                nz.push_back(i);
        return nz;
    }

    int nvars_;
    int cap_;
    std::vector<std::size_t> stride_;
    std::vector<std::complex<double>> c_;
    std::vector<int> totdeg_;
};

}  // namespace polyspread
