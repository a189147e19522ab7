#pragma once

// Independent check of operator composition: applies one operator to the
// truncated power-series expansion of the other's action on a monomial and
// extracts low-degree coefficients. Exponential factors are truncated deep
// enough that the neglected terms sit far below the comparison tolerances.

#include <complex>
#include <map>
#include <vector>

#include "polyspread/mellin_oracle.hpp"
#include "polyspread/multipoly.hpp"

namespace testgen {

using polyspread::OperatorData;
using polyspread::TruncPoly;

/// Coefficient-of-z^r view of lhs(rhs(z^q)) truncated at total degree
/// out_cap: rhs acts on the monomial first. Exact up to the exponential
/// series depth `exp_terms`.
inline TruncPoly composed_action(const OperatorData& lhs, const OperatorData& rhs,
                                 const std::vector<int>& q, int out_cap,
                                 int exp_terms = 22) {
    const int n = static_cast<int>(lhs.cols());
    if (n > 3) throw std::invalid_argument("oracle supports up to 3 variables");
    int qdeg = 0;
    for (int x : q) qdeg += x;
    const int big_cap = qdeg + exp_terms;

    // rhs action on z^q as a series in intermediate variables y
    TruncPoly g = TruncPoly::one(n, big_cap);
    for (std::size_t j = 0; j < rhs.rows(); ++j)
        for (int rep = 0; rep < q[j]; ++rep)
            g = g.times_linear(rhs.a[j], rhs.b[j]);
    TruncPoly expq = TruncPoly::one(n, big_cap);
    TruncPoly term = TruncPoly::one(n, big_cap);
    for (int k = 1; k <= exp_terms; ++k) {
        term = term.times_linear(rhs.c, 0.0);
        term.scale_by(1.0 / static_cast<double>(k));
        expq.add_in(term);
    }
    g = g.times(expq);

    // substitute y_i = (lhs.a row i) . z + lhs.b[i], truncated at out_cap,
    // with memoized powers and two-variable buckets
    std::vector<std::vector<TruncPoly>> pow(n);
    for (int v = 0; v < n; ++v) {
        pow[v].reserve(big_cap + 1);
        pow[v].push_back(TruncPoly::one(n, out_cap));
        for (int k = 1; k <= big_cap; ++k)
            pow[v].push_back(pow[v].back().times_linear(lhs.a[v], lhs.b[v]));
    }

    std::map<std::pair<int, int>, TruncPoly> buckets;
    g.for_each_term([&](const std::vector<int>& e, std::complex<double> coeff) {
        const int e0 = n > 0 ? e[0] : 0;
        const int e1 = n > 1 ? e[1] : 0;
        const int e2 = n > 2 ? e[2] : 0;
        auto it = buckets.find({e0, e1});
        if (it == buckets.end())
            it = buckets.emplace(std::make_pair(e0, e1), TruncPoly(n, out_cap))
                     .first;
        if (n > 2)
            it->second.add_in(pow[2][e2], coeff);
        else
            it->second.add_in(TruncPoly::one(n, out_cap), coeff);
    });

    TruncPoly out(n, out_cap);
    for (const auto& [key, poly] : buckets) {
        TruncPoly prefix = n > 0 ? pow[0][key.first] : TruncPoly::one(n, out_cap);
        if (n > 1) prefix = prefix.times(pow[1][key.second]);
        out.add_in(prefix.times(poly));
    }

    // the outer exponential factor in z
    TruncPoly expo = TruncPoly::one(n, out_cap);
    TruncPoly t2 = TruncPoly::one(n, out_cap);
    for (int k = 1; k <= out_cap; ++k) {
        t2 = t2.times_linear(lhs.c, 0.0);
        t2.scale_by(1.0 / static_cast<double>(k));
        expo.add_in(t2);
    }
    out = out.times(expo);
    out.scale_by(lhs.prefactor * rhs.prefactor);
    return out;
}

}  // namespace testgen
