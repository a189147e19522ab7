#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <vector>

#include "polyspread/mellin_oracle.hpp"
#include "polyspread/omega.hpp"
#include "support/generators.hpp"
#include "support/operator_oracle.hpp"

using namespace polyspread;
using testgen::Rng;
using Catch::Approx;

namespace {

std::vector<std::vector<int>> multi_indices(int n, int max_total) {
    std::vector<std::vector<int>> out;
    std::vector<int> cur(n, 0);
    auto walk = [&](auto&& self, int pos, int left) -> void {
        if (pos == n) {
            out.push_back(cur);
            return;
        }
        for (int k = 0; k <= left; ++k) {
            cur[pos] = k;
            self(self, pos + 1, left - k);
        }
        cur[pos] = 0;
    };
    walk(walk, 0, max_total);
    return out;
}

VPolymorphism tiny_vpoly(Rng& rng, int src_points, int tgt_points) {
    BorderedSpace src;
    for (int i = 0; i < src_points; ++i)
        src.finite_masses.push_back(rng.uni(0.1, 0.4));
    testgen::VKernelOptions opt;
    opt.max_block_atoms = 2;
    opt.pos_lo = 0.6;
    opt.pos_hi = 1.6;
    opt.border_rate = 0.2;
    opt.corner_rate = 0.15;
    return testgen::random_vpoly(rng, src, tgt_points, opt);
}

}  // namespace

TEST_CASE("matrix elements of the identity operator") {
    OperatorData id;
    id.a = {{1.0, 0.0}, {0.0, 1.0}};
    id.b = {0.0, 0.0};
    id.c = {0.0, 0.0};
    for (const auto& p : multi_indices(2, 3))
        for (const auto& q : multi_indices(2, 3)) {
            const std::complex<double> e = u_matrix_element(id, p, q, 4);
            if (p == q)
                REQUIRE(std::abs(e - 1.0) <= 1e-15);
            else
                REQUIRE(std::abs(e) <= 1e-15);
        }
}

TEST_CASE("one-variable scaling operator") {
    OperatorData sc;
    const std::complex<double> a(0.6, 0.2);
    sc.a = {{a}};
    sc.b = {0.0};
    sc.c = {0.0};
    for (int p = 0; p <= 4; ++p)
        for (int q = 0; q <= 4; ++q) {
            const std::complex<double> e = u_matrix_element(sc, {p}, {q}, 4);
            if (p == q)
                REQUIRE(std::abs(e - std::pow(a, q)) <= 1e-14);
            else
                REQUIRE(std::abs(e) <= 1e-15);
        }
}

TEST_CASE("matrix elements reject out-of-range indices") {
    OperatorData id;
    id.a = {{1.0}};
    id.b = {0.0};
    id.c = {0.0};
    REQUIRE_THROWS_AS(u_matrix_element(id, {5}, {0}, 4), std::invalid_argument);
    REQUIRE_THROWS_AS(u_matrix_element(id, {0}, {-1}, 4), std::invalid_argument);
    REQUIRE_THROWS_AS(u_matrix_element(id, {0, 0}, {0}, 4), std::invalid_argument);
}

TEST_CASE("operator product matches the expanded composition") {
    Rng rng(2718);
    for (int trial = 0; trial < 12; ++trial) {
        const int n = 1 + rng.uint_below(3);
        const OperatorData u1 = testgen::random_operator(rng, n);
        const OperatorData u2 = testgen::random_operator(rng, n);
        const OperatorData prod = operator_product(u1, u2);
        for (int rep = 0; rep < 3; ++rep) {
            std::vector<int> q(n, 0);
            int left = 4;
            for (int v = 0; v < n; ++v) {
                q[v] = rng.uint_below(left + 1);
                left -= q[v];
            }
            const TruncPoly direct = testgen::composed_action(u1, u2, q, 4);
            for (const auto& r : multi_indices(n, 4)) {
                const std::complex<double> lhs = direct.coeff(r);
                const std::complex<double> rhs = u_matrix_element(prod, r, q, 4);
                REQUIRE(std::abs(lhs - rhs) <= 1e-10 * (1.0 + std::abs(rhs)));
            }
        }
    }
}

TEST_CASE("shadow of a kernel without border blocks at exponent zero") {
    Rng rng(13);
    BorderedSpace a{{0.4, 0.7}};
    const VPolymorphism p =
        testgen::random_vpoly(rng, a, 2, {2, 0.5, 2.0, 0.0, 0.0, 0.0});
    const OperatorData op = shadow_of_v(p, 0.0);
    for (std::size_t i = 0; i < p.rows(); ++i)
        for (std::size_t j = 0; j < p.cols(); ++j)
            REQUIRE(std::abs(op.a[j][i] - p.fin_fin[i][j].total_mass()) <=
                    1e-14);
    for (const auto& x : op.b) REQUIRE(std::abs(x) == 0.0);
    for (const auto& x : op.c) REQUIRE(std::abs(x) == 0.0);

    REQUIRE_THROWS_AS(shadow_of_v(p, {1.5, 0.0}), std::domain_error);
}

TEST_CASE("shadow of a pure-border kernel is a bare prefactor") {
    VPolymorphism p;
    p.inf_inf = canonicalize({{2.0, 0.3}});
    const std::complex<double> s(0.5, 0.8);
    const OperatorData op = shadow_of_v(p, s);
    REQUIRE(op.rows() == 0);
    REQUIRE(op.cols() == 0);
    // C = 1, h = exp(-(fm - mass)), prefactor = h^s exp(mellin - mass)
    const double h = std::exp(-(p.inf_inf.first_moment() - p.inf_inf.total_mass()));
    const std::complex<double> expect =
        std::pow(std::complex<double>(h), s) *
        std::exp(mellin(p.inf_inf, s) - p.inf_inf.total_mass());
    REQUIRE(std::abs(op.prefactor - expect) <= 1e-14);
}

TEST_CASE("shadow calibration: matrix elements reproduce functor entries") {
    Rng rng(37);
    TruncationPolicy policy{4, 0.9, 1e-12};
    for (int trial = 0; trial < 4; ++trial) {
        const int s_pts = 1 + rng.uint_below(2);
        const int t_pts = 1 + rng.uint_below(2);
        const VPolymorphism p = tiny_vpoly(rng, s_pts, t_pts);
        const OmegaPrefactor pref = omega_prefactor(p, policy);
        for (const std::complex<double> s :
             {std::complex<double>(0.0, 0.9), std::complex<double>(1.0, -0.6),
              std::complex<double>(0.4, 0.3)}) {
            const OperatorData shadow = shadow_of_v(p, s);
            for (const auto& phi : multi_indices(s_pts, 3))
                for (const auto& psi : multi_indices(t_pts, 3)) {
                    Configuration cphi{phi}, cpsi{psi};
                    const std::complex<double> via_omega =
                        mellin(omega_entry(p, cphi, cpsi, policy, pref), s);
                    const std::complex<double> via_shadow =
                        u_matrix_element(shadow, phi, psi, 3) /
                        target_factorial_norm(psi);
                    REQUIRE(std::abs(via_omega - via_shadow) <=
                            1e-9 * (1.0 + std::abs(via_shadow)));
                }
        }
    }
}

TEST_CASE("shadows compose by the operator law") {
    Rng rng(41);
    for (int trial = 0; trial < 6; ++trial) {
        const VPolymorphism p = tiny_vpoly(rng, 1 + rng.uint_below(2), 2);
        const VPolymorphism q = testgen::random_vpoly(
            rng, p.target, 1 + rng.uint_below(2), {2, 0.6, 1.6, 0.2, 0.15, 0.5});
        const std::complex<double> s(rng.uni(0.0, 1.0), rng.uni(-1.0, 1.0));
        const OperatorData direct = shadow_of_v(compose_v(q, p), s);
        const OperatorData composed = compose_shadows(
            shadow_of_v(q, s), shadow_of_v(p, s), p.target.finite_masses);
        REQUIRE(direct.rows() == composed.rows());
        REQUIRE(direct.cols() == composed.cols());
        for (std::size_t i = 0; i < direct.rows(); ++i)
            for (std::size_t j = 0; j < direct.cols(); ++j)
                REQUIRE(std::abs(direct.a[i][j] - composed.a[i][j]) <= 1e-12);
        for (std::size_t i = 0; i < direct.rows(); ++i)
            REQUIRE(std::abs(direct.b[i] - composed.b[i]) <= 1e-12);
        for (std::size_t j = 0; j < direct.cols(); ++j)
            REQUIRE(std::abs(direct.c[j] - composed.c[j]) <= 1e-12);
        REQUIRE(std::abs(direct.prefactor - composed.prefactor) <=
                1e-12 * (1.0 + std::abs(direct.prefactor)));
    }
}

TEST_CASE("grid plus random strip exponents separate the measures we generate") {
    Rng rng(43);
    int coincidences = 0;
    for (int trial = 0; trial < 400; ++trial) {
        const AtomicMeasure u = testgen::random_measure(rng);
        AtomicMeasure v;
        if (rng.chance(0.25)) {
            // same atoms assembled in a different order
            std::vector<Atom> shuffled = u.atoms();
            for (std::size_t k = shuffled.size(); k > 1; --k)
                std::swap(shuffled[k - 1], shuffled[rng.uint_below(static_cast<int>(k))]);
            v = canonicalize(shuffled);
        } else {
            v = testgen::random_measure(rng);
        }
        double dist = measure_distance(u, v).value;
        for (int e = 0; e < 8; ++e) {
            const std::complex<double> s = testgen::random_strip_exponent(rng);
            dist = std::max(dist, std::abs(mellin(u, s) - mellin(v, s)));
        }
        if (dist <= 1e-12) {
            ++coincidences;
            REQUIRE(u.size() == v.size());
            for (std::size_t k = 0; k < u.size(); ++k) {
                REQUIRE(u.atoms()[k].position ==
                        Approx(v.atoms()[k].position).epsilon(1e-12));
                REQUIRE(u.atoms()[k].mass ==
                        Approx(v.atoms()[k].mass).epsilon(1e-12));
            }
        }
    }
    REQUIRE(coincidences > 50);  // the equal-pairs branch must actually fire
}
