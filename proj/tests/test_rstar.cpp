#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>

#include "polyspread/rstar_polymorphism.hpp"
#include "support/generators.hpp"

using namespace polyspread;
using testgen::Rng;
using Catch::Approx;

namespace {

AtomicMeasure m(std::initializer_list<Atom> atoms) {
    return canonicalize(std::vector<Atom>(atoms));
}

double entry_distance(const RStarPolymorphism& a, const RStarPolymorphism& b) {
    REQUIRE(a.rows() == b.rows());
    REQUIRE(a.cols() == b.cols());
    double d = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j)
            d = std::max(d,
                         measure_distance(a.entries[i][j], b.entries[i][j]).value);
    return d;
}

RStarPolymorphism two_by_two_example() {
    RStarPolymorphism p;
    p.source.masses = {0.5, 0.5};
    p.target.masses = {0.5, 0.5};
    p.entries = {{m({{2, 1.0 / 8}}), m({{2.0 / 3, 3.0 / 8}})},
                 {m({{2.0 / 3, 3.0 / 8}}), m({{2, 1.0 / 8}})}};
    return p;
}

}  // namespace

TEST_CASE("validate accepts the canonical instances") {
    const FiniteSpace space{{0.25, 0.75}};
    const MarginalReport id_rep = validate(identity_polymorphism(space));
    REQUIRE(id_rep.max_row_residual == 0.0);
    REQUIRE(id_rep.max_col_residual == 0.0);
    REQUIRE(id_rep.accepted);

    const FiniteSpace a{{0.3, 0.7}}, b{{0.2, 0.3, 0.5}};
    const MarginalReport u_rep = validate(uniform_spreading(a, b));
    REQUIRE(u_rep.max_row_residual <= 1e-15);
    REQUIRE(u_rep.max_col_residual <= 1e-15);

    REQUIRE(validate(two_by_two_example()).accepted);
}

TEST_CASE("validate reports residuals and rejects bad shapes") {
    RStarPolymorphism p = two_by_two_example();
    p.source.masses[0] = 0.6;  // break the first row by 0.1
    const MarginalReport rep = validate(p);
    REQUIRE_FALSE(rep.accepted);
    REQUIRE(rep.max_row_residual == Approx(0.1));

    p.entries[0].pop_back();
    REQUIRE_THROWS_AS(validate(p), std::invalid_argument);
}

TEST_CASE("compose with the identity is the identity") {
    Rng rng(42);
    const FiniteSpace src = testgen::random_space(rng, 3);
    const RStarPolymorphism p = testgen::random_rstar(rng, src, 2);
    REQUIRE(validate(p).accepted);
    REQUIRE(entry_distance(compose(identity_polymorphism(p.target), p), p) <=
            1e-12);
    REQUIRE(entry_distance(compose(p, identity_polymorphism(p.source)), p) <=
            1e-12);
}

TEST_CASE("single-point composition is plain convolution") {
    RStarPolymorphism p, q;
    p.source.masses = {1.0};
    p.target.masses = {1.0};
    p.entries = {{m({{2, 0.4}, {0.5, 0.6}})}};
    q = p;
    q.entries = {{m({{3, 0.7}, {0.25, 0.3}})}};
    const RStarPolymorphism r = compose(q, p);
    REQUIRE(measure_distance(r.entries[0][0],
                             convolve(p.entries[0][0], q.entries[0][0]))
                .value <= 1e-14);
}

TEST_CASE("hand-expanded 2x2 square") {
    const RStarPolymorphism p = two_by_two_example();
    const RStarPolymorphism r = compose(p, p);
    REQUIRE(measure_distance(r.entries[0][0], m({{4, 1.0 / 32}, {4.0 / 9, 9.0 / 32}}))
                .value <= 1e-15);
    REQUIRE(measure_distance(r.entries[0][1], m({{4.0 / 3, 3.0 / 16}})).value <=
            1e-15);
    REQUIRE(measure_distance(r.entries[1][0], m({{4.0 / 3, 3.0 / 16}})).value <=
            1e-15);
    REQUIRE(measure_distance(r.entries[1][1], m({{4, 1.0 / 32}, {4.0 / 9, 9.0 / 32}}))
                .value <= 1e-15);
    REQUIRE(validate(r).accepted);
}

TEST_CASE("composition is associative and preserves the marginal laws") {
    Rng rng(4242);
    for (int trial = 0; trial < 40; ++trial) {
        const FiniteSpace a = testgen::random_space(rng, 4);
        const RStarPolymorphism p =
            testgen::random_rstar(rng, a, 1 + rng.uint_below(4));
        const RStarPolymorphism q =
            testgen::random_rstar(rng, p.target, 1 + rng.uint_below(4));
        const RStarPolymorphism r =
            testgen::random_rstar(rng, q.target, 1 + rng.uint_below(4));
        const RStarPolymorphism left = compose(r, compose(q, p));
        const RStarPolymorphism right = compose(compose(r, q), p);
        REQUIRE(entry_distance(left, right) <= 1e-9);
        REQUIRE(validate(left, 1e-9).accepted);
    }
}

TEST_CASE("kernels supported at position one degenerate to weighted matrix product") {
    Rng rng(9);
    const FiniteSpace a = testgen::random_space(rng, 3);
    auto classical = [&](const FiniteSpace& src, int tgt) {
        RStarPolymorphism p = testgen::random_rstar(rng, src, tgt);
        for (auto& row : p.entries)
            for (auto& e : row)
                if (!e.empty()) e = delta(1.0, e.total_mass());
        // rebuild the derived target masses after flattening positions
        for (std::size_t j = 0; j < p.cols(); ++j) {
            double fm = 0.0;
            for (std::size_t i = 0; i < p.rows(); ++i)
                fm += p.entries[i][j].first_moment();
            p.target.masses[j] = fm;
        }
        return p;
    };
    const RStarPolymorphism p = classical(a, 3);
    const RStarPolymorphism q = classical(p.target, 2);
    const RStarPolymorphism r = compose(q, p);
    for (std::size_t i = 0; i < r.rows(); ++i)
        for (std::size_t k = 0; k < r.cols(); ++k) {
            if (r.entries[i][k].empty()) continue;
            REQUIRE(r.entries[i][k].size() == 1);
            REQUIRE(r.entries[i][k].atoms()[0].position == 1.0);
            double expect = 0.0;
            for (std::size_t j = 0; j < p.cols(); ++j)
                expect += p.entries[i][j].total_mass() *
                          q.entries[j][k].total_mass() / p.target.masses[j];
            REQUIRE(r.entries[i][k].total_mass() == Approx(expect));
        }
}

TEST_CASE("coarsen: trivial partitions and the full collapse") {
    Rng rng(77);
    const FiniteSpace a = testgen::random_space(rng, 3);
    const RStarPolymorphism p = testgen::random_rstar(rng, a, 3);

    const RStarPolymorphism same = coarsen(p, Partition::singletons(p.rows()),
                                           Partition::singletons(p.cols()));
    REQUIRE(entry_distance(same, p) == 0.0);

    const RStarPolymorphism all = coarsen(p, Partition::all_in_one(p.rows()),
                                          Partition::all_in_one(p.cols()));
    REQUIRE(all.rows() == 1);
    REQUIRE(all.cols() == 1);
    AtomicMeasure total;
    for (const auto& row : p.entries)
        for (const AtomicMeasure& e : row) total = add(total, e);
    REQUIRE(measure_distance(all.entries[0][0], total).value == 0.0);
    REQUIRE(validate(all).accepted);
}

TEST_CASE("lift of the unit kernel is the uniform spreading") {
    FiniteSpace fine_src{{0.25, 0.3, 0.45}}, fine_tgt{{0.5, 0.5}};
    RStarPolymorphism unit;
    unit.source.masses = {1.0};
    unit.target.masses = {1.0};
    unit.entries = {{delta(1.0, 1.0)}};
    const RStarPolymorphism lifted =
        lift(unit, Partition::all_in_one(3), Partition::all_in_one(2), fine_src,
             fine_tgt);
    REQUIRE(entry_distance(lifted, uniform_spreading(fine_src, fine_tgt)) <=
            1e-15);
}

TEST_CASE("coarsening a lift restores the quotient kernel") {
    Rng rng(123);
    for (int trial = 0; trial < 30; ++trial) {
        const FiniteSpace qsrc = testgen::random_space(rng, 2);
        const RStarPolymorphism r = testgen::random_rstar(rng, qsrc, 2);

        std::vector<std::size_t> sgroups, tgroups;
        FiniteSpace fine_src, fine_tgt;
        for (std::size_t g = 0; g < r.rows(); ++g) {
            const int parts = 1 + rng.uint_below(3);
            std::vector<double> w(parts);
            double tot = 0.0;
            for (double& x : w) tot += (x = rng.uni(0.2, 1.0));
            for (double x : w) {
                fine_src.masses.push_back(r.source.masses[g] * x / tot);
                sgroups.push_back(g);
            }
        }
        for (std::size_t g = 0; g < r.cols(); ++g) {
            const int parts = 1 + rng.uint_below(3);
            std::vector<double> w(parts);
            double tot = 0.0;
            for (double& x : w) tot += (x = rng.uni(0.2, 1.0));
            for (double x : w) {
                fine_tgt.masses.push_back(r.target.masses[g] * x / tot);
                tgroups.push_back(g);
            }
        }
        const Partition s = make_partition(sgroups);
        const Partition t = make_partition(tgroups);
        const RStarPolymorphism round =
            coarsen(lift(r, s, t, fine_src, fine_tgt), s, t);

        for (std::size_t i = 0; i < r.rows(); ++i)
            for (std::size_t j = 0; j < r.cols(); ++j) {
                const auto& got = round.entries[i][j].atoms();
                const auto& want = r.entries[i][j].atoms();
                REQUIRE(got.size() == want.size());
                for (std::size_t k = 0; k < got.size(); ++k) {
                    REQUIRE(got[k].position == want[k].position);
                    REQUIRE(got[k].mass ==
                            Approx(want[k].mass).epsilon(1e-12).margin(1e-15));
                }
            }
    }
}

TEST_CASE("t_operator on the identity and at exponent zero") {
    const FiniteSpace space{{0.25, 0.75}};
    const ComplexMatrix id =
        t_operator(identity_polymorphism(space), {0.5, 0.3});
    REQUIRE(std::abs(id[0][0] - std::complex<double>(0.25)) <= 1e-15);
    REQUIRE(std::abs(id[1][1] - std::complex<double>(0.75)) <= 1e-15);
    REQUIRE(std::abs(id[0][1]) == 0.0);

    Rng rng(55);
    const RStarPolymorphism p =
        testgen::random_rstar(rng, testgen::random_space(rng, 3), 3);
    const ComplexMatrix masses = t_operator(p, 0.0);
    for (std::size_t i = 0; i < p.rows(); ++i) {
        std::complex<double> row_sum = 0.0;
        for (std::size_t j = 0; j < p.cols(); ++j) row_sum += masses[i][j];
        REQUIRE(std::abs(row_sum - p.source.masses[i]) <= 1e-12);
    }

    REQUIRE_THROWS_AS(t_operator(p, {-0.1, 0.0}), std::domain_error);
    REQUIRE_THROWS_AS(t_operator(p, {1.1, 0.0}), std::domain_error);
}

TEST_CASE("t_operator turns composition into the weighted matrix product") {
    Rng rng(321);
    for (int trial = 0; trial < 30; ++trial) {
        const FiniteSpace a = testgen::random_space(rng, 3);
        const RStarPolymorphism p = testgen::random_rstar(rng, a, 2);
        const RStarPolymorphism q = testgen::random_rstar(rng, p.target, 3);
        const RStarPolymorphism r = compose(q, p);
        const std::complex<double> w = testgen::random_strip_exponent(rng);
        const ComplexMatrix tp = t_operator(p, w), tq = t_operator(q, w),
                            tr = t_operator(r, w);
        for (std::size_t i = 0; i < r.rows(); ++i)
            for (std::size_t k = 0; k < r.cols(); ++k) {
                std::complex<double> expect = 0.0;
                for (std::size_t j = 0; j < p.cols(); ++j)
                    expect += tp[i][j] * tq[j][k] / p.target.masses[j];
                REQUIRE(std::abs(tr[i][k] - expect) <= 1e-10);
            }
    }
}

TEST_CASE("power_rescaled") {
    RStarPolymorphism p;
    p.source.masses = {1.0};
    p.target.masses = {1.0};
    const double e = std::exp(1.0);
    p.entries = {{delta(e, 1.0)}};

    const RStarPolymorphism same = power_rescaled(p, 1, 1.0);
    REQUIRE(measure_distance(same.entries[0][0], p.entries[0][0]).value == 0.0);

    const RStarPolymorphism cubed = power_rescaled(p, 3, 1.0);
    REQUIRE(cubed.entries[0][0].size() == 1);
    REQUIRE(cubed.entries[0][0].atoms()[0].position == Approx(e * e * e));
    REQUIRE(cubed.entries[0][0].atoms()[0].mass == Approx(1.0));

    REQUIRE_THROWS_AS(power_rescaled(p, 2, 0.0), std::domain_error);
    REQUIRE_THROWS_AS(power_rescaled(p, 0, 1.0), std::invalid_argument);
}

TEST_CASE("rescaling commutes with composition") {
    Rng rng(888);
    for (int trial = 0; trial < 20; ++trial) {
        const FiniteSpace a = testgen::random_space(rng, 3);
        const RStarPolymorphism p = testgen::random_rstar(rng, a, 2);
        const RStarPolymorphism q = testgen::random_rstar(rng, p.target, 2);
        const double alpha =
            rng.chance(0.5) ? rng.uni(0.4, 2.0) : -rng.uni(0.4, 2.0);
        RStarPolymorphism lhs = compose(q, p);
        for (auto& row : lhs.entries)
            for (auto& e : row) e = rescale_exponent(e, alpha);
        RStarPolymorphism pr = p, qr = q;
        for (auto& row : pr.entries)
            for (auto& e : row) e = rescale_exponent(e, alpha);
        for (auto& row : qr.entries)
            for (auto& e : row) e = rescale_exponent(e, alpha);
        const RStarPolymorphism rhs = compose(qr, pr);
        REQUIRE(entry_distance(lhs, rhs) <= 1e-9);
    }
}
