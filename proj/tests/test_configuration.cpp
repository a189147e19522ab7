#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "polyspread/configuration.hpp"

using namespace polyspread;
using Catch::Approx;

TEST_CASE("poisson_mass point values") {
    const BorderedSpace one{{1.0}};
    REQUIRE(poisson_mass(one, {{0}}) == Approx(std::exp(-1.0)));
    REQUIRE(poisson_mass(one, {{2}}) == Approx(std::exp(-1.0) / 2.0));
    const BorderedSpace none{};
    REQUIRE(poisson_mass(none, Configuration{}) == 1.0);
    REQUIRE_THROWS_AS(poisson_mass(one, {{0, 1}}), std::invalid_argument);
    REQUIRE_THROWS_AS(poisson_mass(one, {{-1}}), std::invalid_argument);
}

TEST_CASE("poisson masses sum to one over a wide box") {
    const BorderedSpace sp{{0.4, 1.3}};
    double total = 0.0;
    for (int a = 0; a < 40; ++a)
        for (int b = 0; b < 40; ++b) total += poisson_mass(sp, {{a, b}});
    REQUIRE(total == Approx(1.0).epsilon(1e-12));
}

TEST_CASE("enumerate_configs covers the box or reports the tail") {
    const BorderedSpace sp{{0.1}};
    // exact tail at rate 0.1 beyond multiplicity 3: 3.84683392534506e-06
    TruncationPolicy ok{3, 1e-5, 1e-9};
    const auto configs = enumerate_configs(sp, ok);
    REQUIRE(configs.size() == 4);
    double mass = 0.0;
    for (const Configuration& c : configs) mass += poisson_mass(sp, c);
    REQUIRE(1.0 - mass == Approx(3.84683392534506e-06).epsilon(1e-9));

    TruncationPolicy too_tight{3, 1e-6, 1e-9};
    REQUIRE_THROWS_AS(enumerate_configs(sp, too_tight), TruncationError);
}

TEST_CASE("enumerate_configs on the empty space") {
    const BorderedSpace none{};
    TruncationPolicy p{3, 1e-6, 1e-9};
    const auto configs = enumerate_configs(none, p);
    REQUIRE(configs.size() == 1);
    REQUIRE(configs[0].size() == 0);
    REQUIRE(poisson_mass(none, configs[0]) == 1.0);
}

TEST_CASE("enumerate_configs rejects an insufficient cap") {
    const BorderedSpace sp{{1.0, 1.0}};
    // box mass at cap 1 is (2/e)^2 = 0.5413, far short of tail 0.1
    TruncationPolicy p{1, 0.1, 1e-9};
    REQUIRE_THROWS_AS(enumerate_configs(sp, p), TruncationError);
    TruncationPolicy loose{1, 0.5, 1e-9};
    REQUIRE(enumerate_configs(sp, loose).size() == 4);
    REQUIRE(config_box_mass(sp, 1) == Approx(0.54134113294645077));
}

TEST_CASE("enumeration order is lexicographic with the last index fastest") {
    const BorderedSpace sp{{0.2, 0.2}};
    TruncationPolicy p{1, 0.9, 1e-9};
    const auto configs = enumerate_configs(sp, p);
    REQUIRE(configs.size() == 4);
    REQUIRE(configs[0].multiplicities == std::vector<int>{0, 0});
    REQUIRE(configs[1].multiplicities == std::vector<int>{0, 1});
    REQUIRE(configs[2].multiplicities == std::vector<int>{1, 0});
    REQUIRE(configs[3].multiplicities == std::vector<int>{1, 1});
}

TEST_CASE("policy validation") {
    REQUIRE_THROWS_AS(check_policy({21, 1e-6, 1e-9}), std::invalid_argument);
    REQUIRE_THROWS_AS(check_policy({-1, 1e-6, 1e-9}), std::invalid_argument);
    REQUIRE_THROWS_AS(check_policy({5, 0.0, 1e-9}), std::invalid_argument);
    REQUIRE_THROWS_AS(check_policy({5, 1e-6, 0.0}), std::invalid_argument);
    REQUIRE_THROWS_AS(check_policy({5, 1e-6, 1e-9, 0}), std::invalid_argument);
    REQUIRE_NOTHROW(check_policy({20, 1e-6, 1e-9}));
}

TEST_CASE("coarsen_config sums groups and pushes Poisson to Poisson") {
    const Configuration c{{2, 0, 3}};
    REQUIRE(coarsen_config(c, Partition::singletons(3)).multiplicities ==
            c.multiplicities);
    REQUIRE(coarsen_config(c, Partition::all_in_one(3)).multiplicities ==
            std::vector<int>{5});

    // superposition: grouping two unit-rate points gives rate two
    const BorderedSpace fine{{1.0, 1.0}};
    const BorderedSpace coarse{{2.0}};
    for (int n = 0; n < 8; ++n) {
        double pushed = 0.0;
        for (int a = 0; a <= n; ++a) pushed += poisson_mass(fine, {{a, n - a}});
        REQUIRE(pushed == Approx(poisson_mass(coarse, {{n}})));
    }
}

TEST_CASE("exact factorials up to the cap") {
    REQUIRE(factorial_u64(0) == 1);
    REQUIRE(factorial_u64(5) == 120);
    REQUIRE(factorial_u64(20) == 2432902008176640000ULL);
    REQUIRE_THROWS_AS(factorial_u64(21), std::invalid_argument);
}
