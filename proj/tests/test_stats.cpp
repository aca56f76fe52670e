#include "botlab/stats.hpp"

#include "oracles.hpp"
#include "botlab/rng.hpp"

#include <doctest.h>

#include <cmath>

using namespace botlab;
using doctest::Approx;

TEST_SUITE("stats") {

TEST_CASE("permutation test, exact enumeration of a 2 vs 2 split") {
    const std::vector<double> a{1, 2}, b{3, 4};
    const auto r = stats::permutation_test(a, b, 1000, 1);
    CHECK(r.statistic == Approx(-2.0));
    CHECK(r.p_value == Approx(2.0 / 6.0));
    CHECK_FALSE(r.n_resamples.has_value());
    CHECK(r.p_value == Approx(oracle::exact_permutation_p(a, b)));
}

TEST_CASE("permutation test with identical groups gives p = 1") {
    const std::vector<double> a{5, 5, 5};
    CHECK(stats::permutation_test(a, a, 1000, 3).p_value == 1.0);
    CHECK(stats::permutation_test(a, a, 1000, 3, false).p_value == 1.0);
}

TEST_CASE("monte carlo permutation is seed-deterministic and uses +1 smoothing") {
    std::vector<double> a, b;
    for (int i = 0; i < 10; ++i) {
        a.push_back(i);
        b.push_back(i + 0.5);
    }
    const auto r1 = stats::permutation_test(a, b, 500, 9);
    const auto r2 = stats::permutation_test(a, b, 500, 9);
    CHECK(r1.p_value == r2.p_value);
    REQUIRE(r1.n_resamples.has_value());
    CHECK(*r1.n_resamples == 500);
    // A perfectly separated pair of large groups: no resample is as extreme.
    std::vector<double> lo(20, 0.0), hi(20, 1.0);
    CHECK(stats::permutation_test(lo, hi, 99, 1).p_value == Approx(1.0 / 100.0));
}

TEST_CASE("permutation test rejects an empty group") {
    const std::vector<double> a{1.0}, none;
    CHECK_THROWS_AS(stats::permutation_test(a, none, 10, 1), std::invalid_argument);
    CHECK_THROWS_AS(stats::permutation_test(none, a, 10, 1), std::invalid_argument);
}

TEST_CASE("monte carlo p tracks exact enumeration on small random fixtures") {
    Rng rng(77);
    for (int trial = 0; trial < 5; ++trial) {
        const std::size_t na = 2 + rng.below(5), nb = 2 + rng.below(5);
        std::vector<double> a(na), b(nb);
        for (auto& v : a) v = rng.normal();
        for (auto& v : b) v = rng.normal() + 0.8;
        const double exact = oracle::exact_permutation_p(a, b);
        const auto mc = stats::permutation_test(a, b, 10000, 100 + static_cast<std::uint64_t>(trial), false);
        const double se = std::sqrt(exact * (1 - exact) / 10000.0);
        CHECK(std::fabs(mc.p_value - exact) <= 3 * se + 1.0 / 10001.0);
    }
}

TEST_CASE("bh_fdr hand fixtures") {
    const std::vector<double> p{0.01, 0.04, 0.03, 0.005};
    const auto q = stats::bh_fdr(p);
    const std::vector<double> expect{0.02, 0.04, 0.04, 0.02};
    for (std::size_t i = 0; i < p.size(); ++i) CHECK(q[i] == Approx(expect[i]).epsilon(1e-12));
    CHECK(stats::bh_fdr(std::vector<double>{0.3}) == std::vector<double>{0.3});
    CHECK(stats::bh_fdr(std::vector<double>{1.0, 1.0, 1.0}) == std::vector<double>{1.0, 1.0, 1.0});
    CHECK_THROWS_AS(stats::bh_fdr(std::vector<double>{0.2, 1.5}), std::invalid_argument);
}

TEST_CASE("bh_fdr properties on random inputs") {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> p(1 + rng.below(30));
        for (auto& v : p) v = rng.uniform();
        const auto q = stats::bh_fdr(p);
        std::vector<std::size_t> order(p.size());
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](auto i, auto j) { return p[i] < p[j]; });
        for (std::size_t i = 0; i < p.size(); ++i) {
            CHECK(q[i] >= p[i]);
            CHECK(q[i] <= 1.0);
        }
        for (std::size_t i = 1; i < order.size(); ++i) CHECK(q[order[i]] >= q[order[i - 1]]);
    }
}

TEST_CASE("ols hand fixtures") {
    const std::vector<double> x{1, 2, 3}, y{1, 2, 4};
    const auto fit = stats::ols_regression(x, y);
    CHECK(fit.beta == Approx(1.5).epsilon(1e-12));
    CHECK(fit.intercept == Approx(-2.0 / 3.0).epsilon(1e-12));
    // SS_res = 1/6, SS_tot = 14/3.
    CHECK(fit.r_squared == Approx(1.0 - (1.0 / 6.0) / (14.0 / 3.0)).epsilon(1e-12));
    // t = 1.5 / sqrt((1/6) / 2) with one degree of freedom; Cauchy tail.
    const double t = 1.5 / std::sqrt(1.0 / 12.0);
    CHECK(fit.p_value == Approx(1.0 - 2.0 / M_PI * std::atan(t)).epsilon(1e-10));

    const std::vector<double> x4{1, 2, 3, 4}, y4{2, 4, 6, 8};
    const auto perfect = stats::ols_regression(x4, y4);
    CHECK(perfect.beta == Approx(2.0));
    CHECK(perfect.r_squared == 1.0);
    CHECK(perfect.p_value < 1e-6);
}

TEST_CASE("ols on noise around a constant agrees with the normal equations") {
    Rng rng(11);
    std::vector<double> x, y;
    for (int i = 0; i < 400; ++i) {
        x.push_back(rng.uniform(0, 10));
        y.push_back(3.0 + rng.normal());
    }
    const auto fit = stats::ols_regression(x, y);
    const auto [beta, intercept] = oracle::normal_equations(x, y);
    CHECK(fit.beta == Approx(beta).epsilon(1e-9));
    CHECK(fit.intercept == Approx(intercept).epsilon(1e-9));
    CHECK(std::fabs(fit.beta) < 0.1);
    CHECK(fit.p_value > 0.05);
}

TEST_CASE("ols errors") {
    const std::vector<double> c{2, 2, 2}, y{1, 2, 3}, shorter{1, 2};
    CHECK_THROWS_AS(stats::ols_regression(c, y), std::invalid_argument);
    CHECK_THROWS_AS(stats::ols_regression(y, shorter), std::invalid_argument);
}

TEST_CASE("ols recovers noiseless slopes") {
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        const double beta = rng.uniform(-50, 50), intercept = rng.uniform(-10, 10);
        std::vector<double> x, y;
        for (int i = 0; i < 30; ++i) {
            x.push_back(rng.uniform(-5, 5));
            y.push_back(beta * x.back() + intercept);
        }
        CHECK(std::fabs(stats::ols_regression(x, y).beta - beta) / std::fabs(beta) < 1e-10);
    }
}

TEST_CASE("chi-square independence hand fixtures") {
    auto r = stats::chi_square_independence({{{10, 0}, {0, 10}}});
    CHECK(r.statistic == Approx(20.0).epsilon(1e-12));
    CHECK(r.p_value == Approx(oracle::chi2_df1_sf(20.0)).epsilon(1e-8));
    r = stats::chi_square_independence({{{5, 5}, {5, 5}}});
    CHECK(r.statistic == 0.0);
    CHECK(r.p_value == 1.0);
    r = stats::chi_square_independence({{{9, 1}, {1, 9}}});
    CHECK(r.statistic == Approx(12.8).epsilon(1e-12));
    CHECK(r.p_value == Approx(oracle::chi2_df1_sf(12.8)).epsilon(1e-8));
    CHECK_THROWS_AS(stats::chi_square_independence({{{0, 0}, {3, 4}}}), std::invalid_argument);
}

TEST_CASE("chi-square is invariant under transposition") {
    Rng rng(8);
    for (int trial = 0; trial < 30; ++trial) {
        const double a = 1 + rng.below(40), b = 1 + rng.below(40), c = 1 + rng.below(40), d = 1 + rng.below(40);
        const auto r1 = stats::chi_square_independence({{{a, b}, {c, d}}});
        const auto r2 = stats::chi_square_independence({{{a, c}, {b, d}}});
        CHECK(r1.statistic == Approx(r2.statistic).epsilon(1e-12));
    }
}

TEST_CASE("mcnemar hand fixtures") {
    auto r = stats::mcnemar(10, 0);
    CHECK(r.statistic == Approx(8.1).epsilon(1e-12));
    CHECK(r.p_value == Approx(oracle::chi2_df1_sf(8.1)).epsilon(1e-8));
    r = stats::mcnemar(7, 7);
    CHECK(r.statistic == 0.0);
    CHECK(r.p_value == 1.0);
    CHECK(stats::mcnemar(0, 1).statistic == 0.0);
    CHECK(stats::mcnemar(12, 0, false).statistic == Approx(12.0));
    CHECK_THROWS_AS(stats::mcnemar(0, 0), std::invalid_argument);
}

TEST_CASE("chi-square and t tails against closed forms") {
    for (double x : {0.1, 1.0, 3.84, 10.0, 30.0}) {
        CHECK(stats::chi_square_sf(x, 1) == Approx(oracle::chi2_df1_sf(x)).epsilon(1e-10));
        CHECK(stats::chi_square_sf(x, 2) == Approx(std::exp(-x / 2)).epsilon(1e-10));
    }
    for (double t : {0.2, 1.0, 2.5, 8.0}) {
        CHECK(stats::student_t_two_sided(t, 1) == Approx(1 - 2 / M_PI * std::atan(t)).epsilon(1e-10));
        CHECK(stats::student_t_two_sided(t, 2) == Approx(1 - t / std::sqrt(t * t + 2)).epsilon(1e-10));
    }
}

}
