#pragma once

// Hypothesis tests: permutation test, Benjamini-Hochberg adjustment, OLS with
// a slope t-test, 2x2 chi-square independence and McNemar.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace botlab::stats {

enum class Method { Permutation, ChiSquare, McNemar, OlsSlopeT };

std::string_view to_string(Method m);

struct TestResult {
    double statistic = 0;
    double p_value = 1;
    std::optional<std::uint64_t> n_resamples;  // unset for exact / closed-form tests
    Method method = Method::Permutation;
};

struct RegressionFit {
    double beta = 0;
    double intercept = 0;
    double r_squared = 0;
    double p_value = 1;
    std::size_t n = 0;
};

inline constexpr std::size_t kExactPermutationLimit = 12;

// statistic = mean(a) - mean(b), two-sided. With exact_if_small and
// |a|+|b| <= 12 every relabelling is enumerated and p is the exact
// proportion; otherwise p = (1 + hits) / (1 + n_resamples).
TestResult permutation_test(std::span<const double> group_a, std::span<const double> group_b,
                            std::uint64_t n_resamples, std::uint64_t seed,
                            bool exact_if_small = true);

// Step-up BH adjustment, returned in input order.
std::vector<double> bh_fdr(std::span<const double> p_values);

RegressionFit ols_regression(std::span<const double> x, std::span<const double> y);

// table = {{a, b}, {c, d}}; no continuity correction.
TestResult chi_square_independence(const std::array<std::array<double, 2>, 2>& table);

// b, c are the discordant counts.
TestResult mcnemar(std::uint64_t b, std::uint64_t c, bool continuity_correction = true);

// Upper tail of chi-square(df) and two-sided tail of Student t(df).
double chi_square_sf(double x, double df);
double student_t_two_sided(double t, double df);

}  // namespace botlab::stats
