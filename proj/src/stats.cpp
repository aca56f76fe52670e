#include "botlab/stats.hpp"

#include "botlab/rng.hpp"

#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace botlab::stats {

std::string_view to_string(Method m) {
    switch (m) {
        case Method::Permutation: return "permutation";
        case Method::ChiSquare: return "chi_square";
        case Method::McNemar: return "mcnemar";
        case Method::OlsSlopeT: return "ols_slope_t";
    }
    return "?";
}

double chi_square_sf(double x, double df) {
    if (x <= 0) return 1.0;
    return boost::math::gamma_q(df / 2.0, x / 2.0);
}

double student_t_two_sided(double t, double df) {
    if (!std::isfinite(t)) return 0.0;
    // P(|T| > t) = I_{df/(df+t^2)}(df/2, 1/2)
    return boost::math::ibeta(df / 2.0, 0.5, df / (df + t * t));
}

namespace {

double mean(std::span<const double> v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Relative slack so that relabellings equal to the observed split count as
// "at least as extreme" despite summation-order rounding.
bool as_extreme(double diff, double observed) {
    return std::fabs(diff) >= std::fabs(observed) - 1e-12 * std::max(1.0, std::fabs(observed));
}

}  // namespace

TestResult permutation_test(std::span<const double> group_a, std::span<const double> group_b,
                            std::uint64_t n_resamples, std::uint64_t seed, bool exact_if_small) {
    if (group_a.empty() || group_b.empty()) {
        throw std::invalid_argument("permutation_test: both groups must be non-empty");
    }
    const std::size_t na = group_a.size(), n = na + group_b.size();
    std::vector<double> pooled(group_a.begin(), group_a.end());
    pooled.insert(pooled.end(), group_b.begin(), group_b.end());
    const double total = std::accumulate(pooled.begin(), pooled.end(), 0.0);
    const double observed = mean(group_a) - mean(group_b);
    auto diff_for = [&](double sum_a) {
        return sum_a / static_cast<double>(na) - (total - sum_a) / static_cast<double>(n - na);
    };

    TestResult r;
    r.method = Method::Permutation;
    r.statistic = observed;

    if (exact_if_small && n <= kExactPermutationLimit) {
        std::uint64_t hits = 0, count = 0;
        for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
            if (static_cast<std::size_t>(std::popcount(mask)) != na) continue;
            double sum_a = 0;
            for (std::size_t i = 0; i < n; ++i)
                if (mask & (1u << i)) sum_a += pooled[i];
            ++count;
            hits += as_extreme(diff_for(sum_a), observed);
        }
        r.p_value = static_cast<double>(hits) / static_cast<double>(count);
        return r;
    }

    if (n_resamples == 0) throw std::invalid_argument("permutation_test: n_resamples must be > 0");
    std::uint64_t hits = 0;
    std::vector<double> buf(pooled.size());
    for (std::uint64_t i = 0; i < n_resamples; ++i) {
        // Per-resample stream keyed by index, so chunking the loop across
        // workers would not change the result.
        Rng rng(derive_seed(seed, i));
        buf = pooled;
        // Partial Fisher-Yates: the first na slots form a uniform subset.
        for (std::size_t j = 0; j < na; ++j) std::swap(buf[j], buf[j + rng.below(n - j)]);
        const double sum_a = std::accumulate(buf.begin(), buf.begin() + static_cast<long>(na), 0.0);
        hits += as_extreme(diff_for(sum_a), observed);
    }
    r.n_resamples = n_resamples;
    r.p_value = static_cast<double>(1 + hits) / static_cast<double>(1 + n_resamples);
    return r;
}

std::vector<double> bh_fdr(std::span<const double> p_values) {
    const std::size_t m = p_values.size();
    for (double p : p_values) {
        if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("bh_fdr: p-value outside [0,1]");
    }
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return p_values[i] < p_values[j]; });
    std::vector<double> out(m);
    double running = 1.0;
    for (std::size_t rank = m; rank >= 1; --rank) {
        const std::size_t idx = order[rank - 1];
        running = std::min(running, p_values[idx] * (static_cast<double>(m) / static_cast<double>(rank)));
        out[idx] = std::min(1.0, running);
    }
    return out;
}

RegressionFit ols_regression(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw std::invalid_argument("ols_regression: length mismatch");
    if (x.size() < 3) throw std::invalid_argument("ols_regression: need at least 3 observations");
    const std::size_t n = x.size();
    const double mx = mean(x), my = mean(y);
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if (sxx == 0) throw std::invalid_argument("ols_regression: x is constant");

    RegressionFit fit;
    fit.n = n;
    fit.beta = sxy / sxx;
    fit.intercept = my - fit.beta * mx;
    double ss_res = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double e = y[i] - (fit.intercept + fit.beta * x[i]);
        ss_res += e * e;
    }
    fit.r_squared = syy > 0 ? std::clamp(1.0 - ss_res / syy, 0.0, 1.0) : 1.0;
    const double df = static_cast<double>(n - 2);
    const double se = std::sqrt(ss_res / df / sxx);
    if (se > 0) {
        fit.p_value = student_t_two_sided(fit.beta / se, df);
    } else {
        fit.p_value = fit.beta != 0 ? 0.0 : 1.0;
    }
    return fit;
}

TestResult chi_square_independence(const std::array<std::array<double, 2>, 2>& table) {
    const double a = table[0][0], b = table[0][1], c = table[1][0], d = table[1][1];
    if (a < 0 || b < 0 || c < 0 || d < 0) {
        throw std::invalid_argument("chi_square_independence: negative count");
    }
    const double r1 = a + b, r2 = c + d, c1 = a + c, c2 = b + d;
    if (r1 == 0 || r2 == 0 || c1 == 0 || c2 == 0) {
        throw std::invalid_argument("chi_square_independence: zero margin");
    }
    const double n = r1 + r2;
    const double cross = a * d - b * c;
    TestResult r;
    r.method = Method::ChiSquare;
    r.statistic = n * cross * cross / (r1 * r2 * c1 * c2);
    r.p_value = chi_square_sf(r.statistic, 1.0);
    return r;
}

TestResult mcnemar(std::uint64_t b, std::uint64_t c, bool continuity_correction) {
    if (b + c == 0) throw std::invalid_argument("mcnemar: no discordant pairs");
    const double diff = std::fabs(static_cast<double>(b) - static_cast<double>(c));
    const double num = continuity_correction ? std::max(0.0, diff - 1.0) : diff;
    TestResult r;
    r.method = Method::McNemar;
    r.statistic = num * num / static_cast<double>(b + c);
    r.p_value = chi_square_sf(r.statistic, 1.0);
    return r;
}

}  // namespace botlab::stats
