#include "botlab/cross_validation.hpp"
#include "botlab/simulator.hpp"

#include "fixtures.hpp"

#include <doctest.h>

using namespace botlab;

namespace {

const Dataset& small_world() {
    static const Dataset ds = [] {
        sim::SimConfig c;
        c.seed = 3;
        return sim::run_experiment(c);
    }();
    return ds;
}

CrossValidationOptions quick_options(std::uint64_t seed) {
    CrossValidationOptions o;
    o.seed = seed;
    o.fusion_samples = 200;
    return o;
}

bool same_row(const StrategyRow& a, const StrategyRow& b) {
    return a.strategy == b.strategy && a.counts.tp == b.counts.tp && a.counts.fp == b.counts.fp &&
           a.counts.tn == b.counts.tn && a.counts.fn == b.counts.fn;
}

}  // namespace

TEST_SUITE("cross_validation") {

TEST_CASE("strategy list covers detectors, human channels and every ensemble") {
    const auto names = all_strategies(small_world(), {});
    for (const char* s : {"trees", "moe", "human", "count", "hard", "soft", "late_fusion", "human_first",
                          "model_first", "meta", "hybrid_late_fusion"}) {
        CHECK(std::find(names.begin(), names.end(), s) != names.end());
    }
}

TEST_CASE("pooled rows cover the whole universe and folds are recorded") {
    const Dataset& ds = small_world();
    const auto opts = quick_options(1);
    const auto res = cross_validated_compare(ds, all_strategies(ds, opts), opts);
    REQUIRE(res.folds.size() == 5);
    for (const auto& row : res.rows) {
        const auto& c = row.counts;
        CHECK(c.tp + c.fp + c.tn + c.fn == ds.accounts.size());
        CHECK(c.tp + c.fn == ds.bot_count());
        CHECK(row.metrics.f1 >= 0.0);
        CHECK(row.metrics.f1 <= 1.0);
    }
    const auto grid = default_threshold_grid();
    for (const auto& f : res.folds) {
        CHECK(std::find(grid.begin(), grid.end(), f.soft_threshold) != grid.end());
        CHECK(f.tau == kDefaultTau);
        double sum = 0;
        for (double w : f.fusion.weights) sum += w;
        CHECK(sum == doctest::Approx(1.0));
        CHECK(f.fusion.weights.size() == res.ai_sources.size());
        CHECK(f.hybrid_fusion.weights.size() == res.ai_sources.size() + 1);
    }
    CHECK_THROWS(res.row("no-such-strategy"));
}

TEST_CASE("a single-detector list reproduces that detector's row") {
    const Dataset& ds = small_world();
    const auto opts = quick_options(2);
    const auto full = cross_validated_compare(ds, {"trees", "moe", "meta"}, opts);
    const auto solo = cross_validated_compare(ds, {"trees"}, opts);
    REQUIRE(solo.rows.size() == 1);
    CHECK(same_row(solo.rows[0], full.row("trees")));
}

TEST_CASE("same dataset and seed give the same table") {
    const Dataset& ds = small_world();
    const auto opts = quick_options(4);
    const auto strategies = all_strategies(ds, opts);
    const auto a = cross_validated_compare(ds, strategies, opts);
    const auto b = cross_validated_compare(ds, strategies, opts);
    REQUIRE(a.rows.size() == b.rows.size());
    for (std::size_t i = 0; i < a.rows.size(); ++i) CHECK(same_row(a.rows[i], b.rows[i]));
    for (std::size_t i = 0; i < a.folds.size(); ++i) {
        CHECK(a.folds[i].soft_threshold == b.folds[i].soft_threshold);
        CHECK(a.folds[i].fusion.weights == b.folds[i].fusion.weights);
    }
}

TEST_CASE("a fold without both classes is an error") {
    Dataset ds = fixture::population(20, 3, 2);
    ds.steps_per_day = 48;
    CrossValidationOptions o = quick_options(0);
    CHECK_THROWS(cross_validated_compare(ds, {"trees"}, o));
}

TEST_CASE("unknown strategies are rejected") {
    CHECK_THROWS(cross_validated_compare(small_world(), {"bogus"}, quick_options(0)));
}

TEST_CASE("meta voting beats the best detector with skilled reporters") {
    int wins = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        sim::SimConfig c;
        c.seed = seed;
        const auto sharp = c.reporters.back();
        for (auto& r : c.reporters) r = sharp;
        const Dataset ds = sim::run_experiment(c);
        CrossValidationOptions o;
        o.seed = seed;
        const auto res = cross_validated_compare(ds, {"trees", "moe", "meta"}, o);
        const double best = std::max(res.row("trees").metrics.f1, res.row("moe").metrics.f1);
        wins += res.row("meta").metrics.f1 >= best;
    }
    CHECK(wins >= 8);
}

}
