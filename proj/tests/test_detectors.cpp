#include "botlab/detectors.hpp"
#include "botlab/features.hpp"
#include "botlab/rng.hpp"

#include "fixtures.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace botlab;
using fixture::TempDir;

namespace {

// Raw training set over the default schema: bots post ~10/day, humans ~1/day,
// every other column is noise.
TrainingSet rate_fixture(std::size_t n_per_class, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    TrainingSet ts;
    ts.schema = *default_feature_schema();
    for (std::size_t i = 0; i < 2 * n_per_class; ++i) {
        const bool is_bot = i % 2 == 0;
        std::vector<double> row(kFeatureCount);
        for (auto& v : row) v = std::abs(noise(gen));
        row[kPostRate] = is_bot ? 10.0 + 0.5 * noise(gen) : 1.0 + 0.2 * noise(gen);
        ts.x.push_back(row);
        ts.y.push_back(is_bot);
    }
    return ts;
}

double training_accuracy(const DetectorModel& m, const TrainingSet& ts) {
    std::size_t hit = 0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        FeatureVector fv{"x", ts.x[i], default_feature_schema()};
        hit += (predict(m, fv) >= 0.5) == (ts.y[i] == 1);
    }
    return static_cast<double>(hit) / static_cast<double>(ts.size());
}

// Exhaustive depth-1 split search: best accuracy of any (feature, threshold, polarity).
double best_stump_accuracy(const TrainingSet& ts) {
    double best = 0;
    for (std::size_t f = 0; f < ts.schema.size(); ++f) {
        for (const auto& pivot : ts.x) {
            std::size_t left_bot = 0, n = ts.size();
            for (std::size_t i = 0; i < n; ++i) {
                left_bot += (ts.x[i][f] <= pivot[f]) == (ts.y[i] == 1);
            }
            const double acc = static_cast<double>(left_bot) / static_cast<double>(n);
            best = std::max({best, acc, 1.0 - acc});
        }
    }
    return best;
}

double log_loss_single(const std::vector<std::vector<double>>& x, const std::vector<int>& y,
                       const std::vector<double>& w, double b) {
    double loss = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double z = b;
        for (std::size_t j = 0; j < w.size(); ++j) z += w[j] * x[i][j];
        const double p = std::clamp(1.0 / (1.0 + std::exp(-z)), 1e-12, 1 - 1e-12);
        loss -= y[i] ? std::log(p) : std::log(1 - p);
    }
    return loss / static_cast<double>(x.size());
}

// One logistic regression on a column subset, fitted by plain gradient descent
// on standardized sign*log1p inputs. Returns its training log-loss.
double expert_alone_loss(const TrainingSet& ts, const std::vector<std::size_t>& cols) {
    const std::size_t n = ts.size(), d = cols.size();
    std::vector<std::vector<double>> x(n, std::vector<double>(d));
    for (std::size_t j = 0; j < d; ++j) {
        double mu = 0, sq = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double v = ts.x[i][cols[j]];
            x[i][j] = std::copysign(std::log1p(std::abs(v)), v);
            mu += x[i][j];
        }
        mu /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) sq += (x[i][j] - mu) * (x[i][j] - mu);
        const double sd = std::sqrt(sq / static_cast<double>(n));
        for (std::size_t i = 0; i < n; ++i) x[i][j] = sd > 0 ? (x[i][j] - mu) / sd : 0.0;
    }
    std::vector<double> w(d, 0.0);
    double b = 0;
    for (int epoch = 0; epoch < 2000; ++epoch) {
        std::vector<double> gw(d, 0.0);
        double gb = 0;
        for (std::size_t i = 0; i < n; ++i) {
            double z = b;
            for (std::size_t j = 0; j < d; ++j) z += w[j] * x[i][j];
            const double r = 1.0 / (1.0 + std::exp(-z)) - ts.y[i];
            for (std::size_t j = 0; j < d; ++j) gw[j] += r * x[i][j];
            gb += r;
        }
        for (std::size_t j = 0; j < d; ++j) w[j] -= 0.5 * gw[j] / static_cast<double>(n);
        b -= 0.5 * gb / static_cast<double>(n);
    }
    return log_loss_single(x, ts.y, w, b);
}

}  // namespace

TEST_SUITE("detectors") {

TEST_CASE("posting frequency is a per-day ratio") {
    Dataset ds = fixture::population(1, 0, 5);
    for (int d = 0; d < 5; ++d) {
        for (int k = 0; k < 2; ++k) {
            ds.events.push_back(fixture::event(d * 48 + k * 10, "h0", Action::Post, std::nullopt, 0.1));
        }
    }
    ds.validate();
    const auto fv = extract_features(ds, "h0", 5);
    CHECK(fv.values[kPostRate] == doctest::Approx(2.0));
    CHECK(fv.values[kActiveDayFraction] == doctest::Approx(1.0));
    CHECK(fv.values[kPolarityMean] == doctest::Approx(0.1));
    CHECK(fv.values[kPolarityVariance] == doctest::Approx(0.0));
}

TEST_CASE("an account without events gets an all-zero vector") {
    const Dataset ds = fixture::population(2, 1, 3);
    const auto fv = extract_features(ds, "b0", 3);
    CHECK(fv.values.size() == kFeatureCount);
    for (double v : fv.values) CHECK(v == 0.0);
}

TEST_CASE("a day-1-only account looks the same at day 2 and day 5") {
    Dataset ds = fixture::population(2, 0, 5);
    ds.events.push_back(fixture::event(1, "h0", Action::Post, std::nullopt, 0.4));
    ds.events.push_back(fixture::event(3, "h0", Action::Follow, "h1"));
    ds.events.push_back(fixture::event(7, "h0", Action::Post, std::nullopt, -0.2));
    ds.validate();
    CHECK(extract_features(ds, "h0", 2).values == extract_features(ds, "h0", 5).values);
}

TEST_CASE("feature extraction rejects bad queries") {
    const Dataset ds = fixture::population(1, 1, 3);
    CHECK_THROWS_AS(extract_features(ds, "nobody", 1), DataError);
    CHECK_THROWS_AS(extract_features(ds, "h0", 0), std::invalid_argument);
    CHECK_THROWS_AS(extract_features(ds, "h0", 4), std::invalid_argument);
}

TEST_CASE("features never see later events") {
    std::mt19937_64 gen(5);
    Dataset ds = fixture::population(6, 4, 6);
    std::vector<std::string> ids;
    for (const auto& a : ds.accounts) ids.push_back(a.id);
    std::map<std::string, int> posts;
    for (std::int64_t ts = 0; ts < 6 * 48; ts += 3) {
        const auto& who = ids[gen() % ids.size()];
        const int kind = static_cast<int>(gen() % 3);
        if (kind == 0) {
            ds.events.push_back(fixture::event(ts, who, Action::Post, std::nullopt,
                                               std::uniform_real_distribution<double>(-1, 1)(gen)));
            ++posts[who];
        } else {
            auto other = ids[gen() % ids.size()];
            if (other == who) continue;
            if (kind == 1 && posts[other] > 0) {
                ds.events.push_back(fixture::event(ts, who, Action::Like, other + "#0"));
            } else {
                ds.events.push_back(fixture::event(ts, who, Action::Follow, other));
            }
        }
    }
    ds.validate();
    const auto model = train_bagged_trees(rate_fixture(10, 1), {20, 4, 2, 3});
    for (int d = 1; d <= 6; ++d) {
        Dataset cut = ds;
        std::erase_if(cut.events, [&](const InteractionEvent& e) { return e.day > d; });
        const auto full = extract_all_features(ds, d);
        const auto trunc = extract_all_features(cut, d);
        for (const auto& [id, fv] : full) {
            CHECK(fv.values == trunc.at(id).values);
            CHECK(predict(model, fv) == predict(model, trunc.at(id)));
        }
    }
}

TEST_CASE("bagged trees fit the separable rate fixture") {
    const TrainingSet ts = rate_fixture(10, 11);
    REQUIRE(best_stump_accuracy(ts) == 1.0);
    const auto model = train_bagged_trees(ts, {});
    CHECK(training_accuracy(model, ts) == 1.0);
}

TEST_CASE("bagged trees do at least as well as the best stump") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        std::mt19937_64 gen(seed);
        std::normal_distribution<double> nd;
        TrainingSet ts;
        ts.schema = {"a", "b", "c"};
        for (int i = 0; i < 40; ++i) {
            const int y = i % 2;
            ts.x.push_back({nd(gen) + 1.5 * y, nd(gen), nd(gen) - 0.8 * y});
            ts.y.push_back(y);
        }
        const auto model = train_bagged_trees(ts, {50, 8, 1, seed});
        std::size_t hit = 0;
        for (std::size_t i = 0; i < ts.size(); ++i) {
            const auto& ens = std::get<TreeEnsemble>(model.parameters);
            hit += (2 * ens.bot_votes(ts.x[i]) >= ens.trees.size()) == (ts.y[i] == 1);
        }
        CHECK(static_cast<double>(hit) / 40.0 >= best_stump_accuracy(ts));
    }
}

TEST_CASE("training is deterministic for a fixed seed") {
    const TrainingSet ts = rate_fixture(15, 2);
    const auto a = train_bagged_trees(ts, {30, 6, 2, 9});
    const auto b = train_bagged_trees(ts, {30, 6, 2, 9});
    const auto m1 = train_mixture_of_experts(ts, {4, 50, 0.5});
    const auto m2 = train_mixture_of_experts(ts, {4, 50, 0.5});
    CHECK(a.training_fingerprint == b.training_fingerprint);
    const TrainingSet probe = rate_fixture(10, 77);
    for (const auto& row : probe.x) {
        FeatureVector fv{"p", row, default_feature_schema()};
        CHECK(predict(a, fv) == predict(b, fv));
        CHECK(predict(m1, fv) == predict(m2, fv));
    }
    CHECK(to_json(a) == to_json(b));
}

TEST_CASE("single-class training data is rejected") {
    TrainingSet ts = rate_fixture(5, 3);
    for (auto& y : ts.y) y = 1;
    CHECK_THROWS_AS(train_bagged_trees(ts, {}), std::invalid_argument);
    CHECK_THROWS_AS(train_mixture_of_experts(ts, {}), std::invalid_argument);
}

TEST_CASE("tree probability is the fraction of trees voting bot") {
    DetectorModel m;
    m.kind = DetectorKind::BaggedTrees;
    m.feature_schema = *default_feature_schema();
    TreeEnsemble ens;
    for (int i = 0; i < 10; ++i) ens.trees.push_back({TreeNode{-1, 0, -1, -1, i < 7}});
    m.parameters = ens;
    FeatureVector fv{"a", std::vector<double>(kFeatureCount, 0.0), default_feature_schema()};
    CHECK(predict(m, fv) == doctest::Approx(0.7));
}

TEST_CASE("schema mismatch is rejected at prediction time") {
    const auto model = train_bagged_trees(rate_fixture(5, 4), {5, 3, 2, 0});
    auto reordered = std::make_shared<const FeatureSchema>([] {
        auto s = *default_feature_schema();
        std::swap(s[0], s[1]);
        return s;
    }());
    FeatureVector fv{"a", std::vector<double>(kFeatureCount, 0.0), reordered};
    CHECK_THROWS_AS(predict(model, fv), SchemaError);
    FeatureVector narrow{"a", {1.0}, default_feature_schema()};
    CHECK_THROWS_AS(predict(model, narrow), SchemaError);
}

TEST_CASE("zero epochs leaves the gates uniform") {
    const auto m = fit_mixture(rate_fixture(5, 5), {1, 0, 0.5});
    for (double g : m.gate_weights()) CHECK(g == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("gate weights always form a probability vector") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto m = fit_mixture(rate_fixture(8, seed), {seed, 20 + 10 * static_cast<int>(seed), 0.5});
        double sum = 0;
        for (double g : m.gate_weights()) {
            CHECK(g >= 0.0);
            sum += g;
        }
        CHECK(std::abs(sum - 1.0) < 1e-9);
    }
}

TEST_CASE("log-loss decreases over the first epochs on a perfect separator") {
    std::vector<double> losses;
    fit_mixture(rate_fixture(10, 6), {0, 10, 0.5}, &losses);
    REQUIRE(losses.size() == 10);
    for (std::size_t i = 1; i < losses.size(); ++i) CHECK(losses[i] < losses[i - 1]);
}

TEST_CASE("the informative expert earns the largest gate") {
    std::mt19937_64 gen(21);
    std::normal_distribution<double> nd;
    TrainingSet ts;
    ts.schema = *default_feature_schema();
    for (int i = 0; i < 200; ++i) {
        const int y = i % 2;
        std::vector<double> row(kFeatureCount);
        for (auto& v : row) v = nd(gen);
        row[kPostRate] = y ? 6.0 + nd(gen) : 1.0 + 0.3 * nd(gen);
        row[kMeanPostGap] = y ? 3.0 + nd(gen) : 20.0 + 4.0 * nd(gen);
        ts.x.push_back(row);
        ts.y.push_back(y);
    }
    const auto& groups = expert_feature_groups();
    std::array<double, kExpertCount> alone{};
    for (std::size_t g = 0; g < kExpertCount; ++g) alone[g] = expert_alone_loss(ts, groups[g]);
    const auto oracle_best = static_cast<std::size_t>(std::min_element(alone.begin(), alone.end()) - alone.begin());
    REQUIRE(oracle_best == static_cast<std::size_t>(ExpertGroup::Temporal));

    const auto m = fit_mixture(ts, {3, 500, 0.5});
    const auto gates = m.gate_weights();
    const auto best = static_cast<std::size_t>(std::max_element(gates.begin(), gates.end()) - gates.begin());
    CHECK(best == oracle_best);
}

TEST_CASE("expert feature groups partition the schema") {
    std::vector<int> seen(kFeatureCount, 0);
    for (const auto& g : expert_feature_groups()) {
        for (auto f : g) ++seen.at(f);
    }
    for (int s : seen) CHECK(s == 1);
}

TEST_CASE("analytic mixture gradient matches finite differences") {
    std::mt19937_64 gen(99);
    std::normal_distribution<double> nd;
    for (int trial = 0; trial < 50; ++trial) {
        TrainingSet ts = rate_fixture(4 + trial % 5, 1000 + static_cast<std::uint64_t>(trial));
        LogisticMixture m = fit_mixture(ts, {0, 0, 0.5});
        auto params = flatten(m);
        for (auto& p : params) p = nd(gen);
        unflatten(m, params);
        std::vector<double> grad;
        mixture_loss(m, ts, &grad);
        REQUIRE(grad.size() == params.size());
        for (std::size_t i = 0; i < params.size(); ++i) {
            const double h = 1e-6;
            auto up = params, down = params;
            up[i] += h;
            down[i] -= h;
            LogisticMixture mu = m, md = m;
            unflatten(mu, up);
            unflatten(md, down);
            const double numeric = (mixture_loss(mu, ts) - mixture_loss(md, ts)) / (2 * h);
            const double denom = std::max(1e-6, std::abs(numeric) + std::abs(grad[i]));
            CHECK(std::abs(numeric - grad[i]) / denom < 1e-4);
        }
    }
}

TEST_CASE("external predictions pass through and cover only their accounts") {
    TempDir dir("ext");
    fixture::spit(dir / "p.csv", "source,account,probability\nllm,a,0\nllm,b,1\nllm,c,0.375\nother,a,0.5\n");
    const auto m = load_external_predictions(dir / "p.csv", "llm");
    CHECK(m.kind == DetectorKind::External);
    CHECK(predict(m, {"a", {}, nullptr}) == 0.0);
    CHECK(predict(m, {"b", {}, nullptr}) == 1.0);
    CHECK(predict(m, {"c", {}, nullptr}) == 0.375);
    CHECK_THROWS_AS(predict(m, {"zz", {}, nullptr}), DataError);
    CHECK_THROWS_AS(load_external_predictions(dir / "p.csv", "missing"), DataError);
}

TEST_CASE("models survive a save and load round trip") {
    TempDir dir("model");
    const TrainingSet ts = rate_fixture(10, 8);
    const std::vector<DetectorModel> models{train_bagged_trees(ts, {10, 5, 2, 1}),
                                            train_mixture_of_experts(ts, {1, 30, 0.5})};
    for (const auto& m : models) {
        save_model(m, dir / "m.json");
        const auto back = load_model(dir / "m.json");
        CHECK(back.kind == m.kind);
        CHECK(back.training_fingerprint == m.training_fingerprint);
        for (const auto& row : ts.x) {
            FeatureVector fv{"p", row, default_feature_schema()};
            CHECK(predict(back, fv) == predict(m, fv));
        }
    }
    fixture::spit(dir / "bad.json", "{\"format_version\": 99}");
    CHECK_THROWS_AS(load_model(dir / "bad.json"), DataError);
}

TEST_CASE("detector kinds parse") {
    CHECK(parse_detector_kind("trees") == DetectorKind::BaggedTrees);
    CHECK(parse_detector_kind("moe") == DetectorKind::MixtureOfExperts);
    CHECK_THROWS_AS(parse_detector_kind("svm"), std::invalid_argument);
}

}
