#include "botlab/artifact.hpp"
#include "botlab/metrics.hpp"
#include "botlab/simulator.hpp"

#include "fixtures.hpp"

#include <doctest.h>

using namespace botlab;
using namespace botlab::sim;

namespace {

DetectorModel constant_scores(const WorldState& w, const std::map<AccountId, double>& overrides = {}) {
    PredictionSet ps;
    ps.source = "const";
    for (const auto& a : w.accounts) ps.scores[a.id] = 0.0;
    for (const auto& [id, p] : overrides) ps.scores[id] = p;
    return external_model(ps);
}

// Statuses replayed from the log, one vector per step boundary.
std::vector<Status> initial_statuses(const WorldState& w) {
    std::vector<Status> s(w.accounts.size(), Status::Active);
    for (const auto& c : w.campaigns) {
        for (std::size_t i = 0; i < c.bots.size(); ++i) {
            s[c.bots[i]] = static_cast<int>(i) < w.config.active_bots_per_campaign ? Status::Active : Status::Dormant;
        }
    }
    return s;
}

}  // namespace

TEST_SUITE("simulator") {

TEST_CASE("default world shape") {
    const WorldState w = init_world(SimConfig{});
    CHECK(w.accounts.size() == 305);
    std::size_t bots = 0;
    for (const auto& a : w.accounts) bots += a.role == Role::Bot;
    CHECK(bots == 80);
    REQUIRE(w.campaigns.size() == 4);
    for (const auto& c : w.campaigns) {
        std::size_t active = 0, dormant = 0;
        for (std::size_t b : c.bots) {
            active += w.accounts[b].status == Status::Active;
            dormant += w.accounts[b].status == Status::Dormant;
        }
        CHECK(active == 5);
        CHECK(dormant == 15);
    }
    for (std::size_t i = 0; i < w.accounts.size(); ++i) {
        CHECK(w.following[i].count(i) == 0);
        if (w.is_bot(i)) continue;
        for (double s : w.sentiment_row(i)) {
            CHECK(s >= -0.5);
            CHECK(s <= 0.5);
        }
    }
}

TEST_CASE("mean initial out-degree lies in [3, 6]") {
    double total = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        SimConfig c;
        c.seed = seed;
        const WorldState w = init_world(c);
        double edges = 0;
        for (const auto& f : w.following) edges += static_cast<double>(f.size());
        const double mean = edges / static_cast<double>(w.accounts.size());
        CHECK(mean >= 3.0);
        CHECK(mean <= 6.0);
        total += mean;
    }
    total /= 20;
    CHECK(total >= 3.0);
    CHECK(total <= 6.0);
}

TEST_CASE("invalid configurations are rejected") {
    SimConfig c;
    c.active_bots_per_campaign = 6;
    CHECK_THROWS_AS(init_world(c), std::invalid_argument);
    c = SimConfig{};
    c.ewma_alpha = 1.0;
    CHECK_THROWS_AS(init_world(c), std::invalid_argument);
    c = SimConfig{};
    c.mean_initial_degree = 7;
    CHECK_THROWS_AS(init_world(c), std::invalid_argument);
    c = SimConfig{};
    c.human_rates.post = 1.5;
    CHECK_THROWS_AS(init_world(c), std::invalid_argument);
}

TEST_CASE("a consumed post moves sentiment by the EWMA rule") {
    SimConfig c;
    c.n_humans = 2;
    c.n_campaigns = 1;
    c.active_bots_per_campaign = 1;
    c.reserve_bots_per_campaign = 19;
    c.human_rates = {0, 0, 0};
    c.reporters.clear();
    c.policy = PolicyKind::FixedRate;
    c.fixed_bot_rates = {1.0, 0.0, 0.0};
    c.bot_action_rate = 1.0;
    c.scan_enabled = false;
    WorldState w = init_world(c);
    for (auto& f : w.following) f.clear();
    for (auto& f : w.followers) f.clear();
    const std::size_t bot = w.campaigns[0].bots[0];
    w.following[0].insert(bot);
    w.followers[bot].insert(0);
    w.set_sentiment(0, 1, 0.0);
    const double untouched = w.sentiment(1, 1);
    step(w);
    REQUIRE(w.events.size() == 1);
    const double polarity = *w.events[0].polarity;
    CHECK(w.sentiment(0, 1) == doctest::Approx(0.1 * polarity).epsilon(1e-15));
    CHECK(w.sentiment(1, 1) == untouched);
    // p = 0, c = 1, alpha = 0.9 gives 0.1.
    CHECK(0.9 * 0.0 + (1 - 0.9) * 1.0 == doctest::Approx(0.1));
}

TEST_CASE("full runs keep sentiments bounded and audit rewards exactly") {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        SimConfig c;
        c.seed = seed;
        const Experiment ex = run_world(c);
        for (std::size_t i = 0; i < ex.world.accounts.size(); ++i) {
            for (double s : ex.world.sentiment_row(i)) {
                CHECK(s >= -1.0);
                CHECK(s <= 1.0);
            }
        }
        for (const auto& e : ex.dataset.events) {
            if (e.polarity) {
                CHECK(*e.polarity >= -1.0);
                CHECK(*e.polarity <= 1.0);
            }
        }
        const auto audit = audit_rewards(ex.world);
        REQUIRE(audit.size() == ex.world.campaigns.size());
        for (std::size_t ci = 0; ci < audit.size(); ++ci) {
            double logged = 0;
            for (const auto& row : ex.world.reward_log) logged += row[ci];
            CHECK(audit[ci] == logged);
            CHECK(ex.world.campaigns[ci].total_reward == logged);
        }
        CHECK(ex.dataset.accounts.size() == 305);
    }
}

TEST_CASE("reruns are byte-identical") {
    fixture::TempDir a("sim_a"), b("sim_b");
    SimConfig c;
    c.seed = 17;
    save_dataset(run_experiment(c), a.path());
    save_dataset(run_experiment(c), b.path());
    for (const char* f : {"accounts.jsonl", "events.jsonl", "reports.csv"}) {
        CHECK(fixture::slurp(a / f) == fixture::slurp(b / f));
        CHECK_FALSE(fixture::slurp(a / f).empty());
    }
    c.seed = 18;
    fixture::TempDir d("sim_d");
    save_dataset(run_experiment(c), d.path());
    CHECK(fixture::slurp(a / "events.jsonl") != fixture::slurp(d / "events.jsonl"));
}

TEST_CASE("statuses only move forward and suspended accounts stay silent") {
    SimConfig c;
    c.seed = 4;
    const Experiment ex = run_world(c);
    auto status = initial_statuses(ex.world);
    std::size_t suspensions = 0;
    for (const auto& e : ex.dataset.events) {
        const std::size_t i = ex.world.index_of(e.actor);
        switch (e.action) {
            case Action::Activate:
                CHECK(status[i] == Status::Dormant);
                status[i] = Status::Active;
                break;
            case Action::Suspend:
                CHECK(status[i] == Status::Active);
                status[i] = Status::Suspended;
                ++suspensions;
                break;
            default:
                CHECK(status[i] == Status::Active);
                break;
        }
    }
    CHECK(suspensions > 0);
    for (std::size_t i = 0; i < status.size(); ++i) CHECK(status[i] == ex.world.accounts[i].status);
    CHECK(ex.world.accounts.size() == 305);
}

TEST_CASE("reserves are activated once the actives are gone") {
    WorldState w = init_world(SimConfig{});
    auto& camp = w.campaigns[0];
    for (std::size_t b : camp.bots) {
        if (w.accounts[b].status == Status::Active) w.accounts[b].status = Status::Suspended;
    }
    Rng rng(1);
    const auto actions = agent_act(camp, observe(w, 0), w, rng);
    std::size_t activations = 0;
    for (const auto& a : actions) activations += a.kind == Action::Activate;
    CHECK(activations == 5);

    for (std::size_t b : camp.bots) w.accounts[b].status = Status::Suspended;
    CHECK(agent_act(camp, observe(w, 0), w, rng).empty());
}

TEST_CASE("a greedy policy that prefers idling idles") {
    SimConfig c;
    c.bot_action_rate = 1.0;
    WorldState w = init_world(c);
    QLearningPolicy::Table table{};
    for (auto& row : table) row = {0.0, 0.0, 0.0, 1.0};
    auto& camp = w.campaigns[1];
    camp.policy = std::make_unique<QLearningPolicy>(0.0, 0.1, 0.9, table);
    Rng rng(2);
    const auto actions = agent_act(camp, observe(w, 1), w, rng);
    CHECK(actions.size() == 5);
    for (const auto& a : actions) CHECK(a.kind == Action::Idle);
}

TEST_CASE("observation states stay inside the 27-state grid") {
    AgentObservation o;
    for (double p : {0.0, 1.0, 5.0}) {
        for (double r : {0.0, 2.0, 9.0}) {
            for (double s : {-1.0, 0.2, 0.9}) {
                o.pressure = p;
                o.posting_rate = r;
                o.neighborhood_sentiment = s;
                CHECK(o.state() < kStateCount);
            }
        }
    }
    o.pressure = 5;
    o.posting_rate = 9;
    o.neighborhood_sentiment = 0.9;
    CHECK(o.state() == kStateCount - 1);
}

TEST_CASE("reward terms") {
    SimConfig c;
    const WorldState w = init_world(c);
    const auto& camp = w.campaigns[0];
    const RewardSnapshot before = w.snapshot();
    CHECK(compute_reward(before, before, camp, c) == 0.0);

    RewardSnapshot after = before;
    after.human_followers[camp.bots[0]] += 1;
    CHECK(compute_reward(before, after, camp, c) == c.rewards.activation);

    after = before;
    after.status[camp.bots[0]] = Status::Suspended;
    CHECK(compute_reward(before, after, camp, c) == -5.0);

    after = before;
    std::size_t h = 0;
    while (!before.human[h]) ++h;
    after.sentiment[h][0] = before.sentiment[h][0] + 0.1;
    CHECK(compute_reward(before, after, camp, c) == c.rewards.infection);

    RewardSnapshot near = before;
    near.sentiment[h][0] = 0.75;
    after = near;
    after.sentiment[h][0] = 0.81;
    CHECK(compute_reward(near, after, camp, c) == c.rewards.termination);
    // Other campaigns' topics do not count.
    CHECK(compute_reward(near, after, w.campaigns[1], c) == 0.0);
}

TEST_CASE("detector scans suspend exactly what crosses the threshold") {
    WorldState w = init_world(SimConfig{});
    CHECK(detector_scan(w, constant_scores(w), 0.5).empty());

    const std::size_t bot = w.campaigns[2].bots[0];
    const auto before = w.snapshot();
    const auto hit = detector_scan(w, constant_scores(w, {{w.accounts[bot].id, 1.0}}), 0.5);
    CHECK(hit == std::vector<std::size_t>{bot});
    CHECK(w.accounts[bot].status == Status::Suspended);
    REQUIRE_FALSE(w.events.empty());
    CHECK(w.events.back().action == Action::Suspend);
    CHECK(compute_reward(before, w.snapshot(), w.campaigns[2], w.config) == -5.0);

    CHECK(detector_scan(w, constant_scores(w, {{w.accounts[bot].id, 1.0}}), 0.5).empty());

    // Humans are suspended alike.
    const auto human = detector_scan(w, constant_scores(w, {{w.accounts[0].id, 0.9}}), 0.5);
    CHECK(human == std::vector<std::size_t>{0});
}

TEST_CASE("silent and perfect reporters") {
    SimConfig c;
    c.seed = 6;
    c.reporters.assign(3, ReporterSpec{1.0, 0.0, 0.0, false});
    CHECK(run_experiment(c).reports.empty());

    c.reporters = perfect_reporter_pool(3);
    const Dataset ds = run_experiment(c);
    const auto bins = conditional_bot_probability(ds.reports, ds.labels(), ds.universe());
    bool any = false;
    for (const auto& [k, bin] : bins) {
        if (k == 0 || bin.n_accounts == 0) continue;
        any = true;
        CHECK(bin.p_bot == 1.0);
    }
    CHECK(any);
}

TEST_CASE("a perfect full-exposure reporter reports every live bot each day") {
    SimConfig c;
    c.seed = 8;
    c.reporters = {ReporterSpec{1.0, 1.0, 0.0, false}};
    const Experiment ex = run_world(c);
    const Labels labels = ex.dataset.labels();
    auto status = initial_statuses(ex.world);
    std::size_t e = 0;
    for (int day = 1; day <= c.n_days; ++day) {
        std::set<AccountId> live;
        for (std::size_t i = 0; i < status.size(); ++i) {
            if (status[i] == Status::Active && ex.world.is_bot(i)) live.insert(ex.world.accounts[i].id);
        }
        for (; e < ex.dataset.events.size() && ex.dataset.events[e].day == day; ++e) {
            const auto& ev = ex.dataset.events[e];
            const std::size_t i = ex.world.index_of(ev.actor);
            if (ev.action == Action::Activate) {
                status[i] = Status::Active;
                live.insert(ev.actor);
            }
            if (ev.action == Action::Suspend) status[i] = Status::Suspended;
        }
        std::set<AccountId> reported;
        for (const auto& r : ex.dataset.reports) {
            if (r.day == day) reported.insert(r.subject);
        }
        CHECK(reported == live);
    }
}

TEST_CASE("an 86-reporter calibrated pool averages F1 near 0.533") {
    double total = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        SimConfig c;
        c.seed = seed;
        c.reporters = calibrated_reporter_pool(86);
        const Dataset ds = run_experiment(c);
        const auto table = reporter_f1_table(ds.reports, ds.labels(), ds.universe());
        REQUIRE(table.size() > 0);
        double mean = 0;
        for (const auto& [r, f1] : table) mean += f1;
        total += mean / static_cast<double>(table.size());
    }
    CHECK(total / 10 == doctest::Approx(0.533).epsilon(0.05 / 0.533));
}

TEST_CASE("the smallest world runs and loads") {
    fixture::TempDir dir("tiny");
    SimConfig c;
    c.steps_per_day = 1;
    c.n_days = 1;
    const Dataset ds = run_experiment(c);
    save_dataset(ds, dir.path());
    write_run_artifact({}, {{"dataset", {{"n_days", 1}, {"steps_per_day", 1}}}}, dir.path());
    const Dataset back = load_dataset_dir(dir.path());
    CHECK(back.n_days == 1);
    CHECK(back.accounts.size() == 305);
}

TEST_CASE("campaigns post less after a scan that removes two of their bots") {
    double before_sum = 0, after_sum = 0;
    std::size_t episodes = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        SimConfig c;
        c.seed = seed;
        const Experiment ex = run_world(c);
        const auto& w = ex.world;
        const std::int64_t spd = c.steps_per_day, total = static_cast<std::int64_t>(c.n_days) * spd;
        std::vector<std::vector<double>> posts(w.campaigns.size(), std::vector<double>(static_cast<std::size_t>(total), 0));
        std::vector<std::vector<double>> active(w.campaigns.size(), std::vector<double>(static_cast<std::size_t>(total), 0));
        std::vector<std::vector<int>> suspended(w.campaigns.size(), std::vector<int>(static_cast<std::size_t>(total), 0));
        auto status = initial_statuses(w);
        std::size_t e = 0;
        for (std::int64_t t = 0; t < total; ++t) {
            for (; e < w.events.size() && w.events[e].timestamp == t; ++e) {
                const auto& ev = w.events[e];
                const std::size_t i = w.index_of(ev.actor);
                if (w.accounts[i].campaign) {
                    const auto ci = static_cast<std::size_t>(*w.accounts[i].campaign - 1);
                    if (ev.action == Action::Post) posts[ci][static_cast<std::size_t>(t)] += 1;
                    if (ev.action == Action::Suspend) ++suspended[ci][static_cast<std::size_t>(t)];
                }
                if (ev.action == Action::Activate) status[i] = Status::Active;
            }
            for (std::size_t ci = 0; ci < w.campaigns.size(); ++ci) {
                for (std::size_t b : w.campaigns[ci].bots) active[ci][static_cast<std::size_t>(t)] += status[b] == Status::Active;
            }
            // Scans run at the end of the step, so suspensions count from the next one.
            for (std::size_t k = e; k-- > 0 && w.events[k].timestamp == t;) {
                if (w.events[k].action == Action::Suspend) status[w.index_of(w.events[k].actor)] = Status::Suspended;
            }
        }
        const auto rate = [&](std::size_t ci, std::int64_t from, std::int64_t to) {
            double p = 0, a = 0;
            for (std::int64_t t = from; t < to; ++t) {
                p += posts[ci][static_cast<std::size_t>(t)];
                a += active[ci][static_cast<std::size_t>(t)];
            }
            return a > 0 ? p / a : 0.0;
        };
        for (std::int64_t s = spd - 1; s + spd < total; s += spd) {
            for (std::size_t ci = 0; ci < w.campaigns.size(); ++ci) {
                if (suspended[ci][static_cast<std::size_t>(s)] < 2) continue;
                before_sum += rate(ci, s + 1 - spd, s + 1);
                after_sum += rate(ci, s + 1, s + 1 + spd);
                ++episodes;
            }
        }
    }
    REQUIRE(episodes >= 10);
    CHECK(after_sum < before_sum);
}

}
