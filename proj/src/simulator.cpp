#include "botlab/simulator.hpp"

#include "botlab/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace botlab::sim {

namespace {

void require(bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument("SimConfig: " + what);
}

bool is_probability(double p) { return p >= 0.0 && p <= 1.0; }

double clamp_unit(double x) { return std::clamp(x, -1.0, 1.0); }

std::string human_id(int i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "u%03d", i);
    return buf;
}

std::string bot_id(int campaign, int i) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "c%d_b%02d", campaign, i);
    return buf;
}

constexpr double kBotPolarityFloor = 0.7;
constexpr double kHumanPolarityNoise = 0.25;
constexpr double kBotToBotShare = 0.2;
constexpr double kMinActivity = 0.02;

}  // namespace

void BehaviorRates::validate(const char* what) const {
    const std::string w = what;
    require(is_probability(post), w + ".post must be in [0,1]");
    require(is_probability(like), w + ".like must be in [0,1]");
    require(is_probability(follow), w + ".follow must be in [0,1]");
    require(post + like + follow <= 1.0 + 1e-12, w + " rates must sum to at most 1");
}

std::vector<ReporterSpec> calibrated_reporter_pool(std::size_t n) {
    // Linear spread from a noisy reporter to a sharp one.
    std::vector<ReporterSpec> pool;
    pool.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = n > 1 ? static_cast<double>(i) / static_cast<double>(n - 1) : 0.5;
        ReporterSpec r;
        r.report_rate = 1.0;
        r.tpr = 0.4 + 0.35 * t;
        r.fpr = 0.012 - 0.0118 * t;
        r.exposure_only = false;
        pool.push_back(r);
    }
    return pool;
}

std::vector<ReporterSpec> perfect_reporter_pool(std::size_t n) {
    return std::vector<ReporterSpec>(n, ReporterSpec{1.0, 1.0, 0.0, false});
}

void SimConfig::validate() const {
    require(n_humans >= 1, "n_humans must be >= 1");
    require(n_campaigns >= 1, "n_campaigns must be >= 1");
    require(active_bots_per_campaign >= 0 && reserve_bots_per_campaign >= 0,
            "bot counts must be non-negative");
    require(active_bots_per_campaign + reserve_bots_per_campaign == kBotsPerCampaign,
            "active_bots_per_campaign + reserve_bots_per_campaign must equal 20");
    require(n_days >= 1, "n_days must be >= 1");
    require(steps_per_day >= 1, "steps_per_day must be >= 1");
    require(mean_initial_degree >= 3.0 && mean_initial_degree <= 6.0,
            "mean_initial_degree must be in [3,6]");
    require(ewma_alpha > 0.0 && ewma_alpha < 1.0, "ewma_alpha must be in (0,1)");
    require(infection_delta >= 0.0, "infection_delta must be >= 0");
    require(conversion_threshold >= -1.0 && conversion_threshold <= 1.0,
            "conversion_threshold must be in [-1,1]");
    require(scan_period_steps >= 0, "scan_period_steps must be >= 0");
    require(is_probability(scan_threshold), "scan_threshold must be in [0,1]");
    human_rates.validate("human_rates");
    fixed_bot_rates.validate("fixed_bot_rates");
    require(is_probability(follow_back), "follow_back must be in [0,1]");
    require(is_probability(bot_action_rate), "bot_action_rate must be in [0,1]");
    require(is_probability(epsilon), "epsilon must be in [0,1]");
    require(q_learning_rate > 0.0 && q_learning_rate <= 1.0, "q_learning_rate must be in (0,1]");
    require(discount >= 0.0 && discount < 1.0, "discount must be in [0,1)");
    require(reporters.size() <= static_cast<std::size_t>(n_humans),
            "more reporters than humans");
    for (const auto& r : reporters) {
        require(is_probability(r.report_rate) && is_probability(r.tpr) && is_probability(r.fpr),
                "reporter probabilities must be in [0,1]");
    }
}

SimConfig benchmark_profile(const SimConfig& base) {
    SimConfig c = base;
    c.policy = PolicyKind::FixedRate;
    c.active_bots_per_campaign = SimConfig::kBotsPerCampaign;
    c.reserve_bots_per_campaign = 0;
    c.scan_enabled = false;
    c.reporters.clear();
    c.human_rates = BehaviorRates{0.03, 0.05, 0.008};
    c.bot_action_rate = 0.2;
    c.fixed_bot_rates = BehaviorRates{0.45, 0.35, 0.15};
    c.seed = derive_seed(base.seed, "benchmark");
    return c;
}

// ------------------------------------------------------------------ policies

std::size_t AgentObservation::state() const {
    const std::size_t p = pressure < 0.5 ? 0 : pressure < 1.5 ? 1 : 2;
    const std::size_t r = posting_rate < 1.0 ? 0 : posting_rate < 3.0 ? 1 : 2;
    const std::size_t s = neighborhood_sentiment < 0.1 ? 0 : neighborhood_sentiment < 0.4 ? 1 : 2;
    return p * 9 + r * 3 + s;
}

QLearningPolicy::QLearningPolicy(double epsilon, double learning_rate, double discount, Table initial)
    : epsilon_(epsilon), learning_rate_(learning_rate), discount_(discount), q_(initial) {}

QLearningPolicy::Table QLearningPolicy::prior() {
    // Rows per pressure bucket: Post, Follow, Like, Idle.
    static constexpr double kRows[3][kMoveCount] = {
        {10.0, 6.0, 5.0, 0.0},
        {4.0, 6.0, 5.0, 2.5},
        {-10.0, 1.5, 2.5, 5.0},
    };
    Table t{};
    for (std::size_t s = 0; s < kStateCount; ++s) {
        for (std::size_t m = 0; m < kMoveCount; ++m) t[s][m] = kRows[s / 9][m];
    }
    return t;
}

BotMove QLearningPolicy::choose(std::size_t state, Rng& rng) {
    if (rng.bernoulli(epsilon_)) return static_cast<BotMove>(rng.below(kMoveCount));
    const auto& row = q_.at(state);
    std::size_t best = 0;
    for (std::size_t m = 1; m < kMoveCount; ++m) {
        if (row[m] > row[best]) best = m;
    }
    return static_cast<BotMove>(best);
}

void QLearningPolicy::learn(std::size_t state, BotMove move, double reward, std::size_t next_state) {
    const auto& next = q_.at(next_state);
    const double target = reward + discount_ * *std::max_element(next.begin(), next.end());
    double& q = q_.at(state)[static_cast<std::size_t>(move)];
    q += learning_rate_ * (target - q);
}

std::unique_ptr<CampaignPolicy> QLearningPolicy::clone() const {
    return std::make_unique<QLearningPolicy>(*this);
}

BotMove FixedRatePolicy::choose(std::size_t, Rng& rng) {
    const double u = rng.uniform();
    if (u < mix_.post) return BotMove::Post;
    if (u < mix_.post + mix_.follow) return BotMove::Follow;
    if (u < mix_.post + mix_.follow + mix_.like) return BotMove::Like;
    return BotMove::Idle;
}

std::unique_ptr<CampaignPolicy> FixedRatePolicy::clone() const {
    return std::make_unique<FixedRatePolicy>(*this);
}

// ------------------------------------------------------------------ world

std::size_t WorldState::index_of(const AccountId& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw DataError("unknown account '" + id + "'");
    return it->second;
}

void WorldState::set_sentiment(std::size_t i, int topic, double v) {
    sentiment_.at(i).at(static_cast<std::size_t>(topic - 1)) = clamp_unit(v);
}

RewardSnapshot WorldState::snapshot() const {
    RewardSnapshot s;
    s.human.resize(accounts.size());
    s.human_followers.assign(accounts.size(), 0);
    s.status.resize(accounts.size());
    for (std::size_t i = 0; i < accounts.size(); ++i) {
        s.human[i] = !is_bot(i);
        s.status[i] = accounts[i].status;
        for (std::size_t f : followers[i]) {
            if (!is_bot(f)) ++s.human_followers[i];
        }
    }
    s.sentiment = sentiment_;
    return s;
}

Dataset WorldState::to_dataset() const {
    Dataset ds;
    ds.n_days = config.n_days;
    ds.steps_per_day = config.steps_per_day;
    ds.accounts = accounts;
    for (std::size_t i = 0; i < accounts.size(); ++i) {
        auto& a = ds.accounts[i];
        a.sentiment.clear();
        for (int t = 1; t <= config.n_campaigns; ++t) a.sentiment[t] = sentiment(i, t);
        a.metadata["followers"] = static_cast<double>(followers[i].size());
        a.metadata["following"] = static_cast<double>(following[i].size());
        a.metadata["posts"] = static_cast<double>(posts_by_author[i].size());
    }
    ds.events = events;
    ds.reports = reports;
    ds.reindex();
    return ds;
}

namespace {

std::unique_ptr<CampaignPolicy> make_policy(const SimConfig& c) {
    if (c.policy == PolicyKind::FixedRate) return std::make_unique<FixedRatePolicy>(c.fixed_bot_rates);
    return std::make_unique<QLearningPolicy>(c.epsilon, c.q_learning_rate, c.discount);
}

}  // namespace

WorldState init_world(const SimConfig& config) {
    config.validate();
    WorldState w;
    w.config = config;
    w.human_rng = Rng(config.seed, "humans");
    w.agent_rng = Rng(config.seed, "agents");
    w.report_rng = Rng(config.seed, "reports");
    Rng init(config.seed, "init");

    const int topics = config.n_campaigns;
    const double total_rate = config.human_rates.post + config.human_rates.like + config.human_rates.follow;
    const double max_activity = total_rate > 0 ? 1.0 / total_rate : 1.0;
    for (int i = 0; i < config.n_humans; ++i) {
        Account a;
        a.id = human_id(i);
        a.role = Role::Human;
        w.accounts.push_back(std::move(a));
        std::vector<double> row(static_cast<std::size_t>(topics));
        for (auto& v : row) v = init.uniform(-0.5, 0.5);
        w.sentiment_.push_back(std::move(row));
        w.activity.push_back(std::clamp(init.exponential(), kMinActivity, max_activity));
    }
    for (int c = 1; c <= config.n_campaigns; ++c) {
        CampaignState cs;
        cs.campaign = c;
        cs.policy = make_policy(config);
        cs.active_target = static_cast<std::size_t>(config.active_bots_per_campaign);
        for (int b = 0; b < SimConfig::kBotsPerCampaign; ++b) {
            Account a;
            a.id = bot_id(c, b);
            a.role = Role::Bot;
            a.campaign = c;
            a.status = b < config.active_bots_per_campaign ? Status::Active : Status::Dormant;
            cs.bots.push_back(w.accounts.size());
            w.accounts.push_back(std::move(a));
            std::vector<double> row(static_cast<std::size_t>(topics), 0.0);
            row[static_cast<std::size_t>(c - 1)] = 1.0;
            w.sentiment_.push_back(std::move(row));
            w.activity.push_back(1.0);
        }
        w.campaigns.push_back(std::move(cs));
    }
    const std::size_t n = w.accounts.size();
    for (std::size_t i = 0; i < n; ++i) w.index_.emplace(w.accounts[i].id, i);

    // Out-degree floor(m + 0.5 + U(-1.5, 1.5)) has mean m.
    w.following.assign(n, {});
    w.followers.assign(n, {});
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::size_t> pool;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i || w.accounts[j].status == Status::Dormant) continue;
            if (w.is_bot(i) && w.is_bot(j) && !config.allow_bot_to_bot) continue;
            pool.push_back(j);
        }
        const double draw = config.mean_initial_degree + 0.5 + init.uniform(-1.5, 1.5);
        const auto degree = std::min(pool.size(), static_cast<std::size_t>(std::max(0.0, std::floor(draw))));
        for (std::size_t d = 0; d < degree; ++d) {
            const std::size_t pick = d + init.below(pool.size() - d);
            std::swap(pool[d], pool[pick]);
            w.following[i].insert(pool[d]);
            w.followers[pool[d]].insert(i);
        }
    }
    w.posts_by_author.assign(n, {});
    w.exposure_today.assign(n, {});
    w.last_consumed_author.assign(n, std::nullopt);
    w.live_today.assign(n, false);

    std::vector<std::size_t> humans(static_cast<std::size_t>(config.n_humans));
    for (std::size_t i = 0; i < humans.size(); ++i) humans[i] = i;
    init.shuffle(humans);
    for (std::size_t r = 0; r < config.reporters.size(); ++r) {
        w.reporters.push_back(ReporterState{humans[r], config.reporters[r]});
    }

    w.initial = w.snapshot();
    w.initial_following = w.following;
    return w;
}

// ------------------------------------------------------------------ agents

AgentObservation observe(const WorldState& world, std::size_t campaign_index) {
    const CampaignState& c = world.campaigns.at(campaign_index);
    AgentObservation obs;
    std::set<std::size_t> audience;
    for (std::size_t b : c.bots) {
        const Status st = world.accounts[b].status;
        obs.bots.push_back({b, st, world.followers[b].size()});
        if (st == Status::Active) ++obs.active;
        if (st == Status::Dormant) ++obs.reserves;
        if (st != Status::Suspended) {
            for (std::size_t f : world.followers[b]) {
                if (!world.is_bot(f)) audience.insert(f);
            }
        }
    }
    obs.recent_suspensions = c.last_scan_suspensions;
    obs.pressure = c.pressure;

    const std::int64_t window_start = world.step - world.config.steps_per_day;
    std::size_t recent = 0;
    for (auto it = world.posts.rbegin(); it != world.posts.rend() && it->step >= window_start; ++it) {
        if (world.accounts[it->author].campaign == c.campaign) ++recent;
    }
    obs.posting_rate = static_cast<double>(recent) / static_cast<double>(std::max<std::size_t>(1, obs.active));

    double sum = 0;
    std::size_t count = 0;
    if (audience.empty()) {
        for (std::size_t i = 0; i < world.accounts.size(); ++i) {
            if (world.is_bot(i)) continue;
            sum += world.sentiment(i, c.campaign);
            ++count;
        }
    } else {
        for (std::size_t h : audience) sum += world.sentiment(h, c.campaign);
        count = audience.size();
    }
    obs.neighborhood_sentiment = count > 0 ? sum / static_cast<double>(count) : 0.0;
    return obs;
}

namespace {

std::optional<std::size_t> pick_follow_target(const WorldState& world, std::size_t bot, int campaign,
                                              Rng& rng) {
    std::vector<std::size_t> candidates;
    const bool teammates = world.config.allow_bot_to_bot && rng.bernoulli(kBotToBotShare);
    for (std::size_t j = 0; j < world.accounts.size(); ++j) {
        if (j == bot || world.accounts[j].status != Status::Active) continue;
        if (world.following[bot].count(j)) continue;
        if (teammates ? world.accounts[j].campaign == campaign : !world.is_bot(j)) candidates.push_back(j);
    }
    if (candidates.empty()) return std::nullopt;
    return candidates[rng.below(candidates.size())];
}

// Recent posts (last day) not written by `self`; humans' only when `humans_only`.
std::vector<std::size_t> recent_posts(const WorldState& world, std::size_t self, bool humans_only) {
    std::vector<std::size_t> out;
    const std::int64_t window_start = world.step - world.config.steps_per_day;
    for (std::size_t p = world.posts.size(); p-- > 0;) {
        const auto& post = world.posts[p];
        if (post.step < window_start) break;
        if (post.author == self || world.accounts[post.author].status == Status::Suspended) continue;
        if (humans_only && world.is_bot(post.author)) continue;
        out.push_back(p);
    }
    return out;
}

}  // namespace

std::vector<AgentAction> agent_act(CampaignState& campaign, const AgentObservation& obs,
                                   const WorldState& world, Rng& rng) {
    std::vector<AgentAction> actions;
    const std::size_t state = obs.state();
    for (const auto& b : obs.bots) {
        if (b.status != Status::Active) continue;
        AgentAction a;
        a.bot = b.account;
        if (!rng.bernoulli(world.config.bot_action_rate)) {
            actions.push_back(a);
            continue;
        }
        const BotMove move = campaign.policy->choose(state, rng);
        campaign.pending.emplace_back(state, move);
        switch (move) {
            case BotMove::Post:
                a.kind = Action::Post;
                a.polarity = kBotPolarityFloor + (1.0 - kBotPolarityFloor) * rng.uniform();
                break;
            case BotMove::Follow:
                if (auto t = pick_follow_target(world, b.account, campaign.campaign, rng)) {
                    a.kind = Action::Follow;
                    a.target_account = *t;
                }
                break;
            case BotMove::Like: {
                const auto posts = recent_posts(world, b.account, !world.config.allow_bot_to_bot);
                if (!posts.empty()) {
                    a.kind = Action::Like;
                    a.target_post = posts[rng.below(posts.size())];
                }
                break;
            }
            case BotMove::Idle:
                break;
        }
        actions.push_back(a);
    }
    if (obs.active < campaign.active_target) {
        std::size_t missing = campaign.active_target - obs.active;
        for (const auto& b : obs.bots) {
            if (missing == 0) break;
            if (b.status != Status::Dormant) continue;
            AgentAction a;
            a.bot = b.account;
            a.kind = Action::Activate;
            a.target_account = b.account;
            actions.push_back(a);
            --missing;
        }
    }
    return actions;
}

double compute_reward(const RewardSnapshot& before, const RewardSnapshot& after,
                      const CampaignState& campaign, const SimConfig& config) {
    const auto topic = static_cast<std::size_t>(campaign.campaign - 1);
    double new_followers = 0;
    double suspended = 0;
    for (std::size_t b : campaign.bots) {
        if (after.human_followers[b] > before.human_followers[b]) {
            new_followers += static_cast<double>(after.human_followers[b] - before.human_followers[b]);
        }
        if (before.status[b] != Status::Suspended && after.status[b] == Status::Suspended) ++suspended;
    }
    double infected = 0;
    double converted = 0;
    for (std::size_t i = 0; i < before.human.size(); ++i) {
        if (!before.human[i]) continue;
        const double p0 = before.sentiment[i][topic];
        const double p1 = after.sentiment[i][topic];
        if (p1 - p0 >= config.infection_delta) ++infected;
        if (p0 < config.conversion_threshold && p1 >= config.conversion_threshold) ++converted;
    }
    const Rewards& r = config.rewards;
    return r.activation * new_followers + r.infection * infected + r.termination * converted +
           r.suspension_penalty * suspended;
}

// ------------------------------------------------------------------ platform

std::vector<std::size_t> detector_scan(WorldState& world, const DetectorModel& model, double threshold) {
    const auto features = extract_features_until(world.accounts, world.events,
                                                 world.step + 1);
    std::vector<std::size_t> suspended;
    for (std::size_t i = 0; i < world.accounts.size(); ++i) {
        // Dormant accounts have never been live, so they are not scanned.
        if (world.accounts[i].status != Status::Active) continue;
        if (predict(model, features.at(world.accounts[i].id)) >= threshold) suspended.push_back(i);
    }
    for (std::size_t i : suspended) {
        world.accounts[i].status = Status::Suspended;
        InteractionEvent e;
        e.timestamp = world.step;
        e.day = world.day_of(world.step);
        e.actor = world.accounts[i].id;
        e.action = Action::Suspend;
        world.events.push_back(std::move(e));
    }
    return suspended;
}

std::vector<Report> generate_reports(WorldState& world, int day) {
    if (day < 1 || day > world.config.n_days) {
        throw std::invalid_argument("generate_reports: day " + std::to_string(day) + " out of range");
    }
    std::vector<Report> out;
    for (const auto& rep : world.reporters) {
        const auto consider = [&](std::size_t j) {
            if (j == rep.account || !world.live_today[j]) return;
            const double p = (world.is_bot(j) ? rep.spec.tpr : rep.spec.fpr) * rep.spec.report_rate;
            if (world.report_rng.bernoulli(p)) {
                out.push_back(Report{day, world.accounts[rep.account].id, world.accounts[j].id});
            }
        };
        if (rep.spec.exposure_only) {
            for (std::size_t j : world.exposure_today[rep.account]) consider(j);
        } else {
            for (std::size_t j = 0; j < world.accounts.size(); ++j) consider(j);
        }
    }
    world.reports.insert(world.reports.end(), out.begin(), out.end());
    return out;
}

// ------------------------------------------------------------------ stepping

namespace {

InteractionEvent make_event(const WorldState& w, std::size_t actor, Action action) {
    InteractionEvent e;
    e.timestamp = w.step;
    e.day = w.day_of(w.step);
    e.actor = w.accounts[actor].id;
    e.action = action;
    return e;
}

void add_follow(WorldState& w, std::size_t from, std::size_t to) {
    w.following[from].insert(to);
    w.followers[to].insert(from);
    auto e = make_event(w, from, Action::Follow);
    e.target = w.accounts[to].id;
    w.events.push_back(std::move(e));
    if (!w.is_bot(to)) w.exposure_today[to].insert(from);
}

void add_post(WorldState& w, std::size_t author, int topic, double polarity) {
    PostRecord p;
    p.author = author;
    p.topic = topic;
    p.polarity = clamp_unit(polarity);
    p.step = w.step;
    p.id = make_post_id(w.accounts[author].id, static_cast<std::int64_t>(w.posts_by_author[author].size()));
    w.posts_by_author[author].push_back(w.posts.size());
    auto e = make_event(w, author, Action::Post);
    e.polarity = p.polarity;
    e.topic = topic;
    w.events.push_back(std::move(e));
    w.posts.push_back(std::move(p));
}

void add_like(WorldState& w, std::size_t actor, std::size_t post) {
    auto e = make_event(w, actor, Action::Like);
    e.target = w.posts[post].id;
    w.events.push_back(std::move(e));
    const std::size_t author = w.posts[post].author;
    if (!w.is_bot(author)) w.exposure_today[author].insert(actor);
}

void apply_agent_action(WorldState& w, const CampaignState& c, const AgentAction& a) {
    switch (a.kind) {
        case Action::Post:
            add_post(w, a.bot, c.campaign, a.polarity);
            break;
        case Action::Follow:
            add_follow(w, a.bot, *a.target_account);
            if (!w.is_bot(*a.target_account)) w.pending_follow_backs.emplace_back(*a.target_account, a.bot);
            break;
        case Action::Like:
            add_like(w, a.bot, *a.target_post);
            break;
        case Action::Activate: {
            w.accounts[a.bot].status = Status::Active;
            w.live_today[a.bot] = true;
            auto e = make_event(w, a.bot, Action::Activate);
            e.target = w.accounts[a.bot].id;
            w.events.push_back(std::move(e));
            break;
        }
        default:
            break;  // Idle is not logged
    }
}

std::optional<std::size_t> human_follow_target(const WorldState& w, std::size_t h, Rng& rng) {
    if (rng.bernoulli(0.5)) {
        if (auto a = w.last_consumed_author[h]) {
            if (*a != h && w.accounts[*a].status == Status::Active && !w.following[h].count(*a)) return *a;
        }
    }
    std::vector<std::size_t> candidates;
    for (std::size_t j = 0; j < w.accounts.size(); ++j) {
        if (j != h && w.accounts[j].status == Status::Active && !w.following[h].count(j)) candidates.push_back(j);
    }
    if (candidates.empty()) return std::nullopt;
    return candidates[rng.below(candidates.size())];
}

void human_phase(WorldState& w) {
    Rng& rng = w.human_rng;
    const BehaviorRates& r = w.config.human_rates;
    for (auto [h, bot] : w.pending_follow_backs) {
        if (w.accounts[h].status == Status::Active && w.accounts[bot].status == Status::Active &&
            !w.following[h].count(bot) && rng.bernoulli(w.config.follow_back)) {
            add_follow(w, h, bot);
        }
    }
    w.pending_follow_backs.clear();
    for (std::size_t h = 0; h < w.accounts.size(); ++h) {
        if (w.is_bot(h) || w.accounts[h].status != Status::Active) continue;
        const double u = rng.uniform() / w.activity[h];
        if (u < r.post) {
            const int topic = 1 + static_cast<int>(rng.below(static_cast<std::size_t>(w.config.n_campaigns)));
            add_post(w, h, topic, w.sentiment(h, topic) + kHumanPolarityNoise * rng.normal());
        } else if (u < r.post + r.like) {
            std::vector<std::size_t> feed;
            for (std::size_t p : recent_posts(w, h, false)) {
                if (w.following[h].count(w.posts[p].author)) feed.push_back(p);
            }
            if (feed.empty()) feed = recent_posts(w, h, false);
            if (!feed.empty()) add_like(w, h, feed[rng.below(feed.size())]);
        } else if (u < r.post + r.like + r.follow) {
            if (auto t = human_follow_target(w, h, rng)) add_follow(w, h, *t);
        }
    }
}

// Every post written this step reaches the author's live human followers in
// posting order; each consumption is one EWMA update.
void deliver_posts(WorldState& w, std::size_t first_post) {
    const double alpha = w.config.ewma_alpha;
    for (std::size_t p = first_post; p < w.posts.size(); ++p) {
        const PostRecord& post = w.posts[p];
        for (std::size_t f : w.followers[post.author]) {
            if (w.is_bot(f) || w.accounts[f].status == Status::Suspended) continue;
            const double before = w.sentiment(f, post.topic);
            w.set_sentiment(f, post.topic, alpha * before + (1.0 - alpha) * post.polarity);
            w.exposure_today[f].insert(post.author);
            w.last_consumed_author[f] = post.author;
        }
    }
}

}  // namespace

void step(WorldState& world) {
    if (world.step % world.config.steps_per_day == 0) {
        for (auto& s : world.exposure_today) s.clear();
        for (std::size_t i = 0; i < world.accounts.size(); ++i) {
            world.live_today[i] = world.accounts[i].status == Status::Active;
        }
    }
    const RewardSnapshot before = world.snapshot();
    const std::size_t first_post = world.posts.size();

    for (std::size_t ci = 0; ci < world.campaigns.size(); ++ci) {
        auto& c = world.campaigns[ci];
        const AgentObservation obs = observe(world, ci);
        for (const auto& a : agent_act(c, obs, world, world.agent_rng)) apply_agent_action(world, c, a);
    }
    human_phase(world);
    deliver_posts(world, first_post);

    const bool scan_now = world.config.scan_enabled && world.detector &&
                          (world.step + 1) % world.config.effective_scan_period() == 0;
    if (scan_now) {
        const auto suspended = detector_scan(world, *world.detector, world.config.scan_threshold);
        for (auto& c : world.campaigns) {
            std::size_t n = 0;
            for (std::size_t i : suspended) n += world.accounts[i].campaign == c.campaign ? 1 : 0;
            c.last_scan_suspensions = n;
            c.total_suspensions += n;
            c.pressure = 0.5 * c.pressure + static_cast<double>(n);
            ++c.scans;
        }
    }

    const RewardSnapshot after = world.snapshot();
    std::vector<double> rewards;
    for (std::size_t ci = 0; ci < world.campaigns.size(); ++ci) {
        auto& c = world.campaigns[ci];
        const double r = compute_reward(before, after, c, world.config);
        c.total_reward += r;
        rewards.push_back(r);
        if (!c.pending.empty()) {
            const std::size_t next = observe(world, ci).state();
            const double share = r / static_cast<double>(c.pending.size());
            for (auto [s, m] : c.pending) c.policy->learn(s, m, share, next);
            c.pending.clear();
        }
    }
    world.reward_log.push_back(std::move(rewards));
    ++world.step;
}

// ------------------------------------------------------------------ audit

std::vector<double> audit_rewards(const WorldState& world) {
    const std::size_t n = world.accounts.size();
    RewardSnapshot state = world.initial;
    std::vector<std::set<std::size_t>> followers(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j : world.initial_following[i]) followers[j].insert(i);
    }
    const double alpha = world.config.ewma_alpha;
    std::vector<double> totals(world.campaigns.size(), 0.0);

    std::size_t e = 0;
    for (std::int64_t t = 0; t < world.step; ++t) {
        const RewardSnapshot before = state;
        std::vector<std::pair<std::size_t, const InteractionEvent*>> posts;
        std::vector<std::size_t> suspends;
        for (; e < world.events.size() && world.events[e].timestamp == t; ++e) {
            const auto& ev = world.events[e];
            const std::size_t actor = world.index_of(ev.actor);
            switch (ev.action) {
                case Action::Follow: {
                    const std::size_t target = world.index_of(*ev.target);
                    if (followers[target].insert(actor).second && state.human[actor]) {
                        ++state.human_followers[target];
                    }
                    break;
                }
                case Action::Activate:
                    state.status[actor] = Status::Active;
                    break;
                case Action::Post:
                    posts.emplace_back(actor, &ev);
                    break;
                case Action::Suspend:
                    suspends.push_back(actor);
                    break;
                default:
                    break;
            }
        }
        for (const auto& [author, ev] : posts) {
            const auto topic = static_cast<std::size_t>(*ev->topic - 1);
            for (std::size_t f : followers[author]) {
                if (!state.human[f] || state.status[f] == Status::Suspended) continue;
                double& p = state.sentiment[f][topic];
                p = clamp_unit(alpha * p + (1.0 - alpha) * *ev->polarity);
            }
        }
        for (std::size_t s : suspends) state.status[s] = Status::Suspended;
        for (std::size_t ci = 0; ci < world.campaigns.size(); ++ci) {
            totals[ci] += compute_reward(before, state, world.campaigns[ci], world.config);
        }
    }
    return totals;
}

// ------------------------------------------------------------------ runs

TrainingSet benchmark_corpus(const SimConfig& config) {
    WorldState w = init_world(benchmark_profile(config));
    const std::int64_t total = static_cast<std::int64_t>(w.config.n_days) * w.config.steps_per_day;
    while (w.step < total) step(w);
    const auto features = extract_features_until(w.accounts, w.events, total);
    TrainingSet ts;
    ts.schema = *default_feature_schema();
    for (const auto& a : w.accounts) ts.add(features.at(a.id), a.role);
    return ts;
}

DetectorModel train_platform_detector(const SimConfig& config) {
    SimConfig c = config;
    c.seed = derive_seed(config.seed, "platform-detector");
    BaggedTreesParams params;
    params.n_trees = 50;
    params.seed = derive_seed(config.seed, "platform-trees");
    return train_bagged_trees(benchmark_corpus(c), params);
}

Experiment run_world(const SimConfig& config) {
    WorldState w = init_world(config);
    if (config.scan_enabled) w.detector = std::make_shared<const DetectorModel>(train_platform_detector(config));
    for (int day = 1; day <= config.n_days; ++day) {
        for (int s = 0; s < config.steps_per_day; ++s) step(w);
        generate_reports(w, day);
    }
    Dataset ds = w.to_dataset();
    return Experiment{std::move(ds), std::move(w)};
}

Dataset run_experiment(const SimConfig& config) { return run_world(config).dataset; }

}  // namespace botlab::sim
