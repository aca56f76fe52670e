#pragma once

// Agent-based replica of the deployment: a follow graph of humans and
// campaign bots, EWMA sentiment updates from consumed posts, reward-driven
// campaign agents with dormant reserves, periodic detector scans that
// suspend flagged accounts, and daily reports from simulated reporters.

#include "botlab/core_data.hpp"
#include "botlab/detectors.hpp"
#include "botlab/rng.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace botlab::sim {

struct BehaviorRates {
    double post = 0.02;
    double like = 0.06;
    double follow = 0.006;
    // idle takes the remaining probability mass

    void validate(const char* what) const;
};

struct Rewards {
    double activation = 1.0;          // per new human follower
    double infection = 1.0;           // per human moved >= infection_delta toward the target
    double termination = 5.0;         // per human crossing conversion_threshold
    double suspension_penalty = -5.0; // per suspended campaign bot
};

// Per-day probabilities: an exposed bot is reported with tpr * report_rate,
// an exposed human with fpr * report_rate. Only accounts that were live
// during the day can be exposed, including ones suspended by the day's scan.
struct ReporterSpec {
    double report_rate = 1.0;
    double tpr = 0.5;
    double fpr = 0.05;
    // true: only accounts that liked/followed the reporter that day, or whose
    // posts the reporter consumed; false: every account.
    bool exposure_only = false;
};

// Heterogeneous pool whose reporter_f1_table mean lands near 0.533 on
// default-sized runs. Skills are evenly spread from a noisy reporter (tpr 0.4,
// fpr 0.012) to a sharp one (tpr 0.75, fpr 0.0002). Per-reporter F1 does not
// depend on the pool size; the small default keeps low report counts populated.
std::vector<ReporterSpec> calibrated_reporter_pool(std::size_t n);

// Every reporter reports every exposed bot and no human.
std::vector<ReporterSpec> perfect_reporter_pool(std::size_t n);

enum class PolicyKind { QLearning, FixedRate };

struct SimConfig {
    int n_humans = 225;
    int n_campaigns = 4;
    int active_bots_per_campaign = 5;
    int reserve_bots_per_campaign = 15;
    int n_days = 5;
    int steps_per_day = 48;
    double mean_initial_degree = 4.5;
    double ewma_alpha = 0.9;
    Rewards rewards;
    double infection_delta = 0.1;
    double conversion_threshold = 0.8;
    int scan_period_steps = 0;  // 0 means once per simulated day
    double scan_threshold = 0.5;
    bool scan_enabled = true;
    BehaviorRates human_rates;
    double follow_back = 0.3;  // chance a human follows back an account that followed it

    // Campaign agents.
    PolicyKind policy = PolicyKind::QLearning;
    double bot_action_rate = 0.15;  // chance an active bot acts in a step
    double epsilon = 0.1;
    double q_learning_rate = 0.05;
    double discount = 0.9;
    BehaviorRates fixed_bot_rates{0.5, 0.3, 0.2};  // FixedRate policy mix of acting bots
    bool allow_bot_to_bot = true;

    std::vector<ReporterSpec> reporters = calibrated_reporter_pool(kDefaultReporters);
    std::uint64_t seed = 0;

    static constexpr std::size_t kDefaultReporters = 3;
    static constexpr int kBotsPerCampaign = 20;

    int effective_scan_period() const { return scan_period_steps > 0 ? scan_period_steps : steps_per_day; }
    int n_bots() const { return n_campaigns * (active_bots_per_campaign + reserve_bots_per_campaign); }
    int n_accounts() const { return n_humans + n_bots(); }
    // Throws std::invalid_argument naming the offending field.
    void validate() const;
};

// Stand-in for external benchmark corpora: non-adaptive bots all active
// from the start, shifted human rates, no scans and no reporters.
SimConfig benchmark_profile(const SimConfig& base);

// ------------------------------------------------------------------ state

enum class BotMove { Post = 0, Follow = 1, Like = 2, Idle = 3 };
inline constexpr std::size_t kMoveCount = 4;
inline constexpr std::size_t kStateCount = 27;

struct AgentObservation {
    struct Bot {
        std::size_t account = 0;
        Status status = Status::Dormant;
        std::size_t followers = 0;
    };
    std::vector<Bot> bots;
    std::size_t active = 0;
    std::size_t reserves = 0;
    std::size_t recent_suspensions = 0;     // suspended in the latest scan
    double pressure = 0;                    // decayed suspensions per scan window
    double posting_rate = 0;                // posts per active bot over the last day
    double neighborhood_sentiment = 0;      // mean target-topic sentiment of exposed humans

    // Discretised Q-learning state in [0, 27).
    std::size_t state() const;
};

struct AgentAction {
    std::size_t bot = 0;
    Action kind = Action::Idle;
    std::optional<std::size_t> target_account;
    std::optional<std::size_t> target_post;
    double polarity = 0;
};

class CampaignPolicy {
public:
    virtual ~CampaignPolicy() = default;
    virtual BotMove choose(std::size_t state, Rng& rng) = 0;
    virtual void learn(std::size_t state, BotMove move, double reward, std::size_t next_state) = 0;
    virtual std::unique_ptr<CampaignPolicy> clone() const = 0;
};

// Epsilon-greedy tabular Q-learner. Ties in the greedy step go to the lowest
// move index.
class QLearningPolicy : public CampaignPolicy {
public:
    using Table = std::array<std::array<double, kMoveCount>, kStateCount>;

    QLearningPolicy(double epsilon, double learning_rate, double discount, Table initial = prior());

    BotMove choose(std::size_t state, Rng& rng) override;
    void learn(std::size_t state, BotMove move, double reward, std::size_t next_state) override;
    std::unique_ptr<CampaignPolicy> clone() const override;

    const Table& table() const { return q_; }
    // Offline-pretrained values: posting is preferred while no campaign bots
    // are being suspended and loses value as detector pressure rises.
    static Table prior();

private:
    double epsilon_, learning_rate_, discount_;
    Table q_;
};

class FixedRatePolicy : public CampaignPolicy {
public:
    explicit FixedRatePolicy(BehaviorRates mix) : mix_(mix) {}
    BotMove choose(std::size_t state, Rng& rng) override;
    void learn(std::size_t, BotMove, double, std::size_t) override {}
    std::unique_ptr<CampaignPolicy> clone() const override;

private:
    BehaviorRates mix_;
};

struct PostRecord {
    std::size_t author = 0;
    int topic = 0;
    double polarity = 0;
    std::int64_t step = 0;
    std::string id;
};

struct CampaignState {
    int campaign = 1;  // also the campaign's target topic
    std::vector<std::size_t> bots;
    std::unique_ptr<CampaignPolicy> policy;
    std::size_t active_target = 5;  // reactivate reserves below this many actives
    std::size_t last_scan_suspensions = 0;
    std::size_t total_suspensions = 0;
    std::size_t scans = 0;
    double pressure = 0;  // halves every scan, plus that scan's suspensions
    double total_reward = 0;
    // Pending Q updates from the current step.
    std::vector<std::pair<std::size_t, BotMove>> pending;
};

struct ReporterState {
    std::size_t account = 0;
    ReporterSpec spec;
};

// Inputs to compute_reward captured at a step boundary.
struct RewardSnapshot {
    std::vector<bool> human;
    std::vector<std::vector<double>> sentiment;  // [account][topic-1], humans only meaningful
    std::vector<std::size_t> human_followers;    // per account
    std::vector<Status> status;
};

class WorldState {
public:
    SimConfig config;
    std::int64_t step = 0;
    std::vector<Account> accounts;
    std::vector<std::set<std::size_t>> following;  // out-edges
    std::vector<std::set<std::size_t>> followers;  // in-edges
    std::vector<PostRecord> posts;
    std::vector<std::vector<std::size_t>> posts_by_author;
    std::vector<InteractionEvent> events;
    std::vector<Report> reports;
    std::vector<CampaignState> campaigns;
    std::vector<ReporterState> reporters;
    std::vector<std::vector<double>> reward_log;  // [step][campaign index]
    std::shared_ptr<const DetectorModel> detector;
    RewardSnapshot initial;  // state right after init_world
    std::vector<std::set<std::size_t>> initial_following;

    Rng human_rng{0}, agent_rng{0}, report_rng{0};

    bool is_bot(std::size_t i) const { return accounts[i].role == Role::Bot; }
    int day_of(std::int64_t s) const { return static_cast<int>(s / config.steps_per_day) + 1; }
    std::size_t index_of(const AccountId& id) const;
    const std::vector<double>& sentiment_row(std::size_t i) const { return sentiment_[i]; }
    double sentiment(std::size_t i, int topic) const { return sentiment_[i][static_cast<std::size_t>(topic - 1)]; }
    void set_sentiment(std::size_t i, int topic, double v);

    RewardSnapshot snapshot() const;
    Dataset to_dataset() const;

    // Per human: accounts that liked/followed it or whose posts it consumed
    // during the current day.
    std::vector<std::set<std::size_t>> exposure_today;
    std::vector<std::optional<std::size_t>> last_consumed_author;
    std::vector<bool> live_today;
    // Human activity multipliers (unit exponential, clamped); rates scale with them.
    std::vector<double> activity;  // Active at some point during the current day
    std::vector<std::pair<std::size_t, std::size_t>> pending_follow_backs;  // (human, bot that followed it)

private:
    friend WorldState init_world(const SimConfig& config);
    friend void step(WorldState& world);
    std::vector<std::vector<double>> sentiment_;
    std::map<AccountId, std::size_t> index_;
};

WorldState init_world(const SimConfig& config);

// Advances one step: campaign agents, then humans, then a detector scan on
// scan-period boundaries, then rewards and Q updates. Reports are not
// generated here (see run_experiment).
void step(WorldState& world);

AgentObservation observe(const WorldState& world, std::size_t campaign_index);

std::vector<AgentAction> agent_act(CampaignState& campaign, const AgentObservation& obs,
                                   const WorldState& world, Rng& rng);

double compute_reward(const RewardSnapshot& before, const RewardSnapshot& after,
                      const CampaignState& campaign, const SimConfig& config);

// Scores every non-suspended account on features up to the current step and
// suspends those at or above the threshold, appending suspend events.
// Returns the suspended account indices.
std::vector<std::size_t> detector_scan(WorldState& world, const DetectorModel& model, double threshold);

std::vector<Report> generate_reports(WorldState& world, int day);

// Per-campaign reward totals recomputed from the initial snapshot and the
// event log alone.
std::vector<double> audit_rewards(const WorldState& world);

// Trains the platform detector on a benchmark-profile run with a derived seed.
DetectorModel train_platform_detector(const SimConfig& config);

struct Experiment {
    Dataset dataset;
    WorldState world;
};

// Runs n_days * steps_per_day steps with reports at the end of every day.
Experiment run_world(const SimConfig& config);
Dataset run_experiment(const SimConfig& config);

// Ground-truthed benchmark corpus: features at the final day plus labels.
TrainingSet benchmark_corpus(const SimConfig& config);

}  // namespace botlab::sim
