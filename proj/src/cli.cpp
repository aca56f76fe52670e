#include "botlab/cli.hpp"

#include "botlab/aggregation.hpp"
#include "botlab/artifact.hpp"
#include "botlab/cross_validation.hpp"
#include "botlab/csv.hpp"
#include "botlab/detectors.hpp"
#include "botlab/features.hpp"
#include "botlab/metrics.hpp"
#include "botlab/retraining.hpp"
#include "botlab/simulator.hpp"
#include "botlab/stats.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>

namespace botlab::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Common {
    std::uint64_t seed = 0;
    std::string out;
    bool verbose = false;
};

struct Context {
    std::ostream& out;
    std::ostream& err;
    CLI::App* sub = nullptr;
    Common common;
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

    void log(const std::string& msg) const {
        if (!common.verbose) return;
        const double t = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        out << "[" << sub->get_name() << " " << format_real(std::round(t * 100) / 100) << "s] " << msg << '\n';
    }

    fs::path out_dir() const {
        if (!common.out.empty()) return common.out;
        const char* root = std::getenv(kOutRootEnv);
        return fs::path(root && *root ? root : "runs") / sub->get_name();
    }

    json manifest_fields(json config) const {
        json m;
        m["command"] = sub->get_name();
        m["seed"] = common.seed;
        m["config"] = std::move(config);
        // Unset string and list options serialise as key="", which reads back as
        // an explicit empty value; dropping them restores the default.
        std::istringstream lines(sub->config_to_str(true, false));
        std::string toml, line;
        while (std::getline(lines, line)) {
            if (!line.ends_with("=\"\"")) toml += line + '\n';
        }
        m["config_toml"] = toml;
        return m;
    }
};

// Reads TOML keys at file top level as options of the subcommand being run.
class SubcommandToml : public CLI::ConfigTOML {
  public:
    explicit SubcommandToml(const CLI::App& app) : app_(app) {}

    std::vector<CLI::ConfigItem> from_config(std::istream& in) const override {
        auto items = CLI::ConfigTOML::from_config(in);
        const auto subs = app_.get_subcommands();
        if (subs.empty()) return items;
        for (auto& item : items) {
            if (item.parents.empty()) item.parents = {subs.front()->get_name()};
        }
        return items;
    }

  private:
    const CLI::App& app_;
};

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--seed", c.seed, "Run seed")->capture_default_str();
    sub->add_option("--out", c.out, std::string("Output directory (default $") + kOutRootEnv + "/<command> or runs/<command>)")
        ->configurable(false);
    sub->add_flag("--verbose,-v", c.verbose, "Print progress")->configurable(false);
}

std::string fmt(double x) { return format_real(x); }
std::string fmt(std::size_t x) { return std::to_string(x); }

std::vector<std::string> metric_cells(const ConfusionCounts& c, const ClassMetrics& m) {
    return {fmt(c.tp), fmt(c.fp), fmt(c.fn), fmt(c.tn), fmt(m.precision), fmt(m.recall), fmt(m.f1), fmt(m.accuracy)};
}

const std::vector<std::string> kMetricHeader{"tp", "fp", "fn", "tn", "precision", "recall", "f1", "accuracy"};

std::vector<std::string> with_metrics(std::vector<std::string> lead) {
    lead.insert(lead.end(), kMetricHeader.begin(), kMetricHeader.end());
    return lead;
}

std::vector<std::string> row_with(std::vector<std::string> lead, const ConfusionCounts& c) {
    auto cells = metric_cells(c, bot_class_metrics(c));
    lead.insert(lead.end(), cells.begin(), cells.end());
    return lead;
}

Dataset load_with_predictions(const std::string& dir, const std::vector<std::string>& prediction_files) {
    Dataset ds = load_dataset_dir(dir);
    for (const auto& f : prediction_files) {
        for (auto& [name, set] : load_predictions(f)) {
            if (!ds.external_predictions.emplace(name, std::move(set)).second) {
                throw DataError("prediction source '" + name + "' defined twice");
            }
        }
    }
    ds.validate();
    return ds;
}

std::vector<double> parse_weight_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            out.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw std::invalid_argument("--weights: '" + item + "' is not a number");
        }
    }
    return out;
}

json grid_json(const std::vector<double>& grid) {
    json g;
    g["min"] = grid.front();
    g["max"] = grid.back();
    g["size"] = grid.size();
    g["values"] = grid;
    return g;
}

// ------------------------------------------------------------------ simulate

struct SimulateArgs {
    sim::SimConfig cfg;
    int active_bots = 5;
    std::size_t reporters = sim::SimConfig::kDefaultReporters;
    std::string pool = "calibrated";
    bool exposure_only = false;
    bool no_scan = false;
    bool no_bot_to_bot = false;
    std::string policy = "q";
};

void register_simulate(CLI::App& app, SimulateArgs& a) {
    auto* s = app.add_subcommand("simulate", "Run the agent-based simulation and write a dataset");
    auto& c = a.cfg;
    s->add_option("--humans", c.n_humans)->capture_default_str();
    s->add_option("--campaigns", c.n_campaigns)->capture_default_str();
    s->add_option("--active-bots", a.active_bots, "Active bots per campaign; the rest of 20 start dormant")
        ->capture_default_str();
    s->add_option("--days", c.n_days)->capture_default_str();
    s->add_option("--steps-per-day", c.steps_per_day)->capture_default_str();
    s->add_option("--degree", c.mean_initial_degree, "Mean initial out-degree")->capture_default_str();
    s->add_option("--alpha", c.ewma_alpha, "EWMA sentiment weight")->capture_default_str();
    s->add_option("--infection-delta", c.infection_delta)->capture_default_str();
    s->add_option("--conversion-threshold", c.conversion_threshold)->capture_default_str();
    s->add_option("--r-activation", c.rewards.activation)->capture_default_str();
    s->add_option("--r-infection", c.rewards.infection)->capture_default_str();
    s->add_option("--r-termination", c.rewards.termination)->capture_default_str();
    s->add_option("--r-suspension", c.rewards.suspension_penalty)->capture_default_str();
    s->add_option("--scan-period", c.scan_period_steps, "Steps between scans (0 = once per day)")
        ->capture_default_str();
    s->add_option("--scan-threshold", c.scan_threshold)->capture_default_str();
    s->add_flag("--no-scan", a.no_scan, "Disable detector scans");
    s->add_option("--human-post", c.human_rates.post)->capture_default_str();
    s->add_option("--human-like", c.human_rates.like)->capture_default_str();
    s->add_option("--human-follow", c.human_rates.follow)->capture_default_str();
    s->add_option("--follow-back", c.follow_back)->capture_default_str();
    s->add_option("--policy", a.policy, "Campaign policy: q or fixed")
        ->check(CLI::IsMember({"q", "fixed"}))
        ->capture_default_str();
    s->add_option("--bot-action-rate", c.bot_action_rate)->capture_default_str();
    s->add_option("--epsilon", c.epsilon)->capture_default_str();
    s->add_option("--q-learning-rate", c.q_learning_rate)->capture_default_str();
    s->add_option("--discount", c.discount)->capture_default_str();
    s->add_flag("--no-bot-to-bot", a.no_bot_to_bot, "Forbid bots interacting with bots");
    s->add_option("--reporters", a.reporters, "Number of simulated reporters")->capture_default_str();
    s->add_option("--reporter-pool", a.pool, "calibrated or perfect")
        ->check(CLI::IsMember({"calibrated", "perfect"}))
        ->capture_default_str();
    s->add_flag("--exposure-only", a.exposure_only, "Reporters only judge accounts they interacted with");
}

json sim_config_json(const sim::SimConfig& c) {
    json j;
    j["n_humans"] = c.n_humans;
    j["n_campaigns"] = c.n_campaigns;
    j["active_bots_per_campaign"] = c.active_bots_per_campaign;
    j["reserve_bots_per_campaign"] = c.reserve_bots_per_campaign;
    j["n_days"] = c.n_days;
    j["steps_per_day"] = c.steps_per_day;
    j["mean_initial_degree"] = c.mean_initial_degree;
    j["ewma_alpha"] = c.ewma_alpha;
    j["rewards"] = {{"activation", c.rewards.activation},
                    {"infection", c.rewards.infection},
                    {"termination", c.rewards.termination},
                    {"suspension_penalty", c.rewards.suspension_penalty}};
    j["infection_delta"] = c.infection_delta;
    j["conversion_threshold"] = c.conversion_threshold;
    j["scan_period_steps"] = c.effective_scan_period();
    j["scan_threshold"] = c.scan_threshold;
    j["scan_enabled"] = c.scan_enabled;
    j["human_rates"] = {{"post", c.human_rates.post}, {"like", c.human_rates.like}, {"follow", c.human_rates.follow}};
    j["follow_back"] = c.follow_back;
    j["policy"] = c.policy == sim::PolicyKind::QLearning ? "q" : "fixed";
    j["bot_action_rate"] = c.bot_action_rate;
    j["epsilon"] = c.epsilon;
    j["q_learning_rate"] = c.q_learning_rate;
    j["discount"] = c.discount;
    j["allow_bot_to_bot"] = c.allow_bot_to_bot;
    json pool = json::array();
    for (const auto& r : c.reporters) {
        pool.push_back({{"report_rate", r.report_rate}, {"tpr", r.tpr}, {"fpr", r.fpr}, {"exposure_only", r.exposure_only}});
    }
    j["reporters"] = pool;
    return j;
}

int cmd_simulate(Context& ctx, SimulateArgs& a) {
    sim::SimConfig c = a.cfg;
    c.seed = ctx.common.seed;
    c.active_bots_per_campaign = a.active_bots;
    c.reserve_bots_per_campaign = sim::SimConfig::kBotsPerCampaign - a.active_bots;
    c.scan_enabled = !a.no_scan;
    c.allow_bot_to_bot = !a.no_bot_to_bot;
    c.policy = a.policy == "fixed" ? sim::PolicyKind::FixedRate : sim::PolicyKind::QLearning;
    c.reporters = a.pool == "perfect" ? sim::perfect_reporter_pool(a.reporters) : sim::calibrated_reporter_pool(a.reporters);
    for (auto& r : c.reporters) r.exposure_only = a.exposure_only;
    c.validate();

    ctx.log("simulating " + std::to_string(c.n_accounts()) + " accounts over " + std::to_string(c.n_days) + " days");
    auto run = sim::run_world(c);
    const auto audit = sim::audit_rewards(run.world);

    Table campaigns{"campaigns", {"campaign", "total_reward", "audited_reward", "suspensions", "activated"}, {}};
    for (std::size_t i = 0; i < run.world.campaigns.size(); ++i) {
        const auto& cs = run.world.campaigns[i];
        std::size_t activated = 0;
        for (std::size_t b : cs.bots) activated += run.world.accounts[b].status != Status::Dormant;
        campaigns.rows.push_back({std::to_string(cs.campaign), fmt(cs.total_reward), fmt(audit[i]),
                                  fmt(cs.total_suspensions), fmt(activated)});
    }

    const fs::path dir = ctx.out_dir();
    save_dataset(run.dataset, dir);
    json fields = ctx.manifest_fields(sim_config_json(c));
    fields["dataset"] = {{"n_days", c.n_days},
                         {"steps_per_day", c.steps_per_day},
                         {"n_accounts", run.dataset.accounts.size()},
                         {"n_bots", run.dataset.bot_count()},
                         {"n_events", run.dataset.events.size()},
                         {"n_reports", run.dataset.reports.size()}};
    write_run_artifact({campaigns}, fields, dir);
    ctx.log("wrote " + dir.string());
    return 0;
}

// ------------------------------------------------------------------ detect

struct DetectArgs {
    std::string data;
    std::vector<std::string> detectors{"trees", "moe"};
    std::string train = "benchmark";
    int day = 0;
    bool save_models = false;
};

void register_detect(CLI::App& app, DetectArgs& a) {
    auto* s = app.add_subcommand("detect", "Train detectors and score every account");
    s->add_option("--data", a.data, "Dataset directory")->required();
    s->add_option("--detectors", a.detectors, "trees, moe")->delimiter(',')->capture_default_str();
    s->add_option("--train", a.train, "benchmark: simulated benchmark corpus; data: the dataset's own labels")
        ->check(CLI::IsMember({"benchmark", "data"}))
        ->capture_default_str();
    s->add_option("--day", a.day, "Score features up to this day (0 = last day)")->capture_default_str();
    s->add_flag("--save-models", a.save_models, "Also write model_<name>.json");
}

sim::SimConfig benchmark_base(const Dataset& ds, std::uint64_t seed) {
    sim::SimConfig c;
    c.n_days = ds.n_days;
    c.steps_per_day = ds.steps_per_day;
    c.seed = seed;
    return c;
}

int cmd_detect(Context& ctx, DetectArgs& a) {
    Dataset ds = load_with_predictions(a.data, {});
    const int day = a.day == 0 ? ds.n_days : a.day;
    TrainingSet train;
    if (a.train == "benchmark") {
        ctx.log("building benchmark corpus");
        train = sim::benchmark_corpus(benchmark_base(ds, derive_seed(ctx.common.seed, "detect-benchmark")));
    } else {
        for (const auto& [id, fv] : extract_all_features(ds, ds.n_days)) train.add(fv, ds.find(id)->role);
    }
    const auto features = extract_all_features(ds, day);
    const Labels labels = ds.labels();
    const AccountSet universe = ds.universe();

    std::vector<PredictionSet> sets;
    Table metrics{"detect_metrics", with_metrics({"detector"}), {}};
    const fs::path dir = ctx.out_dir();
    for (const auto& name : a.detectors) {
        DetectorSpec spec;
        spec.kind = name == "moe" ? DetectorKind::MixtureOfExperts : parse_detector_kind(name);
        ctx.log("training " + name);
        const DetectorModel model = train_detector(spec, train, derive_seed(ctx.common.seed, name));
        if (a.save_models) {
            fs::create_directories(dir);
            save_model(model, dir / ("model_" + name + ".json"));
        }
        PredictionSet ps = predict_all(model, features, name);
        AccountSet flags;
        for (const auto& [id, p] : ps.scores) {
            if (p >= 0.5) flags.insert(id);
        }
        metrics.rows.push_back(row_with({name}, confusion(flags, labels, universe)));
        sets.push_back(std::move(ps));
    }
    fs::create_directories(dir);
    save_predictions(sets, dir / "predictions.csv");
    json cfg{{"data", a.data}, {"detectors", a.detectors}, {"train", a.train}, {"day", day}, {"flag_threshold", 0.5}};
    write_run_artifact({metrics}, ctx.manifest_fields(cfg), dir);
    return 0;
}

// ------------------------------------------------------------------ evaluate

struct EvaluateArgs {
    std::string data;
    std::string flags_file;
    std::string predictions_file;
    std::string source;
    double threshold = 0.5;
    std::string reports = "quality";
    std::size_t k = 1;
    double tau = kDefaultTau;
    bool tau_from_mean = false;
    std::string mode = "overall";
};

void register_evaluate(CLI::App& app, EvaluateArgs& a) {
    auto* s = app.add_subcommand("evaluate", "Score flags, detector predictions or human reports against labels");
    s->add_option("--data", a.data, "Dataset directory")->required();
    auto* f = s->add_option("--flags", a.flags_file, "flags.csv (account,flag,score)");
    auto* p = s->add_option("--predictions", a.predictions_file, "predictions.csv (source,account,probability)");
    f->excludes(p);
    s->add_option("--source", a.source, "Prediction source to evaluate (default: every source)");
    s->add_option("--threshold", a.threshold, "Probability threshold for predictions")->capture_default_str();
    s->add_option("--reports", a.reports, "Human reports aggregation: quality or count")
        ->check(CLI::IsMember({"quality", "count"}))
        ->capture_default_str();
    s->add_option("--k", a.k, "Count-based report threshold")->capture_default_str();
    s->add_option("--tau", a.tau, "Quality-weighted threshold")->capture_default_str();
    s->add_flag("--tau-from-mean", a.tau_from_mean, "Use the mean reporter F1 as tau");
    s->add_option("--mode", a.mode, "overall, day (day-specific reports) or cumulative")
        ->check(CLI::IsMember({"overall", "day", "cumulative"}))
        ->capture_default_str();
}

AccountSet read_flags_file(const std::string& path, const AccountSet& universe) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    AccountSet flags;
    for (const auto& row : read_csv(in, fs::path(path).filename().string(), {"account", "flag", "score"})) {
        if (!universe.count(row.fields[0])) throw DataError(row.where() + ": unknown account '" + row.fields[0] + "'");
        if (parse_int_field(row, 1) != 0) flags.insert(row.fields[0]);
    }
    return flags;
}

int cmd_evaluate(Context& ctx, EvaluateArgs& a) {
    const Dataset ds = load_with_predictions(a.data, {});
    const Labels labels = ds.labels();
    const AccountSet universe = ds.universe();
    std::vector<Table> tables;
    json cfg{{"data", a.data}, {"mode", a.mode}};

    if (!a.flags_file.empty() || !a.predictions_file.empty()) {
        if (a.mode != "overall") throw std::invalid_argument("--mode day/cumulative applies to human reports only");
        Table t{"metrics", with_metrics({"source"}), {}};
        if (!a.flags_file.empty()) {
            t.rows.push_back(row_with({"flags"}, confusion(read_flags_file(a.flags_file, universe), labels, universe)));
            cfg["flags"] = a.flags_file;
        } else {
            for (const auto& [name, ps] : load_predictions(a.predictions_file)) {
                if (!a.source.empty() && name != a.source) continue;
                AccountSet flags;
                for (const auto& [id, p] : ps.scores) {
                    if (!universe.count(id)) throw DataError("predictions: unknown account '" + id + "'");
                    if (reaches(p, a.threshold)) flags.insert(id);
                }
                t.rows.push_back(row_with({name}, confusion(flags, labels, universe)));
            }
            if (t.rows.empty()) throw DataError("no prediction source matched '" + a.source + "'");
            cfg["predictions"] = a.predictions_file;
            cfg["threshold"] = a.threshold;
        }
        tables.push_back(std::move(t));
    } else if (a.mode == "overall") {
        const auto human = make_human_config(ds.reports, labels, universe, a.tau_from_mean);
        HumanEnsembleConfig hc = human;
        if (!a.tau_from_mean) hc.tau = a.tau;
        Table t{"metrics", with_metrics({"source", "threshold"}), {}};
        if (a.reports == "quality") {
            t.rows.push_back(row_with({"quality_weighted", fmt(hc.tau)},
                                      confusion(quality_weighted(ds.reports, hc).flags, labels, universe)));
        } else {
            t.rows.push_back(row_with({"count_based", std::to_string(a.k)},
                                      confusion(count_based(ds.reports, a.k), labels, universe)));
        }
        tables.push_back(std::move(t));

        Table reporters{"reporters", {"reporter", "precision", "recall", "f1"}, {}};
        for (const auto& [r, m] : reporter_metrics_table(ds.reports, labels, universe)) {
            reporters.rows.push_back({r, fmt(m.precision), fmt(m.recall), fmt(m.f1)});
        }
        tables.push_back(std::move(reporters));

        Table pbot{"fig_pbot", {"x", "y", "series"}, {}};
        Table bins{"pbot", {"k", "n_accounts", "n_bots", "p_bot"}, {}};
        for (const auto& [k, b] : conditional_bot_probability(ds.reports, labels, universe)) {
            bins.rows.push_back({std::to_string(k), fmt(b.n_accounts), fmt(b.n_bots), fmt(b.p_bot)});
            pbot.rows.push_back({std::to_string(k), fmt(b.p_bot), "p_bot_given_k"});
        }
        tables.push_back(std::move(bins));
        tables.push_back(std::move(pbot));
        cfg["reports"] = a.reports;
        cfg["tau"] = hc.tau;
        cfg["tau_from_mean"] = a.tau_from_mean;
        cfg["k"] = a.k;
    } else {
        const auto mode = a.mode == "day" ? TemporalMode::DaySpecific : TemporalMode::Cumulative;
        Table t{"metrics", with_metrics({"day", "n_flagged"}), {}};
        Table fig{"fig_temporal", {"x", "y", "series"}, {}};
        for (const auto& d : temporal_evaluation(ds.reports, labels, universe, mode, ds.n_days)) {
            t.rows.push_back(row_with({std::to_string(d.day), fmt(d.n_flagged)}, d.counts));
            fig.rows.push_back({std::to_string(d.day), fmt(d.metrics.f1), a.mode + "_f1"});
        }
        tables.push_back(std::move(t));
        tables.push_back(std::move(fig));
    }
    write_run_artifact(tables, ctx.manifest_fields(cfg), ctx.out_dir());
    return 0;
}

// ------------------------------------------------------------------ aggregate

struct AggregateArgs {
    std::string data;
    std::vector<std::string> predictions;
    std::string strategy = "quality";
    std::size_t k = 1;
    double tau = kDefaultTau;
    bool tau_from_mean = false;
    double threshold = kDefaultSoftThreshold;
    std::string weights;
    double fusion_threshold = 0.5;
    bool individual_reporters = false;
};

void register_aggregate(CLI::App& app, AggregateArgs& a) {
    auto* s = app.add_subcommand("aggregate", "Combine human reports and detector scores into flags");
    s->add_option("--data", a.data, "Dataset directory")->required();
    s->add_option("--predictions", a.predictions, "Detector predictions.csv files")->delimiter(',');
    s->add_option("--strategy", a.strategy,
                  "count, quality, hard, soft, late_fusion, human_first, model_first, meta, hybrid_late_fusion")
        ->check(CLI::IsMember({"count", "quality", "hard", "soft", "late_fusion", "human_first", "model_first",
                               "meta", "hybrid_late_fusion"}))
        ->capture_default_str();
    s->add_option("--k", a.k, "Count-based report threshold")->capture_default_str();
    s->add_option("--tau", a.tau, "Quality-weighted threshold")->capture_default_str();
    s->add_flag("--tau-from-mean", a.tau_from_mean, "Use the mean reporter F1 as tau");
    s->add_option("--threshold", a.threshold, "Soft-vote threshold")->capture_default_str();
    s->add_option("--weights", a.weights, "Comma-separated fusion weights (default uniform)");
    s->add_option("--fusion-threshold", a.fusion_threshold, "Late-fusion threshold")->capture_default_str();
    s->add_flag("--individual-reporters", a.individual_reporters, "Meta voting with one voter per reporter");
}

int cmd_aggregate(Context& ctx, AggregateArgs& a) {
    const Dataset ds = load_with_predictions(a.data, a.predictions);
    const Labels labels = ds.labels();
    const AccountSet universe = ds.universe();
    HumanEnsembleConfig human = make_human_config(ds.reports, labels, universe, a.tau_from_mean);
    if (!a.tau_from_mean) human.tau = a.tau;

    std::vector<PredictionSet> ai;
    std::vector<std::string> sources;
    for (const auto& [name, ps] : ds.external_predictions) {
        ai.push_back(ps);
        sources.push_back(name);
    }
    const auto need_ai = [&] {
        if (ai.empty()) throw std::invalid_argument("strategy '" + a.strategy + "' needs --predictions");
    };
    const auto fusion_for = [&](std::size_t n) {
        FusionConfig f;
        f.threshold = a.fusion_threshold;
        f.weights = a.weights.empty() ? std::vector<double>(n, 1.0 / static_cast<double>(n)) : parse_weight_list(a.weights);
        if (f.weights.size() != n) {
            throw std::invalid_argument("--weights: expected " + std::to_string(n) + " values, got " +
                                        std::to_string(f.weights.size()));
        }
        f.validate();
        return f;
    };

    AccountSet flags;
    std::map<AccountId, double> score;
    json cfg{{"data", a.data}, {"strategy", a.strategy}, {"tau", human.tau}, {"sources", sources}};
    const std::string& s = a.strategy;
    if (s == "count") {
        flags = count_based(ds.reports, a.k);
        for (const auto& [id, rs] : reporters_by_subject(ds.reports)) score[id] = static_cast<double>(rs.size());
        cfg["k"] = a.k;
    } else if (s == "quality") {
        auto qw = quality_weighted(ds.reports, human);
        flags = std::move(qw.flags);
        score = std::move(qw.scores);
    } else if (s == "hard") {
        need_ai();
        flags = hard_vote(ai, universe);
    } else if (s == "soft") {
        need_ai();
        flags = soft_vote(ai, a.threshold, universe);
        for (const auto& id : universe) {
            double sum = 0;
            for (const auto& ps : ai) sum += ps.score_or(id, 0.0);
            score[id] = sum / static_cast<double>(ai.size());
        }
        cfg["soft_threshold"] = a.threshold;
    } else if (s == "late_fusion" || s == "hybrid_late_fusion") {
        need_ai();
        const bool hybrid = s == "hybrid_late_fusion";
        const FusionConfig f = fusion_for(ai.size() + (hybrid ? 1 : 0));
        std::vector<PredictionSet> channels = ai;
        if (hybrid) {
            channels.push_back(human_score_channel(ds.reports, human, universe));
            flags = hybrid_late_fusion(ai, ds.reports, human, f, universe);
        } else {
            flags = late_fusion(ai, f, universe);
        }
        for (const auto& id : universe) {
            double fused = 0;
            for (std::size_t j = 0; j < channels.size(); ++j) fused += f.weights[j] * channels[j].score_or(id, 0.0);
            score[id] = fused;
        }
        cfg["fusion"] = {{"weights", f.weights}, {"threshold", f.threshold}};
    } else if (s == "human_first") {
        need_ai();
        flags = human_first(ai, ds.reports, a.threshold, universe);
        cfg["soft_threshold"] = a.threshold;
    } else if (s == "model_first") {
        flags = model_first(ai, ds.reports, human, a.threshold, universe);
        cfg["soft_threshold"] = a.threshold;
    } else if (s == "meta") {
        std::vector<PredictionSet> voters = ai;
        if (a.individual_reporters) {
            for (auto& v : individual_reporter_voters(ds.reports)) voters.push_back(std::move(v));
        } else {
            voters.push_back(human_ensemble_voter(ds.reports, human));
        }
        flags = meta_vote(voters, a.threshold, universe);
        cfg["soft_threshold"] = a.threshold;
        cfg["individual_reporters"] = a.individual_reporters;
    }

    Table out{"flags", {"account", "flag", "score"}, {}};
    for (const auto& id : universe) {
        const bool f = flags.count(id) != 0;
        auto it = score.find(id);
        out.rows.push_back({id, f ? "1" : "0", fmt(it != score.end() ? it->second : (f ? 1.0 : 0.0))});
    }
    Table metrics{"metrics", with_metrics({"strategy"}), {row_with({s}, confusion(flags, labels, universe))}};
    write_run_artifact({out, metrics}, ctx.manifest_fields(cfg), ctx.out_dir());
    return 0;
}

// ------------------------------------------------------------------ cv

struct CvArgs {
    std::string data;
    std::vector<std::string> predictions;
    std::vector<std::string> strategies;
    int k = 5;
    std::size_t fusion_samples = kDefaultFusionSamples;
    int inner_folds = 3;
    double tau = kDefaultTau;
    bool tau_from_mean = false;
    bool individual_reporters = false;
};

void register_cv(CLI::App& app, CvArgs& a) {
    auto* s = app.add_subcommand("cv", "k-fold comparison of detectors, human aggregation and ensembles");
    s->add_option("--data", a.data, "Dataset directory")->required();
    s->add_option("--predictions", a.predictions, "Extra external predictions.csv files")->delimiter(',');
    s->add_option("--strategies", a.strategies, "Strategies to report (default: all)")->delimiter(',');
    s->add_option("--k", a.k, "Number of folds")->capture_default_str();
    s->add_option("--fusion-samples", a.fusion_samples, "Simplex weight samples for late fusion")->capture_default_str();
    s->add_option("--inner-folds", a.inner_folds, "Inner folds for out-of-fold tuning scores")->capture_default_str();
    s->add_option("--tau", a.tau, "Quality-weighted threshold")->capture_default_str();
    s->add_flag("--tau-from-mean", a.tau_from_mean, "Use the training reporters' mean F1 as tau");
    s->add_flag("--individual-reporters", a.individual_reporters, "Meta voting with one voter per reporter");
}

std::string join(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ";" : "") + fmt(v[i]);
    return s;
}

int cmd_cv(Context& ctx, CvArgs& a) {
    const Dataset ds = load_with_predictions(a.data, a.predictions);
    CrossValidationOptions o;
    o.k = a.k;
    o.seed = ctx.common.seed;
    o.fusion_samples = a.fusion_samples;
    o.inner_folds = a.inner_folds;
    o.tau = a.tau;
    o.tau_from_mean = a.tau_from_mean;
    o.individual_reporter_voters = a.individual_reporters;
    const auto strategies = a.strategies.empty() ? all_strategies(ds, o) : a.strategies;
    ctx.log("running " + std::to_string(o.k) + "-fold comparison of " + std::to_string(strategies.size()) + " strategies");
    const auto result = cross_validated_compare(ds, strategies, o);

    Table rows{"cv_results", with_metrics({"strategy"}), {}};
    for (const auto& r : result.rows) rows.rows.push_back(row_with({r.strategy}, r.counts));
    Table folds{"cv_folds",
                {"fold", "tau", "soft_threshold", "fusion_weights", "fusion_threshold", "hybrid_weights", "hybrid_threshold"},
                {}};
    json fold_json = json::array();
    for (const auto& f : result.folds) {
        folds.rows.push_back({std::to_string(f.fold), fmt(f.tau), fmt(f.soft_threshold), join(f.fusion.weights),
                              fmt(f.fusion.threshold), join(f.hybrid_fusion.weights), fmt(f.hybrid_fusion.threshold)});
        fold_json.push_back({{"fold", f.fold}, {"tau", f.tau}, {"soft_threshold", f.soft_threshold}});
    }
    json detectors = json::array();
    for (const auto& d : o.detectors) detectors.push_back(d.name);
    json cfg{{"data", a.data},
             {"k", o.k},
             {"strategies", strategies},
             {"detectors", detectors},
             {"ai_sources", result.ai_sources},
             {"threshold_grid", grid_json(o.threshold_grid)},
             {"fusion_samples", o.fusion_samples},
             {"fusion_sampling", "simplex"},
             {"inner_folds", o.inner_folds},
             {"tau", o.tau},
             {"tau_from_mean", o.tau_from_mean},
             {"individual_reporter_voters", o.individual_reporter_voters},
             {"folds", fold_json}};
    write_run_artifact({rows, folds}, ctx.manifest_fields(cfg), ctx.out_dir());
    return 0;
}

// ------------------------------------------------------------------ retrain

struct RetrainArgs {
    std::string data;
    std::vector<std::string> detectors{"trees", "moe"};
    std::vector<std::string> strategies{"ground_truth", "self_supervised", "human_supervised"};
    double confidence = kDefaultSelfSupervisedConfidence;
    bool sweep = false;
    int days = 0;
    double tau = kDefaultTau;
    bool tau_from_mean = false;
};

void register_retrain(CLI::App& app, RetrainArgs& a) {
    auto* s = app.add_subcommand("retrain", "Incremental retraining with three supervision strategies");
    s->add_option("--data", a.data, "Dataset directory")->required();
    s->add_option("--detectors,--detector", a.detectors, "trees, moe")->delimiter(',')->capture_default_str();
    s->add_option("--strategies,--strategy", a.strategies, "ground_truth|gt, self_supervised|self, human_supervised|human")
        ->delimiter(',')
        ->capture_default_str();
    s->add_option("--confidence", a.confidence, "Self-supervision confidence threshold")->capture_default_str();
    s->add_flag("--confidence-sweep", a.sweep, "Also sweep self-supervision confidence 0.55..0.95");
    s->add_option("--days", a.days, "Days to evaluate (0 = all)")->capture_default_str();
    s->add_option("--tau", a.tau, "Quality-weighted threshold for human supervision")->capture_default_str();
    s->add_flag("--tau-from-mean", a.tau_from_mean, "Use the mean reporter F1 as tau");
}

int cmd_retrain(Context& ctx, RetrainArgs& a) {
    const Dataset ds = load_with_predictions(a.data, {});
    RetrainPlan base;
    base.base_corpus = sim::benchmark_corpus(benchmark_base(ds, derive_seed(ctx.common.seed, "retrain-benchmark")));
    base.human = make_human_config(ds.reports, ds.labels(), ds.universe(), a.tau_from_mean);
    if (!a.tau_from_mean) base.human.tau = a.tau;
    base.confidence = a.confidence;
    base.days = a.days;

    Table report{"retrain_report", {"detector", "strategy", "day", "f1_baseline", "f1_retrained", "rel_improvement_pct"}, {}};
    Table detail{"retrain_detail",
                 {"detector", "strategy", "day", "n_evaluated", "n_selected", "precision_baseline", "recall_baseline",
                  "precision_retrained", "recall_retrained"},
                 {}};
    Table fig{"fig_retrain", {"x", "y", "series"}, {}};
    Table sweep{"retrain_sweep", {"detector", "confidence", "mean_f1_retrained", "mean_f1_baseline"}, {}};
    for (const auto& name : a.detectors) {
        RetrainPlan plan = base;
        plan.detector_name = name;
        plan.detector.kind = name == "moe" ? DetectorKind::MixtureOfExperts : parse_detector_kind(name);
        plan.seed = derive_seed(ctx.common.seed, name);
        for (const auto& sname : a.strategies) {
            plan.strategy = parse_supervision(sname);
            ctx.log("retraining " + name + " with " + std::string(to_string(plan.strategy)));
            const RetrainReport r = run_incremental(plan, ds);
            const std::string strat(to_string(plan.strategy));
            for (const auto& d : r.days) {
                const std::string rel = d.rel_improvement_pct ? fmt(*d.rel_improvement_pct) : "undefined";
                report.rows.push_back({name, strat, std::to_string(d.day), fmt(d.baseline.f1), fmt(d.retrained.f1), rel});
                detail.rows.push_back({name, strat, std::to_string(d.day), fmt(d.n_evaluated), fmt(d.n_selected),
                                       fmt(d.baseline.precision), fmt(d.baseline.recall), fmt(d.retrained.precision),
                                       fmt(d.retrained.recall)});
                if (d.rel_improvement_pct) fig.rows.push_back({std::to_string(d.day), rel, name + "/" + strat});
            }
        }
        if (a.sweep) {
            plan.strategy = Supervision::SelfSupervised;
            for (int i = 55; i <= 95; i += 5) {
                plan.confidence = i / 100.0;
                const RetrainReport r = run_incremental(plan, ds);
                double f_ret = 0, f_base = 0;
                for (const auto& d : r.days) {
                    f_ret += d.retrained.f1;
                    f_base += d.baseline.f1;
                }
                const double n = static_cast<double>(r.days.size());
                sweep.rows.push_back({name, fmt(plan.confidence), fmt(f_ret / n), fmt(f_base / n)});
            }
        }
    }
    std::vector<Table> tables{report, detail, fig};
    if (a.sweep) tables.push_back(sweep);
    json cfg{{"data", a.data},
             {"detectors", a.detectors},
             {"strategies", a.strategies},
             {"self_supervised_confidence", a.confidence},
             {"days", a.days == 0 ? ds.n_days : a.days},
             {"tau", base.human.tau},
             {"flag_threshold", base.flag_threshold},
             {"base_corpus_rows", base.base_corpus.size()}};
    write_run_artifact(tables, ctx.manifest_fields(cfg), ctx.out_dir());
    return 0;
}

// ------------------------------------------------------------------ hypothesis

struct HypothesisArgs {
    std::string data;
    std::vector<std::string> tests{"permutation", "chi2", "mcnemar", "ols"};
    bool fdr = false;
    std::uint64_t resamples = 10000;
    double tau = kDefaultTau;
};

void register_hypothesis(CLI::App& app, HypothesisArgs& a) {
    auto* s = app.add_subcommand("hypothesis", "Run the hypothesis-test battery on a dataset");
    s->add_option("--data", a.data, "Dataset directory")->required();
    s->add_option("--tests,--test", a.tests, "permutation, chi2, mcnemar, ols")
        ->delimiter(',')
        ->check(CLI::IsMember({"permutation", "chi2", "mcnemar", "ols"}))
        ->capture_default_str();
    s->add_flag("--fdr", a.fdr, "Fill p_fdr with Benjamini-Hochberg adjusted p-values");
    s->add_option("--resamples", a.resamples, "Monte Carlo permutation resamples")->capture_default_str();
    s->add_option("--tau", a.tau, "Quality-weighted threshold")->capture_default_str();
}

struct NamedTest {
    std::string name;
    stats::TestResult result;
    std::size_t n = 0;
};

// Share of incoming likes and follows that come from bots, both kinds pooled.
std::optional<double> pooled_bxr(const ActivityRatios& r) {
    double sum = 0;
    int n = 0;
    for (const auto& v : {r.bxr_like, r.bxr_follow}) {
        if (v) {
            sum += *v;
            ++n;
        }
    }
    if (n == 0) return std::nullopt;
    return sum / n;
}

std::array<std::array<double, 2>, 2> contingency(const AccountSet& flags, const Labels& labels,
                                                 const AccountSet& universe) {
    const auto c = confusion(flags, labels, universe);
    return {{{static_cast<double>(c.tp), static_cast<double>(c.fp)},
             {static_cast<double>(c.fn), static_cast<double>(c.tn)}}};
}

int cmd_hypothesis(Context& ctx, HypothesisArgs& a) {
    const Dataset ds = load_with_predictions(a.data, {});
    const Labels labels = ds.labels();
    const AccountSet universe = ds.universe();
    HumanEnsembleConfig human = make_human_config(ds.reports, labels, universe);
    human.tau = a.tau;
    const AccountSet qw = quality_weighted(ds.reports, human).flags;
    const AccountSet cb = count_based(ds.reports, 1);
    const auto wants = [&](const char* t) { return std::find(a.tests.begin(), a.tests.end(), t) != a.tests.end(); };

    std::vector<NamedTest> tests;
    if (wants("permutation")) {
        // Day-specific F1 of reported accounts, first half of the run against the second.
        const auto days = temporal_evaluation(ds.reports, labels, universe, TemporalMode::DaySpecific, ds.n_days);
        std::vector<double> early, late;
        for (const auto& d : days) (2 * d.day <= ds.n_days ? early : late).push_back(d.metrics.f1);
        if (!early.empty() && !late.empty()) {
            tests.push_back({"temporal_f1_early_vs_late",
                             stats::permutation_test(early, late, a.resamples, derive_seed(ctx.common.seed, "temporal")),
                             days.size()});
        }
        // Bot exposure of humans who reported a bot against humans who did not.
        std::set<AccountId> hit;
        for (const auto& r : ds.reports) {
            if (labels.at(r.subject) == Role::Bot) hit.insert(r.reporter);
        }
        std::vector<double> with, without;
        for (const auto& acc : ds.accounts) {
            if (acc.role != Role::Human) continue;
            if (auto x = pooled_bxr(activity_ratios(ds.events, labels, acc.id))) (hit.count(acc.id) ? with : without).push_back(*x);
        }
        if (!with.empty() && !without.empty()) {
            tests.push_back({"bxr_successful_reporters",
                             stats::permutation_test(with, without, a.resamples, derive_seed(ctx.common.seed, "bxr")),
                             with.size() + without.size()});
        }
    }
    if (wants("chi2")) {
        tests.push_back({"quality_weighted_vs_truth", stats::chi_square_independence(contingency(qw, labels, universe)),
                         universe.size()});
        tests.push_back({"count_based_vs_truth", stats::chi_square_independence(contingency(cb, labels, universe)),
                         universe.size()});
    }
    if (wants("mcnemar")) {
        std::uint64_t b = 0, c = 0;
        for (const auto& id : universe) {
            const bool bot = labels.at(id) == Role::Bot;
            const bool q_ok = (qw.count(id) != 0) == bot;
            const bool c_ok = (cb.count(id) != 0) == bot;
            b += q_ok && !c_ok;
            c += c_ok && !q_ok;
        }
        tests.push_back({"quality_vs_count_disagreements", stats::mcnemar(b, c), static_cast<std::size_t>(b + c)});
    }
    if (wants("ols")) {
        // Mean final sentiment across topics regressed on bot exposure.
        std::vector<double> x, y;
        for (const auto& acc : ds.accounts) {
            if (acc.role != Role::Human || acc.sentiment.empty()) continue;
            auto bxr = pooled_bxr(activity_ratios(ds.events, labels, acc.id));
            if (!bxr) continue;
            double s = 0;
            for (const auto& [_, v] : acc.sentiment) s += v;
            x.push_back(*bxr);
            y.push_back(s / static_cast<double>(acc.sentiment.size()));
        }
        if (x.size() >= 3) {
            const auto fit = stats::ols_regression(x, y);
            stats::TestResult r;
            r.method = stats::Method::OlsSlopeT;
            r.statistic = fit.beta;
            r.p_value = fit.p_value;
            tests.push_back({"sentiment_on_bxr_slope", r, fit.n});
        }
    }

    std::vector<double> raw;
    for (const auto& t : tests) raw.push_back(t.result.p_value);
    const auto adjusted = a.fdr ? stats::bh_fdr(raw) : std::vector<double>{};
    Table out{"hypothesis", {"test", "method", "statistic", "p_raw", "p_fdr", "n", "n_resamples"}, {}};
    for (std::size_t i = 0; i < tests.size(); ++i) {
        const auto& t = tests[i];
        std::vector<std::string> row{t.name, std::string(stats::to_string(t.result.method)), fmt(t.result.statistic), fmt(raw[i])};
        row.push_back(a.fdr ? fmt(adjusted[i]) : std::string());
        row.push_back(fmt(t.n));
        row.push_back(t.result.n_resamples ? std::to_string(*t.result.n_resamples) : "exact");
        out.rows.push_back(std::move(row));
    }

    Table ratios{"activity_ratios", {"account", "ber_like", "ber_follow", "bxr_like", "bxr_follow"}, {}};
    const auto opt = [](const std::optional<double>& v) { return v ? format_real(*v) : std::string(); };
    for (const auto& acc : ds.accounts) {
        if (acc.role != Role::Human) continue;
        const auto r = activity_ratios(ds.events, labels, acc.id);
        ratios.rows.push_back({acc.id, opt(r.ber_like), opt(r.ber_follow), opt(r.bxr_like), opt(r.bxr_follow)});
    }
    json cfg{{"data", a.data}, {"tests", a.tests}, {"fdr", a.fdr}, {"resamples", a.resamples}, {"tau", a.tau}};
    write_run_artifact({out, ratios}, ctx.manifest_fields(cfg), ctx.out_dir());
    return 0;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"botlab: hybrid human/AI bot detection toolkit", "botlab"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_config("--config", "", "TOML config file (keys are the subcommand's long flag names)");
    app.config_formatter(std::make_shared<SubcommandToml>(app));

    Common common;
    SimulateArgs simulate;
    DetectArgs detect;
    EvaluateArgs evaluate;
    AggregateArgs aggregate;
    CvArgs cv;
    RetrainArgs retrain;
    HypothesisArgs hypothesis;
    register_simulate(app, simulate);
    register_detect(app, detect);
    register_evaluate(app, evaluate);
    register_aggregate(app, aggregate);
    register_cv(app, cv);
    register_retrain(app, retrain);
    register_hypothesis(app, hypothesis);
    for (auto* sub : app.get_subcommands({})) add_common(sub, common);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    CLI::App* sub = app.get_subcommands().front();
    Context ctx{out, err, sub, common};
    const std::string name = sub->get_name();
    const std::map<std::string, std::function<int()>> commands{
        {"simulate", [&] { return cmd_simulate(ctx, simulate); }},
        {"detect", [&] { return cmd_detect(ctx, detect); }},
        {"evaluate", [&] { return cmd_evaluate(ctx, evaluate); }},
        {"aggregate", [&] { return cmd_aggregate(ctx, aggregate); }},
        {"cv", [&] { return cmd_cv(ctx, cv); }},
        {"retrain", [&] { return cmd_retrain(ctx, retrain); }},
        {"hypothesis", [&] { return cmd_hypothesis(ctx, hypothesis); }},
    };
    try {
        return commands.at(name)();
    } catch (const std::exception& e) {
        err << "botlab " << name << ": error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace botlab::cli
