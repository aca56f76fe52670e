#include "botlab/aggregation.hpp"

#include "botlab/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace botlab {

namespace {

double mean_score(std::span<const PredictionSet> sets, const AccountId& a) {
    double sum = 0;
    for (const auto& s : sets) sum += s.score_or(a, 0.0);
    return sum / static_cast<double>(sets.size());
}

}  // namespace

bool reaches(double value, double threshold) {
    return value >= threshold - 1e-12 * std::max(1.0, std::fabs(threshold));
}

void HumanEnsembleConfig::validate() const {
    if (!(tau >= 0)) throw std::invalid_argument("human ensemble: tau must be >= 0");
    for (const auto& [r, w] : weights) {
        if (!(w >= 0 && w <= 1)) {
            throw std::invalid_argument("human ensemble: weight of '" + r + "' outside [0,1]");
        }
    }
}

void FusionConfig::validate() const {
    if (weights.empty()) throw std::invalid_argument("fusion: no weights");
    double sum = 0;
    for (double w : weights) {
        if (!(w >= 0)) throw std::invalid_argument("fusion: negative weight");
        sum += w;
    }
    if (std::fabs(sum - 1.0) > 1e-9) throw std::invalid_argument("fusion: weights must sum to 1");
    if (!(threshold >= 0 && threshold <= 1)) {
        throw std::invalid_argument("fusion: threshold outside [0,1]");
    }
}

HumanEnsembleConfig make_human_config(std::span<const Report> reports, const Labels& labels,
                                      const AccountSet& universe, bool tau_from_mean) {
    HumanEnsembleConfig cfg;
    cfg.weights = reporter_f1_table(reports, labels, universe);
    if (tau_from_mean && !cfg.weights.empty()) {
        double sum = 0;
        for (const auto& [_, w] : cfg.weights) sum += w;
        cfg.tau = sum / static_cast<double>(cfg.weights.size());
    }
    return cfg;
}

AccountSet count_based(std::span<const Report> reports, std::size_t k) {
    if (k < 1) throw std::invalid_argument("count_based: k must be >= 1");
    AccountSet out;
    for (const auto& [subject, rs] : reporters_by_subject(reports)) {
        if (rs.size() >= k) out.insert(subject);
    }
    return out;
}

QualityWeighted quality_weighted(std::span<const Report> reports, const HumanEnsembleConfig& config) {
    config.validate();
    QualityWeighted out;
    for (const auto& [subject, rs] : reporters_by_subject(reports)) {
        double s = 0;
        for (const auto& r : rs) {
            auto it = config.weights.find(r);
            if (it == config.weights.end()) {
                throw std::invalid_argument("quality_weighted: no weight for reporter '" + r + "'");
            }
            s += it->second;
        }
        out.scores[subject] = s;
        if (reaches(s, config.tau)) out.flags.insert(subject);
    }
    return out;
}

PredictionSet human_ensemble_voter(std::span<const Report> reports, const HumanEnsembleConfig& config) {
    const auto qw = quality_weighted(reports, config);
    PredictionSet out;
    out.source = "human";
    for (const auto& [subject, _] : qw.scores) out.scores[subject] = qw.flags.count(subject) ? 1.0 : 0.0;
    return out;
}

PredictionSet human_score_channel(std::span<const Report> reports, const HumanEnsembleConfig& config,
                                  const AccountSet& universe) {
    const auto qw = quality_weighted(reports, config);
    PredictionSet out;
    out.source = "human";
    for (const auto& a : universe) {
        auto it = qw.scores.find(a);
        double p = 0;
        if (it != qw.scores.end()) {
            p = config.tau > 0 ? std::min(1.0, it->second / config.tau) : 1.0;
            if (reaches(it->second, config.tau)) p = 1.0;
        }
        out.scores[a] = p;
    }
    return out;
}

std::vector<PredictionSet> individual_reporter_voters(std::span<const Report> reports) {
    std::map<AccountId, PredictionSet> by_reporter;
    for (const auto& r : reports) {
        auto& s = by_reporter[r.reporter];
        s.source = "reporter:" + r.reporter;
        s.scores[r.subject] = 1.0;
    }
    std::vector<PredictionSet> out;
    for (auto& [_, s] : by_reporter) out.push_back(std::move(s));
    return out;
}

AccountSet hard_vote(std::span<const PredictionSet> sets, const AccountSet& universe) {
    AccountSet out;
    for (const auto& a : universe) {
        std::size_t bot = 0, voting = 0;
        for (const auto& s : sets) {
            auto it = s.scores.find(a);
            if (it == s.scores.end()) continue;
            ++voting;
            bot += it->second >= 0.5;
        }
        if (2 * bot > voting) out.insert(a);
    }
    return out;
}

AccountSet soft_vote(std::span<const PredictionSet> sets, double threshold, const AccountSet& universe) {
    if (!(threshold >= 0 && threshold <= 1)) throw std::invalid_argument("soft_vote: threshold outside [0,1]");
    AccountSet out;
    if (sets.empty()) return out;
    for (const auto& a : universe) {
        if (reaches(mean_score(sets, a), threshold)) out.insert(a);
    }
    return out;
}

AccountSet late_fusion(std::span<const PredictionSet> sets, const FusionConfig& config,
                       const AccountSet& universe) {
    if (config.weights.size() != sets.size()) {
        throw std::invalid_argument("late_fusion: " + std::to_string(config.weights.size()) +
                                    " weights for " + std::to_string(sets.size()) + " sources");
    }
    config.validate();
    AccountSet out;
    for (const auto& a : universe) {
        double fused = 0;
        for (std::size_t j = 0; j < sets.size(); ++j) fused += config.weights[j] * sets[j].score_or(a, 0.0);
        if (reaches(fused, config.threshold)) out.insert(a);
    }
    return out;
}

std::vector<double> default_threshold_grid() {
    std::vector<double> grid;
    for (int i = 50; i <= 95; ++i) grid.push_back(i / 100.0);
    return grid;
}

namespace {

// F1 of "fused >= t" over precomputed per-account scores.
double f1_at(const std::vector<double>& fused, const std::vector<int>& is_bot, double t) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < fused.size(); ++i) {
        const bool flag = reaches(fused[i], t);
        if (flag && is_bot[i]) ++tp;
        else if (flag) ++fp;
        else if (is_bot[i]) ++fn;
    }
    return bot_class_metrics({tp, fp, fn, 0}).f1;
}

}  // namespace

double optimize_soft_threshold(std::span<const PredictionSet> sets, const Labels& labels,
                               std::span<const double> grid) {
    if (labels.empty()) throw std::invalid_argument("optimize_soft_threshold: empty validation labels");
    if (grid.empty()) throw std::invalid_argument("optimize_soft_threshold: empty grid");
    if (sets.empty()) throw std::invalid_argument("optimize_soft_threshold: no sources");
    std::vector<double> fused;
    std::vector<int> is_bot;
    for (const auto& [id, role] : labels) {
        fused.push_back(mean_score(sets, id));
        is_bot.push_back(role == Role::Bot);
    }
    double best_t = grid.front(), best_f1 = -1;
    for (double t : grid) {
        const double f1 = f1_at(fused, is_bot, t);
        if (f1 > best_f1) {
            best_f1 = f1;
            best_t = t;
        }
    }
    return best_t;
}

FusionConfig optimize_fusion_weights(std::span<const PredictionSet> sets, const Labels& labels,
                                     std::size_t n_samples, std::uint64_t seed,
                                     std::span<const double> grid) {
    if (sets.size() < 2) throw std::invalid_argument("optimize_fusion_weights: need >= 2 sources");
    if (labels.empty()) throw std::invalid_argument("optimize_fusion_weights: empty validation labels");
    if (grid.empty() || n_samples == 0) {
        throw std::invalid_argument("optimize_fusion_weights: empty search space");
    }
    std::vector<std::vector<double>> scores(sets.size());
    std::vector<int> is_bot;
    for (const auto& [id, role] : labels) {
        for (std::size_t j = 0; j < sets.size(); ++j) scores[j].push_back(sets[j].score_or(id, 0.0));
        is_bot.push_back(role == Role::Bot);
    }
    Rng rng(seed, "fusion_weights");
    FusionConfig best;
    double best_f1 = -1;
    std::vector<double> fused(is_bot.size());
    for (std::size_t s = 0; s < n_samples; ++s) {
        std::vector<double> w(sets.size());
        double total = 0;
        for (auto& x : w) total += x = rng.exponential();
        for (auto& x : w) x /= total;
        std::fill(fused.begin(), fused.end(), 0.0);
        for (std::size_t j = 0; j < sets.size(); ++j)
            for (std::size_t i = 0; i < fused.size(); ++i) fused[i] += w[j] * scores[j][i];
        for (double t : grid) {
            const double f1 = f1_at(fused, is_bot, t);
            if (f1 > best_f1) {
                best_f1 = f1;
                best = FusionConfig{w, t};
            }
        }
    }
    return best;
}

AccountSet human_first(std::span<const PredictionSet> ai_sets, std::span<const Report> reports,
                       double soft_threshold, const AccountSet& universe) {
    const AccountSet interim = soft_vote(ai_sets, soft_threshold, universe);
    const auto reporters = reporters_by_subject(reports);
    AccountSet out;
    for (const auto& a : universe) {
        auto it = reporters.find(a);
        const std::size_t human_votes = it == reporters.end() ? 0 : it->second.size();
        const std::size_t bot_votes = human_votes + interim.count(a);
        if (2 * bot_votes > human_votes + 1) out.insert(a);
    }
    return out;
}

AccountSet model_first(std::span<const PredictionSet> ai_sets, std::span<const Report> reports,
                       const HumanEnsembleConfig& human, double soft_threshold,
                       const AccountSet& universe) {
    const auto qw = quality_weighted(reports, human);
    std::vector<PredictionSet> sets(ai_sets.begin(), ai_sets.end());
    PredictionSet channel;
    channel.source = "human";
    for (const auto& a : universe) channel.scores[a] = qw.flags.count(a) ? 1.0 : 0.0;
    sets.push_back(std::move(channel));
    return soft_vote(sets, soft_threshold, universe);
}

AccountSet meta_vote(std::span<const PredictionSet> voters, double soft_threshold,
                     const AccountSet& universe) {
    const std::size_t n = voters.size();
    if (n == 0) throw std::invalid_argument("meta_vote: no voters");
    if (n > kMaxMetaVoters) {
        throw std::invalid_argument("meta_vote: " + std::to_string(n) + " voters exceed the limit of " +
                                    std::to_string(kMaxMetaVoters));
    }
    AccountSet out;
    std::vector<double> score(n);
    std::vector<int> covered(n);
    for (const auto& a : universe) {
        for (std::size_t j = 0; j < n; ++j) {
            auto it = voters[j].scores.find(a);
            covered[j] = it != voters[j].scores.end();
            score[j] = covered[j] ? it->second : 0.0;
        }
        std::size_t bot_outcomes = 0, outcomes = 0;
        for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
            std::size_t members = 0, voting = 0, bot = 0;
            double sum = 0;
            for (std::size_t j = 0; j < n; ++j) {
                if (!(mask & (1u << j))) continue;
                ++members;
                sum += score[j];
                if (covered[j]) {
                    ++voting;
                    bot += score[j] >= 0.5;
                }
            }
            if (voting > 0) {
                ++outcomes;
                bot_outcomes += 2 * bot > voting;
            }
            ++outcomes;
            bot_outcomes += reaches(sum / static_cast<double>(members), soft_threshold);
        }
        if (2 * bot_outcomes > outcomes) out.insert(a);
    }
    return out;
}

AccountSet hybrid_late_fusion(std::span<const PredictionSet> ai_sets, std::span<const Report> reports,
                              const HumanEnsembleConfig& human, const FusionConfig& fusion,
                              const AccountSet& universe) {
    std::vector<PredictionSet> sets(ai_sets.begin(), ai_sets.end());
    sets.push_back(human_score_channel(reports, human, universe));
    if (fusion.weights.size() != sets.size()) {
        throw std::invalid_argument("hybrid_late_fusion: expected " + std::to_string(sets.size()) +
                                    " weights (detectors + human channel), got " +
                                    std::to_string(fusion.weights.size()));
    }
    return late_fusion(sets, fusion, universe);
}

PredictionSet flags_as_scores(const AccountSet& flags, const AccountSet& universe,
                              const std::string& source) {
    PredictionSet out;
    out.source = source;
    for (const auto& a : universe) out.scores[a] = flags.count(a) ? 1.0 : 0.0;
    return out;
}

}  // namespace botlab
