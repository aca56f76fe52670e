#pragma once

// Human-report aggregation (count-based, quality-weighted) and ensemble
// fusion of detector scores with or without the human channel.
//
// Coverage: a PredictionSet only speaks for accounts it has a score for.
// Uncovered accounts abstain in hard votes and count as score 0 in soft votes
// and weighted fusion. Every hard vote breaks ties toward human.

#include "botlab/core_data.hpp"
#include "botlab/metrics.hpp"

#include <cstdint>
#include <map>
#include <span>
#include <vector>

namespace botlab {

// Mean reporter F1 of the reference deployment; one average reporter's
// worth of evidence.
inline constexpr double kDefaultTau = 0.533;

// value >= threshold up to a 1e-12 relative slack: sums of equal weights can
// land one ulp either side of k*w.
bool reaches(double value, double threshold);
inline constexpr double kDefaultSoftThreshold = 0.71;
inline constexpr std::size_t kDefaultFusionSamples = 1000;
inline constexpr std::size_t kMaxMetaVoters = 16;

struct HumanEnsembleConfig {
    double tau = kDefaultTau;
    std::map<AccountId, double> weights;  // reporter -> F1 in [0, 1]

    void validate() const;
};

// Weights from reporter_f1_table over `universe`; tau is either the fixed
// default or, with `tau_from_mean`, the mean of those weights.
HumanEnsembleConfig make_human_config(std::span<const Report> reports, const Labels& labels,
                                      const AccountSet& universe, bool tau_from_mean = false);

struct FusionConfig {
    std::vector<double> weights;
    double threshold = 0.5;

    void validate() const;
};

AccountSet count_based(std::span<const Report> reports, std::size_t k);

struct QualityWeighted {
    AccountSet flags;
    std::map<AccountId, double> scores;  // s(a) for every reported account
};

// s(a) sums the weights of a's distinct reporters; flagged iff s(a) >= tau.
// Throws std::invalid_argument for a reporter without a weight.
QualityWeighted quality_weighted(std::span<const Report> reports, const HumanEnsembleConfig& config);

// Quality-weighted flags as a 0/1 voter covering only reported accounts.
PredictionSet human_ensemble_voter(std::span<const Report> reports, const HumanEnsembleConfig& config);

// min(1, s(a) / tau) over the whole universe (0 when unreported).
PredictionSet human_score_channel(std::span<const Report> reports, const HumanEnsembleConfig& config,
                                  const AccountSet& universe);

// One 0/1 voter per reporter, covering the accounts that reporter flagged.
std::vector<PredictionSet> individual_reporter_voters(std::span<const Report> reports);

AccountSet hard_vote(std::span<const PredictionSet> sets, const AccountSet& universe);
AccountSet soft_vote(std::span<const PredictionSet> sets, double threshold, const AccountSet& universe);
AccountSet late_fusion(std::span<const PredictionSet> sets, const FusionConfig& config,
                       const AccountSet& universe);

// 0.50, 0.51, ..., 0.95
std::vector<double> default_threshold_grid();

// Grid value with the best bot-class F1 over the labelled accounts; ties go
// to the smallest threshold. Throws on empty labels or grid.
double optimize_soft_threshold(std::span<const PredictionSet> sets, const Labels& labels,
                               std::span<const double> grid);

// Random simplex weights (normalised unit exponentials) crossed with the
// threshold grid; keeps the first best-F1 pair.
FusionConfig optimize_fusion_weights(std::span<const PredictionSet> sets, const Labels& labels,
                                     std::size_t n_samples, std::uint64_t seed,
                                     std::span<const double> grid);

AccountSet human_first(std::span<const PredictionSet> ai_sets, std::span<const Report> reports,
                       double soft_threshold, const AccountSet& universe);

AccountSet model_first(std::span<const PredictionSet> ai_sets, std::span<const Report> reports,
                       const HumanEnsembleConfig& human, double soft_threshold,
                       const AccountSet& universe);

// Hard and soft outcome of every non-empty voter subset, then a hard vote over
// those 2(2^n - 1) outcomes. Throws for more than kMaxMetaVoters voters.
AccountSet meta_vote(std::span<const PredictionSet> voters, double soft_threshold,
                     const AccountSet& universe);

// Late fusion over ai_sets plus the human score channel (weights last).
AccountSet hybrid_late_fusion(std::span<const PredictionSet> ai_sets, std::span<const Report> reports,
                              const HumanEnsembleConfig& human, const FusionConfig& fusion,
                              const AccountSet& universe);

// Flags as a 0/1 PredictionSet over the universe, for writing flags.csv.
PredictionSet flags_as_scores(const AccountSet& flags, const AccountSet& universe,
                              const std::string& source);

}  // namespace botlab
