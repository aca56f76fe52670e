#pragma once

// Day-by-day incremental retraining: a detector pretrained on a benchmark
// corpus is augmented with accounts discovered on earlier days, chosen by one
// of three supervision regimes, and compared against the untouched baseline.

#include "botlab/aggregation.hpp"
#include "botlab/detectors.hpp"
#include "botlab/metrics.hpp"

#include <optional>
#include <string>
#include <vector>

namespace botlab {

inline constexpr double kDefaultSelfSupervisedConfidence = 0.7;

enum class Supervision { GroundTruth, SelfSupervised, HumanSupervised };

std::string_view to_string(Supervision s);
// Accepts "ground_truth"/"gt", "self_supervised"/"self", "human_supervised"/"human".
Supervision parse_supervision(std::string_view s);

struct RetrainPlan {
    std::string detector_name = "trees";
    DetectorSpec detector;
    TrainingSet base_corpus;
    Supervision strategy = Supervision::GroundTruth;
    double confidence = kDefaultSelfSupervisedConfidence;  // SelfSupervised only
    HumanEnsembleConfig human;                              // HumanSupervised only
    double flag_threshold = 0.5;  // detector probability at which an account counts as flagged
    int days = 0;                 // 0 means every day of the dataset
    std::uint64_t seed = 0;

    void validate() const;
};

struct RetrainDay {
    int day = 0;
    std::size_t n_evaluated = 0;
    std::size_t n_selected = 0;
    ClassMetrics baseline;
    ClassMetrics retrained;
    // Percent; empty when the baseline F1 is 0 and the retrained F1 is not.
    std::optional<double> rel_improvement_pct;
};

struct RetrainReport {
    std::string detector;
    Supervision strategy = Supervision::GroundTruth;
    std::vector<RetrainDay> days;
};

// 100 * (retrained - baseline) / baseline; 0 when both are 0.
std::optional<double> relative_f1_improvement(double f1_baseline, double f1_retrained);

// Accounts with at least one event of their own on `day` (suspensions excluded).
AccountSet evaluation_slice(const Dataset& ds, int day);

// Prior-day predictions: entry i scores the day-(i+1) slice on features up to
// that day, for every day before `day`.
std::vector<PredictionSet> prior_predictions(const DetectorModel& model, const Dataset& ds, int day);

AccountSet select_ground_truth(const std::vector<PredictionSet>& prior, const Labels& labels,
                               double flag_threshold = 0.5);

// Throws std::invalid_argument unless confidence is in (0.5, 1].
AccountSet select_self_supervised(const std::vector<PredictionSet>& prior, double confidence);

// Quality-weighted flags over reports filed before `day`.
AccountSet select_human_supervised(std::span<const Report> reports, const HumanEnsembleConfig& config,
                                   int day);

// Instances the plan adds to the training set for `day`; reads nothing dated
// on or after that day.
AccountSet select_for_day(const RetrainPlan& plan, const Dataset& ds, const DetectorModel& baseline,
                          int day);

// Throws DataError on an empty evaluation slice and std::invalid_argument on
// an invalid plan.
RetrainReport run_incremental(const RetrainPlan& plan, const Dataset& ds);

}  // namespace botlab
