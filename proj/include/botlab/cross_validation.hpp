#pragma once

// k-fold comparison of individual detectors, human aggregation and every
// ensemble strategy. Thresholds and fusion weights are tuned on each training
// split (from inner out-of-fold detector scores) and applied to the held-out
// fold; metrics are pooled over all out-of-fold decisions.

#include "botlab/aggregation.hpp"
#include "botlab/detectors.hpp"

#include <string>
#include <vector>

namespace botlab {

struct NamedDetector {
    std::string name;
    DetectorSpec spec;
};

std::vector<NamedDetector> default_detectors();

struct CrossValidationOptions {
    int k = 5;
    std::uint64_t seed = 0;
    std::vector<NamedDetector> detectors = default_detectors();
    std::vector<double> threshold_grid = default_threshold_grid();
    std::size_t fusion_samples = kDefaultFusionSamples;
    int inner_folds = 3;
    double tau = kDefaultTau;
    bool tau_from_mean = false;
    // Meta voting with one voter per reporter instead of the human ensemble.
    bool individual_reporter_voters = false;
};

struct FoldRecord {
    int fold = 0;
    double tau = 0;
    double soft_threshold = 0;
    FusionConfig fusion;         // detectors only
    FusionConfig hybrid_fusion;  // detectors + human channel
};

struct StrategyRow {
    std::string strategy;
    ConfusionCounts counts;
    ClassMetrics metrics;
};

struct CrossValidationResult {
    std::vector<StrategyRow> rows;
    std::vector<FoldRecord> folds;
    std::vector<std::string> ai_sources;

    const StrategyRow& row(const std::string& strategy) const;
};

// Strategy names: a detector name ("trees", "moe"), "ext:<source>" for an
// external prediction set, "human" (quality-weighted), "count" (k = 1),
// "hard", "soft", "late_fusion", "human_first", "model_first", "meta",
// "hybrid_late_fusion".
std::vector<std::string> all_strategies(const Dataset& ds, const CrossValidationOptions& opts);

CrossValidationResult cross_validated_compare(const Dataset& ds,
                                              const std::vector<std::string>& strategies,
                                              const CrossValidationOptions& opts);

}  // namespace botlab
