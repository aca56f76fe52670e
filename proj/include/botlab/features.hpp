#pragma once

// Behavioural features computed from an account's own event history, cut off
// at a day (or simulation step) boundary so that nothing later leaks in.

#include "botlab/core_data.hpp"

#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace botlab {

using FeatureSchema = std::vector<std::string>;

enum FeatureIndex : std::size_t {
    kPostRate = 0,
    kFollowerGrowth,
    kLikeOutRate,
    kLikeInRate,
    kFollowOutRate,
    kPolarityMean,
    kPolarityVariance,
    kMeanPostGap,
    kActiveDayFraction,
    kFollowerFollowingRatio,
    kFeatureCount
};

// Shared, immutable; every extracted vector points at this instance.
const std::shared_ptr<const FeatureSchema>& default_feature_schema();

struct FeatureVector {
    AccountId account;
    std::vector<double> values;
    std::shared_ptr<const FeatureSchema> schema;
};

// Features from events with day <= up_to_day. Throws DataError for an
// unknown account or std::invalid_argument for a day outside [1, n_days].
FeatureVector extract_features(const Dataset& ds, const AccountId& account, int up_to_day);

// All accounts in one pass over the log.
std::map<AccountId, FeatureVector> extract_all_features(const Dataset& ds, int up_to_day);

// Lower-level form used by the simulator: events with timestamp < end_step.
// Per-day rates are normalised by the span from the first to the last day on
// which the account acted or was acted on.
std::map<AccountId, FeatureVector> extract_features_until(std::span<const Account> accounts,
                                                          std::span<const InteractionEvent> events,
                                                          std::int64_t end_step);

}  // namespace botlab
