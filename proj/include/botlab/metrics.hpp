#pragma once

// Evaluation quantities: confusion counts on the bot class, rater agreement,
// report-frequency conditionals, engagement/exposure ratios and per-day
// evaluation of human reports.

#include "botlab/core_data.hpp"

#include <map>
#include <optional>
#include <span>
#include <vector>

namespace botlab {

struct ConfusionCounts {
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;

    std::size_t total() const { return tp + fp + fn + tn; }
    bool operator==(const ConfusionCounts&) const = default;
};

struct ClassMetrics {
    double precision = 0, recall = 0, f1 = 0, accuracy = 0;
};

// Percentages in [0, 100]; absent when the denominator is zero.
struct ActivityRatios {
    std::optional<double> ber_like, ber_follow, bxr_like, bxr_follow;
};

// Bot is the positive class. Throws std::invalid_argument when a flag falls
// outside the universe or a universe member has no label.
ConfusionCounts confusion(const AccountSet& flags, const Labels& labels, const AccountSet& universe);

// Zero denominators yield 0 rather than NaN.
ClassMetrics bot_class_metrics(const ConfusionCounts& c);

ClassMetrics evaluate_flags(const AccountSet& flags, const Labels& labels, const AccountSet& universe);

double agreement_rate(const AccountSet& a, const AccountSet& b, const AccountSet& universe);

// kappa = (p_o - p_e) / (1 - p_e); defined as 1 when p_e == 1.
double cohen_kappa(const AccountSet& a, const AccountSet& b, const AccountSet& universe);

struct ReportBin {
    std::size_t n_accounts = 0;
    std::size_t n_bots = 0;
    double p_bot = 0;
};

enum class ReportCounting { DistinctReporters, RawEvents };

// Groups the universe by how often each account was reported (k = 0 for
// unreported accounts) and returns P(bot | k) for every k that occurs.
std::map<std::size_t, ReportBin> conditional_bot_probability(
    std::span<const Report> reports, const Labels& labels, const AccountSet& universe,
    ReportCounting counting = ReportCounting::DistinctReporters);

// BER: share of `user`'s outgoing likes/follows aimed at bots.
// BXR: share of incoming likes/follows that come from bots.
ActivityRatios activity_ratios(std::span<const InteractionEvent> events, const Labels& labels,
                               const AccountId& user);

enum class TemporalMode { DaySpecific, Cumulative };

struct DayMetrics {
    int day = 0;
    std::size_t n_flagged = 0;
    ConfusionCounts counts;
    ClassMetrics metrics;
};

std::vector<DayMetrics> temporal_evaluation(std::span<const Report> reports, const Labels& labels,
                                            const AccountSet& universe, TemporalMode mode,
                                            int n_days);

// F1 of "flag exactly what this reporter ever reported", per reporter.
std::map<AccountId, double> reporter_f1_table(std::span<const Report> reports, const Labels& labels,
                                              const AccountSet& universe);

std::map<AccountId, ClassMetrics> reporter_metrics_table(std::span<const Report> reports,
                                                         const Labels& labels,
                                                         const AccountSet& universe);

// Distinct reporters per subject, R(a).
std::map<AccountId, AccountSet> reporters_by_subject(std::span<const Report> reports);

}  // namespace botlab
