#include "botlab/retraining.hpp"

#include "botlab/features.hpp"

#include <algorithm>
#include <stdexcept>

namespace botlab {

std::string_view to_string(Supervision s) {
    switch (s) {
        case Supervision::GroundTruth: return "ground_truth";
        case Supervision::SelfSupervised: return "self_supervised";
        case Supervision::HumanSupervised: return "human_supervised";
    }
    return "?";
}

Supervision parse_supervision(std::string_view s) {
    if (s == "ground_truth" || s == "gt") return Supervision::GroundTruth;
    if (s == "self_supervised" || s == "self") return Supervision::SelfSupervised;
    if (s == "human_supervised" || s == "human") return Supervision::HumanSupervised;
    throw std::invalid_argument("unknown supervision strategy '" + std::string(s) + "'");
}

void RetrainPlan::validate() const {
    if (detector.kind == DetectorKind::External) {
        throw std::invalid_argument("RetrainPlan: external detectors cannot be retrained");
    }
    if (strategy == Supervision::SelfSupervised && !(confidence > 0.5 && confidence <= 1.0)) {
        throw std::invalid_argument("RetrainPlan: confidence must be in (0.5, 1]");
    }
    if (!(flag_threshold >= 0.0 && flag_threshold <= 1.0)) {
        throw std::invalid_argument("RetrainPlan: flag_threshold must be in [0, 1]");
    }
    if (days < 0) throw std::invalid_argument("RetrainPlan: days must be >= 0");
    const std::size_t pos = base_corpus.positives();
    if (pos == 0 || pos == base_corpus.size()) {
        throw std::invalid_argument("RetrainPlan: base corpus must contain both classes");
    }
    if (strategy == Supervision::HumanSupervised) human.validate();
}

std::optional<double> relative_f1_improvement(double f1_baseline, double f1_retrained) {
    if (f1_baseline == 0.0) {
        if (f1_retrained == 0.0) return 0.0;
        return std::nullopt;
    }
    return 100.0 * (f1_retrained - f1_baseline) / f1_baseline;
}

AccountSet evaluation_slice(const Dataset& ds, int day) {
    AccountSet out;
    for (const auto& e : ds.events) {
        if (e.day == day && e.action != Action::Suspend) out.insert(e.actor);
    }
    return out;
}

std::vector<PredictionSet> prior_predictions(const DetectorModel& model, const Dataset& ds, int day) {
    std::vector<PredictionSet> out;
    for (int d = 1; d < day; ++d) {
        const auto features = extract_all_features(ds, d);
        PredictionSet ps;
        ps.source = "day" + std::to_string(d);
        for (const auto& a : evaluation_slice(ds, d)) ps.scores[a] = predict(model, features.at(a));
        out.push_back(std::move(ps));
    }
    return out;
}

AccountSet select_ground_truth(const std::vector<PredictionSet>& prior, const Labels& labels,
                               double flag_threshold) {
    AccountSet out;
    for (const auto& ps : prior) {
        for (const auto& [a, p] : ps.scores) {
            if (p < flag_threshold) continue;
            auto it = labels.find(a);
            if (it != labels.end() && it->second == Role::Bot) out.insert(a);
        }
    }
    return out;
}

AccountSet select_self_supervised(const std::vector<PredictionSet>& prior, double confidence) {
    if (!(confidence > 0.5 && confidence <= 1.0)) {
        throw std::invalid_argument("select_self_supervised: confidence must be in (0.5, 1]");
    }
    AccountSet out;
    for (const auto& ps : prior) {
        for (const auto& [a, p] : ps.scores) {
            if (p >= confidence) out.insert(a);
        }
    }
    return out;
}

AccountSet select_human_supervised(std::span<const Report> reports, const HumanEnsembleConfig& config,
                                   int day) {
    std::vector<Report> earlier;
    for (const auto& r : reports) {
        if (r.day < day) earlier.push_back(r);
    }
    return quality_weighted(earlier, config).flags;
}

AccountSet select_for_day(const RetrainPlan& plan, const Dataset& ds, const DetectorModel& baseline,
                          int day) {
    if (day <= 1) return {};
    switch (plan.strategy) {
        case Supervision::GroundTruth:
            return select_ground_truth(prior_predictions(baseline, ds, day), ds.labels(), plan.flag_threshold);
        case Supervision::SelfSupervised:
            return select_self_supervised(prior_predictions(baseline, ds, day), plan.confidence);
        case Supervision::HumanSupervised:
            return select_human_supervised(ds.reports, plan.human, day);
    }
    return {};
}

namespace {

ClassMetrics evaluate_model(const DetectorModel& model, const std::map<AccountId, FeatureVector>& features,
                            const AccountSet& slice, const Labels& labels, double threshold) {
    AccountSet flags;
    for (const auto& a : slice) {
        if (predict(model, features.at(a)) >= threshold) flags.insert(a);
    }
    return evaluate_flags(flags, labels, slice);
}

}  // namespace

RetrainReport run_incremental(const RetrainPlan& plan, const Dataset& ds) {
    plan.validate();
    const int n_days = plan.days == 0 ? ds.n_days : plan.days;
    if (n_days > ds.n_days) throw std::invalid_argument("RetrainPlan: more days than the dataset has");
    const Labels labels = ds.labels();
    const DetectorModel baseline = train_detector(plan.detector, plan.base_corpus, plan.seed);

    RetrainReport report;
    report.detector = plan.detector_name;
    report.strategy = plan.strategy;
    for (int d = 1; d <= n_days; ++d) {
        const AccountSet slice = evaluation_slice(ds, d);
        if (slice.empty()) throw DataError("retraining: empty evaluation slice on day " + std::to_string(d));
        const AccountSet selected = select_for_day(plan, ds, baseline, d);

        RetrainDay row;
        row.day = d;
        row.n_evaluated = slice.size();
        row.n_selected = selected.size();
        const auto eval_features = extract_all_features(ds, d);
        row.baseline = evaluate_model(baseline, eval_features, slice, labels, plan.flag_threshold);
        if (selected.empty()) {
            row.retrained = row.baseline;
        } else {
            TrainingSet augmented = plan.base_corpus;
            const auto known = extract_all_features(ds, d - 1);
            for (const auto& a : selected) augmented.add(known.at(a), Role::Bot);
            const DetectorModel retrained = train_detector(plan.detector, augmented, plan.seed);
            row.retrained = evaluate_model(retrained, eval_features, slice, labels, plan.flag_threshold);
        }
        row.rel_improvement_pct = relative_f1_improvement(row.baseline.f1, row.retrained.f1);
        report.days.push_back(row);
    }
    return report;
}

}  // namespace botlab
