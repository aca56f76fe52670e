#include "botlab/cross_validation.hpp"

#include "botlab/rng.hpp"

#include <algorithm>
#include <stdexcept>

namespace botlab {

std::vector<NamedDetector> default_detectors() {
    NamedDetector trees{"trees", {}};
    trees.spec.kind = DetectorKind::BaggedTrees;
    NamedDetector moe{"moe", {}};
    moe.spec.kind = DetectorKind::MixtureOfExperts;
    return {trees, moe};
}

const StrategyRow& CrossValidationResult::row(const std::string& strategy) const {
    for (const auto& r : rows)
        if (r.strategy == strategy) return r;
    throw std::out_of_range("no row for strategy '" + strategy + "'");
}

std::vector<std::string> all_strategies(const Dataset& ds, const CrossValidationOptions& opts) {
    std::vector<std::string> out;
    for (const auto& d : opts.detectors) out.push_back(d.name);
    for (const auto& [name, _] : ds.external_predictions) out.push_back("ext:" + name);
    for (const char* s : {"human", "count", "hard", "soft", "late_fusion", "human_first",
                          "model_first", "meta", "hybrid_late_fusion"}) {
        out.emplace_back(s);
    }
    return out;
}

namespace {

Labels restrict(const Labels& labels, const AccountSet& ids) {
    Labels out;
    for (const auto& id : ids) out.emplace(id, labels.at(id));
    return out;
}

void require_two_classes(const Labels& labels, const std::string& what) {
    std::size_t bots = 0;
    for (const auto& [_, r] : labels) bots += r == Role::Bot;
    if (bots == 0 || bots == labels.size()) {
        throw std::invalid_argument(what + " contains a single class");
    }
}

FoldAssignment split_labels(const Labels& labels, int k, std::uint64_t seed) {
    Dataset tmp;
    for (const auto& [id, role] : labels) {
        Account a;
        a.id = id;
        a.role = role;
        tmp.accounts.push_back(std::move(a));
    }
    return split_folds(tmp, k, seed);
}

TrainingSet training_set(const std::map<AccountId, FeatureVector>& features, const Labels& labels) {
    TrainingSet ts;
    for (const auto& [id, role] : labels) ts.add(features.at(id), role);
    return ts;
}

PredictionSet score(const DetectorModel& model, const std::map<AccountId, FeatureVector>& features,
                    const AccountSet& ids, const std::string& source) {
    PredictionSet out;
    out.source = source;
    for (const auto& id : ids) out.scores[id] = predict(model, features.at(id));
    return out;
}

PredictionSet restrict(const PredictionSet& set, const AccountSet& ids) {
    PredictionSet out;
    out.source = set.source;
    for (const auto& id : ids) {
        auto it = set.scores.find(id);
        if (it == set.scores.end()) {
            throw DataError("external source '" + set.source + "' does not cover '" + id + "'");
        }
        out.scores.emplace(id, it->second);
    }
    return out;
}

FusionConfig fit_fusion(const std::vector<PredictionSet>& sets, const Labels& labels,
                        const CrossValidationOptions& opts, std::uint64_t seed) {
    if (sets.size() >= 2) {
        return optimize_fusion_weights(sets, labels, opts.fusion_samples, seed, opts.threshold_grid);
    }
    return FusionConfig{{1.0}, optimize_soft_threshold(sets, labels, opts.threshold_grid)};
}

AccountSet flags_at_half(const PredictionSet& s) {
    AccountSet out;
    for (const auto& [id, p] : s.scores)
        if (p >= 0.5) out.insert(id);
    return out;
}

}  // namespace

CrossValidationResult cross_validated_compare(const Dataset& ds,
                                              const std::vector<std::string>& strategies,
                                              const CrossValidationOptions& opts) {
    if (opts.detectors.empty() && ds.external_predictions.empty()) {
        throw std::invalid_argument("cross validation needs at least one detector or external source");
    }
    const Labels labels = ds.labels();
    const auto features = extract_all_features(ds, ds.n_days);
    const FoldAssignment folds = split_folds(ds, opts.k, derive_seed(opts.seed, "cv_folds"));

    CrossValidationResult result;
    for (const auto& d : opts.detectors) result.ai_sources.push_back(d.name);
    for (const auto& [name, _] : ds.external_predictions) result.ai_sources.push_back("ext:" + name);

    std::map<std::string, AccountSet> flags;
    for (const auto& s : strategies) flags[s];

    for (int f = 0; f < opts.k; ++f) {
        const AccountSet test_ids = folds.fold(f);
        const AccountSet train_ids = folds.complement(f);
        const Labels train_labels = restrict(labels, train_ids);
        require_two_classes(train_labels, "training split of fold " + std::to_string(f));
        require_two_classes(restrict(labels, test_ids), "fold " + std::to_string(f));
        const std::string fold_tag = "fold" + std::to_string(f);

        // Validation scores: out-of-fold predictions inside the training split.
        std::vector<PredictionSet> val_sets, test_sets;
        const FoldAssignment inner =
            split_labels(train_labels, opts.inner_folds, derive_seed(opts.seed, fold_tag + "/inner"));
        for (const auto& d : opts.detectors) {
            PredictionSet val;
            val.source = d.name;
            for (int g = 0; g < opts.inner_folds; ++g) {
                const AccountSet held = inner.fold(g);
                const Labels fit_labels = restrict(train_labels, inner.complement(g));
                require_two_classes(fit_labels, "inner split of fold " + std::to_string(f));
                const auto model = train_detector(d.spec, training_set(features, fit_labels),
                                                  derive_seed(opts.seed, fold_tag + "/" + d.name +
                                                                             "/inner" + std::to_string(g)));
                for (auto& [id, p] : score(model, features, held, d.name).scores) val.scores[id] = p;
            }
            val_sets.push_back(std::move(val));
            const auto model = train_detector(d.spec, training_set(features, train_labels),
                                              derive_seed(opts.seed, fold_tag + "/" + d.name));
            test_sets.push_back(score(model, features, test_ids, d.name));
        }
        for (const auto& [name, set] : ds.external_predictions) {
            val_sets.push_back(restrict(set, train_ids));
            val_sets.back().source = "ext:" + name;
            test_sets.push_back(restrict(set, test_ids));
            test_sets.back().source = "ext:" + name;
        }

        HumanEnsembleConfig human = make_human_config(ds.reports, labels, train_ids, opts.tau_from_mean);
        if (!opts.tau_from_mean) human.tau = opts.tau;

        FoldRecord rec;
        rec.fold = f;
        rec.tau = human.tau;
        rec.soft_threshold = optimize_soft_threshold(val_sets, train_labels, opts.threshold_grid);
        rec.fusion = fit_fusion(val_sets, train_labels, opts, derive_seed(opts.seed, fold_tag + "/fusion"));
        {
            auto hybrid_sets = val_sets;
            hybrid_sets.push_back(human_score_channel(ds.reports, human, train_ids));
            rec.hybrid_fusion = optimize_fusion_weights(hybrid_sets, train_labels, opts.fusion_samples,
                                                        derive_seed(opts.seed, fold_tag + "/hybrid"),
                                                        opts.threshold_grid);
        }

        auto intersect = [&](const AccountSet& s) {
            AccountSet out;
            for (const auto& id : s)
                if (test_ids.count(id)) out.insert(id);
            return out;
        };

        for (const auto& strategy : strategies) {
            AccountSet fold_flags;
            auto ai = std::find_if(test_sets.begin(), test_sets.end(),
                                   [&](const PredictionSet& s) { return s.source == strategy; });
            if (ai != test_sets.end()) {
                fold_flags = flags_at_half(*ai);
            } else if (strategy == "human") {
                fold_flags = intersect(quality_weighted(ds.reports, human).flags);
            } else if (strategy == "count") {
                fold_flags = intersect(count_based(ds.reports, 1));
            } else if (strategy == "hard") {
                fold_flags = hard_vote(test_sets, test_ids);
            } else if (strategy == "soft") {
                fold_flags = soft_vote(test_sets, rec.soft_threshold, test_ids);
            } else if (strategy == "late_fusion") {
                fold_flags = late_fusion(test_sets, rec.fusion, test_ids);
            } else if (strategy == "human_first") {
                fold_flags = human_first(test_sets, ds.reports, rec.soft_threshold, test_ids);
            } else if (strategy == "model_first") {
                fold_flags = model_first(test_sets, ds.reports, human, rec.soft_threshold, test_ids);
            } else if (strategy == "meta") {
                auto voters = test_sets;
                if (opts.individual_reporter_voters) {
                    for (auto& v : individual_reporter_voters(ds.reports)) voters.push_back(std::move(v));
                } else {
                    voters.push_back(human_ensemble_voter(ds.reports, human));
                }
                fold_flags = meta_vote(voters, rec.soft_threshold, test_ids);
            } else if (strategy == "hybrid_late_fusion") {
                fold_flags = hybrid_late_fusion(test_sets, ds.reports, human, rec.hybrid_fusion, test_ids);
            } else {
                throw std::invalid_argument("unknown strategy '" + strategy + "'");
            }
            flags[strategy].insert(fold_flags.begin(), fold_flags.end());
        }
        result.folds.push_back(std::move(rec));
    }

    const AccountSet universe = ds.universe();
    for (const auto& strategy : strategies) {
        StrategyRow row;
        row.strategy = strategy;
        row.counts = confusion(flags[strategy], labels, universe);
        row.metrics = bot_class_metrics(row.counts);
        result.rows.push_back(std::move(row));
    }
    return result;
}

}  // namespace botlab
