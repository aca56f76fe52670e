#include "botlab/features.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <unordered_map>

namespace botlab {

const std::shared_ptr<const FeatureSchema>& default_feature_schema() {
    static const auto schema = std::make_shared<const FeatureSchema>(FeatureSchema{
        "post_rate", "follower_growth", "like_out_rate", "like_in_rate", "follow_out_rate",
        "polarity_mean", "polarity_variance", "mean_post_gap", "active_day_fraction",
        "follower_following_ratio"});
    return schema;
}

namespace {

struct Tally {
    std::size_t posts = 0, likes_out = 0, likes_in = 0, follows_out = 0, follows_in = 0;
    double pol_sum = 0, pol_sq = 0;
    std::int64_t first_post = -1, last_post = -1;
    std::set<int> active_days;
    int first_day = 0, last_day = 0;  // days the account acted or was acted on

    void touch(int day) {
        if (first_day == 0 || day < first_day) first_day = day;
        last_day = std::max(last_day, day);
    }
};

}  // namespace

std::map<AccountId, FeatureVector> extract_features_until(std::span<const Account> accounts,
                                                          std::span<const InteractionEvent> events,
                                                          std::int64_t end_step) {
    std::unordered_map<std::string, Tally> tally;
    for (const auto& a : accounts) tally[a.id];
    for (const auto& e : events) {
        if (e.timestamp >= end_step) break;  // log is sorted by timestamp
        if (e.action == Action::Suspend || e.action == Action::Idle) continue;
        auto actor = tally.find(e.actor);
        Tally* t = actor == tally.end() ? nullptr : &actor->second;
        if (t) t->touch(e.day);
        if (e.action == Action::Post) {
            if (!t) continue;
            t->active_days.insert(e.day);
            ++t->posts;
            const double p = e.polarity.value_or(0.0);
            t->pol_sum += p;
            t->pol_sq += p * p;
            if (t->first_post < 0) t->first_post = e.timestamp;
            t->last_post = e.timestamp;
        } else if (e.action == Action::Like || e.action == Action::Follow) {
            const bool like = e.action == Action::Like;
            if (t) {
                t->active_days.insert(e.day);
                ++(like ? t->likes_out : t->follows_out);
            }
            if (e.target) {
                auto tgt = tally.find(std::string(post_author(*e.target)));
                if (tgt != tally.end() && tgt->first != e.actor) {
                    tgt->second.touch(e.day);
                    ++(like ? tgt->second.likes_in : tgt->second.follows_in);
                }
            }
        } else if (t) {
            t->active_days.insert(e.day);
        }
    }

    std::map<AccountId, FeatureVector> out;
    for (const auto& a : accounts) {
        const Tally& t = tally.at(a.id);
        std::vector<double> v(kFeatureCount, 0.0);
        // Per-day rates over the account's own observed span, so the cutoff only
        // matters through which events it admits.
        const double span = t.first_day > 0 ? static_cast<double>(t.last_day - t.first_day + 1) : 0.0;
        auto rate = [&](std::size_t n) { return span > 0 ? static_cast<double>(n) / span : 0.0; };
        v[kPostRate] = rate(t.posts);
        v[kFollowerGrowth] = rate(t.follows_in);
        v[kLikeOutRate] = rate(t.likes_out);
        v[kLikeInRate] = rate(t.likes_in);
        v[kFollowOutRate] = rate(t.follows_out);
        if (t.posts > 0) {
            const double n = static_cast<double>(t.posts);
            const double mean = t.pol_sum / n;
            v[kPolarityMean] = mean;
            v[kPolarityVariance] = std::max(0.0, t.pol_sq / n - mean * mean);
        }
        if (t.posts > 1) {
            v[kMeanPostGap] = static_cast<double>(t.last_post - t.first_post) /
                              static_cast<double>(t.posts - 1);
        }
        if (span > 0) v[kActiveDayFraction] = static_cast<double>(t.active_days.size()) / span;
        if (t.follows_out > 0) {
            v[kFollowerFollowingRatio] =
                static_cast<double>(t.follows_in) / static_cast<double>(t.follows_out);
        }
        out.emplace(a.id, FeatureVector{a.id, std::move(v), default_feature_schema()});
    }
    return out;
}

std::map<AccountId, FeatureVector> extract_all_features(const Dataset& ds, int up_to_day) {
    if (up_to_day < 1 || up_to_day > ds.n_days) {
        throw std::invalid_argument("extract_features: up_to_day " + std::to_string(up_to_day) +
                                    " outside [1, " + std::to_string(ds.n_days) + "]");
    }
    return extract_features_until(ds.accounts, ds.events,
                                  static_cast<std::int64_t>(up_to_day) * ds.steps_per_day);
}

FeatureVector extract_features(const Dataset& ds, const AccountId& account, int up_to_day) {
    const Account* a = ds.find(account);
    if (a == nullptr) throw DataError("unknown account '" + account + "'");
    if (up_to_day < 1 || up_to_day > ds.n_days) {
        throw std::invalid_argument("extract_features: up_to_day " + std::to_string(up_to_day) +
                                    " outside [1, " + std::to_string(ds.n_days) + "]");
    }
    auto one = extract_features_until(std::span<const Account>(a, 1), ds.events,
                                      static_cast<std::int64_t>(up_to_day) * ds.steps_per_day);
    return std::move(one.begin()->second);
}

}  // namespace botlab
