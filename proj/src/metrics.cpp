#include "botlab/metrics.hpp"

#include <stdexcept>

namespace botlab {

ConfusionCounts confusion(const AccountSet& flags, const Labels& labels, const AccountSet& universe) {
    for (const auto& f : flags) {
        if (!universe.count(f)) throw std::invalid_argument("flag '" + f + "' outside universe");
    }
    ConfusionCounts c;
    for (const auto& id : universe) {
        auto it = labels.find(id);
        if (it == labels.end()) throw std::invalid_argument("no label for '" + id + "'");
        const bool bot = it->second == Role::Bot;
        const bool flagged = flags.count(id) != 0;
        if (bot && flagged) ++c.tp;
        else if (!bot && flagged) ++c.fp;
        else if (bot) ++c.fn;
        else ++c.tn;
    }
    return c;
}

ClassMetrics bot_class_metrics(const ConfusionCounts& c) {
    auto ratio = [](double num, double den) { return den > 0 ? num / den : 0.0; };
    ClassMetrics m;
    m.precision = ratio(c.tp, c.tp + c.fp);
    m.recall = ratio(c.tp, c.tp + c.fn);
    m.f1 = ratio(2.0 * m.precision * m.recall, m.precision + m.recall);
    m.accuracy = ratio(c.tp + c.tn, c.total());
    return m;
}

ClassMetrics evaluate_flags(const AccountSet& flags, const Labels& labels, const AccountSet& universe) {
    return bot_class_metrics(confusion(flags, labels, universe));
}

double agreement_rate(const AccountSet& a, const AccountSet& b, const AccountSet& universe) {
    if (universe.empty()) return 1.0;
    std::size_t same = 0;
    for (const auto& id : universe) same += (a.count(id) != 0) == (b.count(id) != 0);
    return static_cast<double>(same) / static_cast<double>(universe.size());
}

double cohen_kappa(const AccountSet& a, const AccountSet& b, const AccountSet& universe) {
    if (universe.empty()) throw std::invalid_argument("cohen_kappa: empty universe");
    const double n = static_cast<double>(universe.size());
    double both = 0, only_a = 0, only_b = 0;
    for (const auto& id : universe) {
        const bool x = a.count(id) != 0, y = b.count(id) != 0;
        both += x && y;
        only_a += x && !y;
        only_b += !x && y;
    }
    const double neither = n - both - only_a - only_b;
    const double p_o = (both + neither) / n;
    const double pa = (both + only_a) / n, pb = (both + only_b) / n;
    const double p_e = pa * pb + (1 - pa) * (1 - pb);
    if (p_e >= 1.0) return 1.0;
    return (p_o - p_e) / (1.0 - p_e);
}

std::map<AccountId, AccountSet> reporters_by_subject(std::span<const Report> reports) {
    std::map<AccountId, AccountSet> out;
    for (const auto& r : reports) out[r.subject].insert(r.reporter);
    return out;
}

std::map<std::size_t, ReportBin> conditional_bot_probability(std::span<const Report> reports,
                                                             const Labels& labels,
                                                             const AccountSet& universe,
                                                             ReportCounting counting) {
    std::map<AccountId, std::size_t> k_of;
    if (counting == ReportCounting::DistinctReporters) {
        for (const auto& [subject, rs] : reporters_by_subject(reports)) k_of[subject] = rs.size();
    } else {
        for (const auto& r : reports) ++k_of[r.subject];
    }
    std::map<std::size_t, ReportBin> bins;
    for (const auto& id : universe) {
        auto it = k_of.find(id);
        auto& bin = bins[it == k_of.end() ? 0 : it->second];
        ++bin.n_accounts;
        bin.n_bots += labels.at(id) == Role::Bot;
    }
    for (auto& [k, bin] : bins) {
        bin.p_bot = static_cast<double>(bin.n_bots) / static_cast<double>(bin.n_accounts);
    }
    return bins;
}

ActivityRatios activity_ratios(std::span<const InteractionEvent> events, const Labels& labels,
                               const AccountId& user) {
    if (!labels.count(user)) throw std::invalid_argument("unknown account '" + user + "'");
    auto is_bot = [&](std::string_view id) {
        auto it = labels.find(std::string(id));
        return it != labels.end() && it->second == Role::Bot;
    };
    std::size_t like_out = 0, like_out_bot = 0, follow_out = 0, follow_out_bot = 0;
    std::size_t like_in = 0, like_in_bot = 0, follow_in = 0, follow_in_bot = 0;
    for (const auto& e : events) {
        if ((e.action != Action::Like && e.action != Action::Follow) || !e.target) continue;
        const auto target = post_author(*e.target);
        const bool like = e.action == Action::Like;
        if (e.actor == user) {
            (like ? like_out : follow_out)++;
            if (is_bot(target)) (like ? like_out_bot : follow_out_bot)++;
        }
        if (target == user && e.actor != user) {
            (like ? like_in : follow_in)++;
            if (is_bot(e.actor)) (like ? like_in_bot : follow_in_bot)++;
        }
    }
    auto pct = [](std::size_t num, std::size_t den) -> std::optional<double> {
        if (den == 0) return std::nullopt;
        return 100.0 * static_cast<double>(num) / static_cast<double>(den);
    };
    return {pct(like_out_bot, like_out), pct(follow_out_bot, follow_out), pct(like_in_bot, like_in),
            pct(follow_in_bot, follow_in)};
}

std::vector<DayMetrics> temporal_evaluation(std::span<const Report> reports, const Labels& labels,
                                            const AccountSet& universe, TemporalMode mode,
                                            int n_days) {
    if (n_days < 1) throw std::invalid_argument("temporal_evaluation: n_days must be >= 1");
    std::vector<DayMetrics> out;
    for (int d = 1; d <= n_days; ++d) {
        AccountSet flags;
        for (const auto& r : reports) {
            const bool in_window = mode == TemporalMode::DaySpecific ? r.day == d : r.day <= d;
            if (in_window && universe.count(r.subject)) flags.insert(r.subject);
        }
        DayMetrics dm;
        dm.day = d;
        dm.n_flagged = flags.size();
        dm.counts = confusion(flags, labels, universe);
        dm.metrics = bot_class_metrics(dm.counts);
        out.push_back(dm);
    }
    return out;
}

std::map<AccountId, ClassMetrics> reporter_metrics_table(std::span<const Report> reports,
                                                         const Labels& labels,
                                                         const AccountSet& universe) {
    std::map<AccountId, AccountSet> flagged;
    for (const auto& r : reports) {
        auto& f = flagged[r.reporter];
        if (universe.count(r.subject)) f.insert(r.subject);
    }
    std::map<AccountId, ClassMetrics> out;
    for (const auto& [reporter, flags] : flagged) out[reporter] = evaluate_flags(flags, labels, universe);
    return out;
}

std::map<AccountId, double> reporter_f1_table(std::span<const Report> reports, const Labels& labels,
                                              const AccountSet& universe) {
    std::map<AccountId, double> out;
    for (const auto& [reporter, m] : reporter_metrics_table(reports, labels, universe)) {
        out[reporter] = m.f1;
    }
    return out;
}

}  // namespace botlab
