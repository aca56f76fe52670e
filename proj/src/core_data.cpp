#include "botlab/core_data.hpp"

#include "botlab/csv.hpp"
#include "botlab/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <tuple>
#include <sstream>

namespace botlab {

using nlohmann::json;

std::string_view to_string(Role r) { return r == Role::Bot ? "bot" : "human"; }

std::string_view to_string(Status s) {
    switch (s) {
        case Status::Active: return "active";
        case Status::Dormant: return "dormant";
        case Status::Suspended: return "suspended";
    }
    return "?";
}

std::string_view to_string(Action a) {
    switch (a) {
        case Action::Post: return "post";
        case Action::Like: return "like";
        case Action::Follow: return "follow";
        case Action::Idle: return "idle";
        case Action::Activate: return "activate";
        case Action::Suspend: return "suspend";
    }
    return "?";
}

Role parse_role(std::string_view s) {
    if (s == "bot") return Role::Bot;
    if (s == "human") return Role::Human;
    throw DataError("unknown role '" + std::string(s) + "'");
}

Status parse_status(std::string_view s) {
    if (s == "active") return Status::Active;
    if (s == "dormant") return Status::Dormant;
    if (s == "suspended") return Status::Suspended;
    throw DataError("unknown status '" + std::string(s) + "'");
}

Action parse_action(std::string_view s) {
    for (Action a : {Action::Post, Action::Like, Action::Follow, Action::Idle, Action::Activate,
                     Action::Suspend}) {
        if (s == to_string(a)) return a;
    }
    throw DataError("unknown action '" + std::string(s) + "'");
}

std::string make_post_id(std::string_view author, std::int64_t ordinal) {
    return std::string(author) + "#" + std::to_string(ordinal);
}

std::string_view post_author(std::string_view target) {
    const auto hash = target.find('#');
    return hash == std::string_view::npos ? target : target.substr(0, hash);
}

double PredictionSet::score_or(const AccountId& a, double fallback) const {
    auto it = scores.find(a);
    return it == scores.end() ? fallback : it->second;
}

// ---------------------------------------------------------------- Dataset

const Account* Dataset::find(std::string_view id) const {
    auto it = index_.find(std::string(id));
    if (it != index_.end()) return &accounts[it->second];
    if (index_.empty() && !accounts.empty()) {
        for (const auto& a : accounts)
            if (a.id == id) return &a;
    }
    return nullptr;
}

Labels Dataset::labels() const {
    Labels out;
    for (const auto& a : accounts) out.emplace(a.id, a.role);
    return out;
}

AccountSet Dataset::universe() const {
    AccountSet out;
    for (const auto& a : accounts) out.insert(a.id);
    return out;
}

std::size_t Dataset::bot_count() const {
    return static_cast<std::size_t>(std::count_if(
        accounts.begin(), accounts.end(), [](const Account& a) { return a.role == Role::Bot; }));
}

void Dataset::reindex() {
    index_.clear();
    for (std::size_t i = 0; i < accounts.size(); ++i) {
        if (!index_.emplace(accounts[i].id, i).second) {
            throw DataError("duplicate account id '" + accounts[i].id + "'");
        }
    }
}

namespace {

void require_account(const Dataset& ds, std::string_view id, std::string_view where) {
    if (ds.find(id) == nullptr) {
        throw DataError(std::string(where) + ": unknown account '" + std::string(id) + "'");
    }
}

}  // namespace

void Dataset::validate() const {
    if (n_days < 1) throw DataError("n_days must be >= 1");
    if (steps_per_day < 1) throw DataError("steps_per_day must be >= 1");
    for (const auto& a : accounts) {
        if (a.campaign.has_value() != (a.role == Role::Bot)) {
            throw DataError("account '" + a.id + "': campaign must be present iff role is bot");
        }
        if (a.created_day < 0) throw DataError("account '" + a.id + "': negative created_day");
        for (const auto& [topic, v] : a.sentiment) {
            if (!(v >= -1.0 && v <= 1.0)) {
                throw DataError("account '" + a.id + "': sentiment out of [-1,1] on topic " +
                                std::to_string(topic));
            }
        }
    }
    std::int64_t prev_ts = std::numeric_limits<std::int64_t>::min();
    for (std::size_t i = 0; i < events.size(); ++i) {
        const auto& e = events[i];
        const std::string where = "event " + std::to_string(i);
        if (e.timestamp < prev_ts) throw DataError(where + ": timestamps not sorted");
        prev_ts = e.timestamp;
        if (e.timestamp < 0) throw DataError(where + ": negative timestamp");
        if (e.day != static_cast<int>(e.timestamp / steps_per_day) + 1) {
            throw DataError(where + ": day inconsistent with timestamp");
        }
        if (e.day < 1 || e.day > n_days) throw DataError(where + ": day out of range");
        require_account(*this, e.actor, where);
        if (e.polarity.has_value() != (e.action == Action::Post)) {
            throw DataError(where + ": polarity must be present iff action is post");
        }
        if (e.polarity && !(*e.polarity >= -1.0 && *e.polarity <= 1.0)) {
            throw DataError(where + ": polarity out of [-1,1]");
        }
        const bool needs_target =
            e.action == Action::Like || e.action == Action::Follow || e.action == Action::Activate;
        if (needs_target && !e.target) throw DataError(where + ": missing target");
        if (e.target) require_account(*this, post_author(*e.target), where);
    }
    std::set<std::tuple<AccountId, AccountId, int>> seen;
    for (std::size_t i = 0; i < reports.size(); ++i) {
        const auto& r = reports[i];
        const std::string where = "report " + std::to_string(i);
        require_account(*this, r.reporter, where);
        require_account(*this, r.subject, where);
        if (r.reporter == r.subject) throw DataError(where + ": reporter equals subject");
        if (find(r.reporter)->role != Role::Human) {
            throw DataError(where + ": reporter '" + r.reporter + "' is not human");
        }
        if (r.day < 1 || r.day > n_days) throw DataError(where + ": day out of range");
        if (!seen.emplace(r.reporter, r.subject, r.day).second) {
            throw DataError(where + ": duplicate (reporter, subject, day)");
        }
    }
    for (const auto& [name, ps] : external_predictions) {
        for (const auto& [id, p] : ps.scores) {
            require_account(*this, id, "predictions '" + name + "'");
            if (!(p >= 0.0 && p <= 1.0)) {
                throw DataError("predictions '" + name + "': probability out of [0,1] for '" + id +
                                "'");
            }
        }
    }
}

// ---------------------------------------------------------------- loading

namespace {

std::ifstream open_input(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw DataError("cannot open '" + p.string() + "'");
    return in;
}

std::string loc(const std::filesystem::path& p, std::size_t line) {
    return p.filename().string() + ":" + std::to_string(line);
}

template <typename T>
T get_field(const json& j, const char* key, const std::string& where) {
    auto it = j.find(key);
    if (it == j.end()) throw DataError(where + ": missing field '" + key + "'");
    try {
        return it->get<T>();
    } catch (const json::exception&) {
        throw DataError(where + ": field '" + key + "' has the wrong type");
    }
}

Account parse_account(const json& j, const std::string& where) {
    Account a;
    a.id = get_field<std::string>(j, "id", where);
    try {
        a.role = parse_role(get_field<std::string>(j, "role", where));
        a.status = parse_status(j.value("status", std::string("active")));
    } catch (const DataError& e) {
        throw DataError(where + ": " + e.what());
    }
    if (auto it = j.find("campaign"); it != j.end() && !it->is_null()) {
        a.campaign = get_field<int>(j, "campaign", where);
    }
    a.created_day = j.value("created_day", 0);
    if (auto it = j.find("sentiment"); it != j.end()) {
        for (const auto& [k, v] : it->items()) {
            if (!v.is_number()) throw DataError(where + ": sentiment values must be numbers");
            a.sentiment[std::stoi(k)] = v.get<double>();
        }
    }
    if (auto it = j.find("metadata"); it != j.end()) {
        for (const auto& [k, v] : it->items()) {
            if (!v.is_number()) throw DataError(where + ": metadata '" + k + "' must be a number");
            a.metadata[k] = v.get<double>();
        }
    }
    return a;
}

InteractionEvent parse_event(const json& j, const std::string& where) {
    InteractionEvent e;
    e.timestamp = get_field<std::int64_t>(j, "timestamp", where);
    e.day = get_field<int>(j, "day", where);
    e.actor = get_field<std::string>(j, "actor", where);
    try {
        e.action = parse_action(get_field<std::string>(j, "action", where));
    } catch (const DataError& err) {
        throw DataError(where + ": " + err.what());
    }
    if (auto it = j.find("target"); it != j.end() && !it->is_null())
        e.target = get_field<std::string>(j, "target", where);
    if (auto it = j.find("polarity"); it != j.end() && !it->is_null())
        e.polarity = get_field<double>(j, "polarity", where);
    if (auto it = j.find("topic"); it != j.end() && !it->is_null())
        e.topic = get_field<int>(j, "topic", where);
    return e;
}

template <typename F>
void for_each_jsonl(const std::filesystem::path& p, F&& f) {
    auto in = open_input(p);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw DataError(loc(p, n) + ": column " + std::to_string(e.byte) + ": malformed JSON");
        }
        if (!j.is_object()) throw DataError(loc(p, n) + ": expected a JSON object");
        f(j, loc(p, n));
    }
}

std::vector<Report> load_reports(const std::filesystem::path& p) {
    std::vector<Report> out;
    auto in = open_input(p);
    const auto rows = read_csv(in, p.filename().string(), {"day", "reporter", "subject"});
    for (const auto& row : rows) {
        Report r;
        r.day = parse_int_field(row, 0);
        r.reporter = row.fields[1];
        r.subject = row.fields[2];
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace

std::map<std::string, PredictionSet> load_predictions(const std::filesystem::path& path) {
    std::map<std::string, PredictionSet> out;
    auto in = open_input(path);
    const auto rows = read_csv(in, path.filename().string(), {"source", "account", "probability"});
    for (const auto& row : rows) {
        const double p = parse_real_field(row, 2);
        if (!(p >= 0.0 && p <= 1.0)) {
            throw DataError(row.where() + ": column 3: probability " + row.fields[2] +
                            " outside [0,1]");
        }
        auto& set = out[row.fields[0]];
        set.source = row.fields[0];
        if (!set.scores.emplace(row.fields[1], p).second) {
            throw DataError(row.where() + ": duplicate account '" + row.fields[1] + "'");
        }
    }
    return out;
}

Dataset load_dataset(const std::filesystem::path& accounts_path,
                     const std::filesystem::path& events_path,
                     const std::filesystem::path& reports_path,
                     const std::vector<std::filesystem::path>& prediction_paths,
                     const LoadOptions& opts) {
    Dataset ds;
    ds.steps_per_day = opts.steps_per_day;
    for_each_jsonl(accounts_path, [&](const json& j, const std::string& where) {
        ds.accounts.push_back(parse_account(j, where));
    });
    for_each_jsonl(events_path, [&](const json& j, const std::string& where) {
        ds.events.push_back(parse_event(j, where));
    });
    ds.reports = load_reports(reports_path);
    for (const auto& p : prediction_paths) {
        for (auto& [name, set] : load_predictions(p)) {
            if (!ds.external_predictions.emplace(name, std::move(set)).second) {
                throw DataError("prediction source '" + name + "' defined twice");
            }
        }
    }
    if (opts.n_days > 0) {
        ds.n_days = opts.n_days;
    } else {
        int days = 1;
        for (const auto& e : ds.events) days = std::max(days, e.day);
        for (const auto& r : ds.reports) days = std::max(days, r.day);
        ds.n_days = days;
    }
    ds.reindex();
    ds.validate();
    return ds;
}

Dataset load_dataset_dir(const std::filesystem::path& dir) {
    LoadOptions opts;
    const auto manifest = dir / "manifest.json";
    if (std::filesystem::exists(manifest)) {
        std::ifstream in(manifest);
        try {
            const json m = json::parse(in);
            if (m.contains("dataset")) {
                opts.n_days = m["dataset"].value("n_days", 0);
                opts.steps_per_day = m["dataset"].value("steps_per_day", 48);
            }
        } catch (const json::exception&) {
            throw DataError("manifest.json: malformed JSON");
        }
    }
    std::vector<std::filesystem::path> preds;
    if (std::filesystem::is_directory(dir)) {
        for (const auto& entry : std::filesystem::directory_iterator(dir)) {
            const auto name = entry.path().filename().string();
            if (name.rfind("predictions", 0) == 0 && entry.path().extension() == ".csv") {
                preds.push_back(entry.path());
            }
        }
    }
    std::sort(preds.begin(), preds.end());
    return load_dataset(dir / "accounts.jsonl", dir / "events.jsonl", dir / "reports.csv", preds,
                        opts);
}

// ---------------------------------------------------------------- saving

namespace {

json account_json(const Account& a) {
    json j = json::object();
    j["id"] = a.id;
    j["role"] = to_string(a.role);
    j["campaign"] = a.campaign ? json(*a.campaign) : json(nullptr);
    j["created_day"] = a.created_day;
    j["status"] = to_string(a.status);
    json s = json::object();
    for (const auto& [topic, v] : a.sentiment) s[std::to_string(topic)] = v;
    j["sentiment"] = s;
    json m = json::object();
    for (const auto& [k, v] : a.metadata) m[k] = v;
    j["metadata"] = m;
    return j;
}

json event_json(const InteractionEvent& e) {
    json j = json::object();
    j["timestamp"] = e.timestamp;
    j["day"] = e.day;
    j["actor"] = e.actor;
    j["action"] = to_string(e.action);
    if (e.target) j["target"] = *e.target;
    if (e.polarity) j["polarity"] = *e.polarity;
    if (e.topic) j["topic"] = *e.topic;
    return j;
}

}  // namespace

void save_predictions(const std::vector<PredictionSet>& sets, const std::filesystem::path& path) {
    std::ostringstream out;
    out << "source,account,probability\n";
    for (const auto& s : sets) {
        for (const auto& [id, p] : s.scores) out << s.source << ',' << id << ',' << format_real(p) << '\n';
    }
    write_file_atomic(path, out.str());
}

void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::ostringstream acc;
    for (const auto& a : ds.accounts) acc << account_json(a).dump() << '\n';
    std::ostringstream ev;
    for (const auto& e : ds.events) ev << event_json(e).dump() << '\n';
    std::ostringstream rep;
    rep << "day,reporter,subject\n";
    for (const auto& r : ds.reports) rep << r.day << ',' << r.reporter << ',' << r.subject << '\n';
    write_file_atomic(dir / "accounts.jsonl", acc.str());
    write_file_atomic(dir / "events.jsonl", ev.str());
    write_file_atomic(dir / "reports.csv", rep.str());
    if (!ds.external_predictions.empty()) {
        std::vector<PredictionSet> sets;
        for (const auto& [_, s] : ds.external_predictions) sets.push_back(s);
        save_predictions(sets, dir / "predictions.csv");
    }
}

// ---------------------------------------------------------------- folds

AccountSet FoldAssignment::fold(int i) const {
    AccountSet out;
    for (const auto& [id, f] : assignment)
        if (f == i) out.insert(id);
    return out;
}

AccountSet FoldAssignment::complement(int i) const {
    AccountSet out;
    for (const auto& [id, f] : assignment)
        if (f != i) out.insert(id);
    return out;
}

FoldAssignment split_folds(const Dataset& ds, int k, std::uint64_t seed) {
    if (k < 2) throw std::invalid_argument("split_folds: k must be >= 2");
    if (static_cast<std::size_t>(k) > ds.accounts.size()) {
        throw std::invalid_argument("split_folds: k=" + std::to_string(k) + " exceeds " +
                                    std::to_string(ds.accounts.size()) + " accounts");
    }
    std::vector<AccountId> bots, humans;
    for (const auto& a : ds.accounts) (a.role == Role::Bot ? bots : humans).push_back(a.id);
    std::sort(bots.begin(), bots.end());
    std::sort(humans.begin(), humans.end());
    Rng rng(seed, "split_folds");
    rng.shuffle(bots);
    rng.shuffle(humans);

    FoldAssignment fa;
    fa.k = k;
    std::size_t i = 0;
    for (const auto* group : {&bots, &humans}) {
        for (const auto& id : *group) fa.assignment[id] = static_cast<int>(i++ % k);
    }
    return fa;
}

}  // namespace botlab
