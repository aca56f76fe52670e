#pragma once

// Domain types shared by every module, plus dataset I/O and fold splitting.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace botlab {

enum class Role { Human, Bot };
enum class Status { Active, Dormant, Suspended };
// Suspend is written by the platform's detector scan, not by an account.
enum class Action { Post, Like, Follow, Idle, Activate, Suspend };

std::string_view to_string(Role r);
std::string_view to_string(Status s);
std::string_view to_string(Action a);
Role parse_role(std::string_view s);
Status parse_status(std::string_view s);
Action parse_action(std::string_view s);

using AccountId = std::string;
using AccountSet = std::set<AccountId>;
using Labels = std::map<AccountId, Role>;

struct Account {
    AccountId id;
    Role role = Role::Human;
    std::optional<int> campaign;  // 1-based; present iff role == Bot
    int created_day = 0;
    Status status = Status::Active;
    std::map<int, double> sentiment;  // topic -> polarity in [-1, 1]
    std::map<std::string, double> metadata;
};

// Like targets a post; post ids are "<author>#<ordinal>" where ordinal counts
// the author's earlier posts from zero.
struct InteractionEvent {
    std::int64_t timestamp = 0;
    int day = 1;
    AccountId actor;
    Action action = Action::Idle;
    std::optional<std::string> target;
    std::optional<double> polarity;
    std::optional<int> topic;
};

std::string make_post_id(std::string_view author, std::int64_t ordinal);
// Author part of a post id; the input itself when it has no '#'.
std::string_view post_author(std::string_view target);

struct Report {
    int day = 1;
    AccountId reporter;
    AccountId subject;

    auto operator<=>(const Report&) const = default;
};

// Per-account bot probabilities from one detector or one aggregation
// strategy. The accounts with a score are the source's coverage.
struct PredictionSet {
    std::string source;
    std::map<AccountId, double> scores;

    bool covers(const AccountId& a) const { return scores.count(a) != 0; }
    double score_or(const AccountId& a, double fallback) const;
};

class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Dataset {
    std::vector<Account> accounts;
    std::vector<InteractionEvent> events;
    std::vector<Report> reports;
    std::map<std::string, PredictionSet> external_predictions;
    int n_days = 1;
    int steps_per_day = 48;

    const Account* find(std::string_view id) const;
    Labels labels() const;
    AccountSet universe() const;
    std::size_t bot_count() const;

    // Rebuilds the id index; call after mutating `accounts`.
    void reindex();
    // Throws DataError naming the first violated invariant.
    void validate() const;

private:
    std::unordered_map<std::string, std::size_t> index_;
};

struct LoadOptions {
    int steps_per_day = 48;
    int n_days = 0;  // 0 infers the horizon from the data
};

Dataset load_dataset(const std::filesystem::path& accounts_path,
                     const std::filesystem::path& events_path,
                     const std::filesystem::path& reports_path,
                     const std::vector<std::filesystem::path>& prediction_paths = {},
                     const LoadOptions& opts = {});

// Reads accounts.jsonl, events.jsonl, reports.csv and any predictions*.csv
// from a directory; picks up n_days / steps_per_day from manifest.json.
Dataset load_dataset_dir(const std::filesystem::path& dir);

// Writes the file set consumed by load_dataset_dir. Rows are emitted in
// container order, so equal datasets serialize byte-identically.
void save_dataset(const Dataset& ds, const std::filesystem::path& dir);

std::map<std::string, PredictionSet> load_predictions(const std::filesystem::path& path);
void save_predictions(const std::vector<PredictionSet>& sets, const std::filesystem::path& path);

struct FoldAssignment {
    int k = 0;
    std::map<AccountId, int> assignment;

    AccountSet fold(int i) const;
    AccountSet complement(int i) const;
};

// Stratified by role: shuffled bots then shuffled humans are dealt round-robin,
// so fold sizes and per-fold bot counts each differ by at most one.
FoldAssignment split_folds(const Dataset& ds, int k, std::uint64_t seed);

}  // namespace botlab
