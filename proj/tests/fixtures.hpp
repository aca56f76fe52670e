#pragma once

#include "botlab/core_data.hpp"

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

namespace fixture {

using namespace botlab;

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("botlab_" + tag + "_" + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

private:
    std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void spit(const std::filesystem::path& p, const std::string& s) {
    std::ofstream(p, std::ios::binary) << s;
}

inline Account human(const std::string& id) {
    Account a;
    a.id = id;
    a.role = Role::Human;
    return a;
}

inline Account bot(const std::string& id, int campaign = 1) {
    Account a;
    a.id = id;
    a.role = Role::Bot;
    a.campaign = campaign;
    return a;
}

inline InteractionEvent event(std::int64_t ts, const std::string& actor, Action action,
                              std::optional<std::string> target = std::nullopt,
                              std::optional<double> polarity = std::nullopt, int steps_per_day = 48) {
    InteractionEvent e;
    e.timestamp = ts;
    e.day = static_cast<int>(ts / steps_per_day) + 1;
    e.actor = actor;
    e.action = action;
    e.target = std::move(target);
    e.polarity = polarity;
    if (polarity) e.topic = 1;
    return e;
}

// n_humans humans h0.. and n_bots bots b0.., no events.
inline Dataset population(int n_humans, int n_bots, int n_days = 5) {
    Dataset ds;
    ds.n_days = n_days;
    for (int i = 0; i < n_humans; ++i) ds.accounts.push_back(human("h" + std::to_string(i)));
    for (int i = 0; i < n_bots; ++i) ds.accounts.push_back(bot("b" + std::to_string(i), 1 + i % 4));
    ds.reindex();
    return ds;
}

}  // namespace fixture
