#pragma once

// Run artifacts: result tables as CSV plus a JSON manifest recording the
// effective config, seed and tool version.

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace botlab {

inline constexpr const char* kArtifactVersion = "1.0.0";

struct Table {
    std::string name;  // file stem; written as <name>.csv
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    bool operator==(const Table&) const = default;
};

// Writes every table plus manifest.json into `out_dir` (created if needed).
// `fields` is merged into the manifest; "artifact_version" and "tables" are
// filled in. Either every file lands or none does.
nlohmann::json write_run_artifact(const std::vector<Table>& tables, const nlohmann::json& fields,
                                  const std::filesystem::path& out_dir);

Table read_table(const std::filesystem::path& csv_path);

}  // namespace botlab
