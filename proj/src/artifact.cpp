#include "botlab/artifact.hpp"

#include "botlab/core_data.hpp"
#include "botlab/csv.hpp"

#include <fstream>
#include <sstream>

namespace botlab {

namespace {

std::string render_csv(const Table& t) {
    std::ostringstream out;
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
        out << '\n';
    };
    line(t.header);
    for (const auto& r : t.rows) {
        if (r.size() != t.header.size()) {
            throw std::invalid_argument("table '" + t.name + "': row width does not match header");
        }
        line(r);
    }
    return out.str();
}

}  // namespace

nlohmann::json write_run_artifact(const std::vector<Table>& tables, const nlohmann::json& fields,
                                  const std::filesystem::path& out_dir) {
    // Render everything first so a bad table cannot leave half a run behind.
    std::vector<std::pair<std::filesystem::path, std::string>> files;
    nlohmann::json manifest = fields.is_object() ? fields : nlohmann::json::object();
    manifest["artifact_version"] = kArtifactVersion;
    nlohmann::json names = nlohmann::json::array();
    for (const auto& t : tables) {
        files.emplace_back(out_dir / (t.name + ".csv"), render_csv(t));
        names.push_back(t.name + ".csv");
    }
    manifest["tables"] = names;
    files.emplace_back(out_dir / "manifest.json", manifest.dump(2) + "\n");

    std::filesystem::create_directories(out_dir);
    std::vector<std::filesystem::path> written;
    try {
        for (const auto& [path, body] : files) {
            write_file_atomic(path, body);
            written.push_back(path);
        }
    } catch (...) {
        std::error_code ec;
        for (const auto& p : written) std::filesystem::remove(p, ec);
        throw;
    }
    return manifest;
}

Table read_table(const std::filesystem::path& csv_path) {
    std::ifstream in(csv_path);
    if (!in) throw DataError("cannot open '" + csv_path.string() + "'");
    Table t;
    t.name = csv_path.stem().string();
    for (auto& row : read_csv(in, csv_path.filename().string(), {}, &t.header)) {
        t.rows.push_back(std::move(row.fields));
    }
    return t;
}

}  // namespace botlab
