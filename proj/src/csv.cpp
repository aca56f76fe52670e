#include "botlab/csv.hpp"

#include "botlab/core_data.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <system_error>

namespace botlab {

namespace {

std::vector<std::string> split(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        out.emplace_back(line.substr(start, comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

}  // namespace

std::vector<CsvRow> read_csv(std::istream& in, const std::string& name,
                             const std::vector<std::string>& expected_header,
                             std::vector<std::string>* header_out) {
    std::string line;
    std::size_t n = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++n;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) {
            header = split(line);
            break;
        }
    }
    if (header.empty()) {
        if (!expected_header.empty()) throw DataError(name + ": missing header row");
        return {};
    }
    if (!expected_header.empty() && header != expected_header) {
        std::string want;
        for (const auto& h : expected_header) want += (want.empty() ? "" : ",") + h;
        throw DataError(name + ":" + std::to_string(n) + ": header must be '" + want + "'");
    }
    if (header_out) *header_out = header;
    std::vector<CsvRow> rows;
    while (std::getline(in, line)) {
        ++n;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        CsvRow row{name, n, split(line)};
        if (row.fields.size() != header.size()) {
            throw DataError(row.where() + ": expected " + std::to_string(header.size()) +
                            " columns, found " + std::to_string(row.fields.size()));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

int parse_int_field(const CsvRow& row, std::size_t col) {
    const auto& s = row.fields.at(col);
    int v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw DataError(row.where() + ": column " + std::to_string(col + 1) + ": '" + s +
                        "' is not an integer");
    }
    return v;
}

double parse_real_field(const CsvRow& row, std::size_t col) {
    const auto& s = row.fields.at(col);
    double v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
        throw DataError(row.where() + ": column " + std::to_string(col + 1) + ": '" + s +
                        "' is not a number");
    }
    return v;
}

std::string format_real(double x) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, ptr);
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::filesystem::filesystem_error(
            "cannot write", tmp, std::make_error_code(std::errc::permission_denied));
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        out.close();
        if (!out) {
            std::error_code ec;
            std::filesystem::remove(tmp, ec);
            throw std::filesystem::filesystem_error("write failed", tmp,
                                                    std::make_error_code(std::errc::io_error));
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw std::filesystem::filesystem_error("rename failed", path, ec);
    }
}

}  // namespace botlab
