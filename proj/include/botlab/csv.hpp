#pragma once

// Minimal CSV reading/writing for the tool's own tables. Fields never contain
// commas or quotes (account ids, numbers, enum names), so no quoting support.

#include <filesystem>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace botlab {

struct CsvRow {
    std::string file;
    std::size_t line = 0;
    std::vector<std::string> fields;

    std::string where() const { return file + ":" + std::to_string(line); }
};

// Reads a header plus rows. When `expected_header` is non-empty the header
// must match it exactly. Throws DataError with file:line on arity mismatch.
std::vector<CsvRow> read_csv(std::istream& in, const std::string& name,
                             const std::vector<std::string>& expected_header,
                             std::vector<std::string>* header_out = nullptr);

int parse_int_field(const CsvRow& row, std::size_t col);
double parse_real_field(const CsvRow& row, std::size_t col);

// Shortest decimal form that parses back to the same double.
std::string format_real(double x);

// Writes to a sibling temp file and renames it into place; on failure the
// temp file is removed and nothing is left at `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace botlab
