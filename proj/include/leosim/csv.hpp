#pragma once

#include "leosim/units.hpp"

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace leosim {

// Minimal reader for the simple CSV files this project writes: a header line,
// comma-separated fields, no quoting. Lines starting with '#' are comments.
struct CsvTable {
    std::string source;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    // Throws LoadError if the column is missing.
    std::size_t column(std::string_view name) const;
    double number(std::size_t row, std::size_t col) const;
    long long integer(std::size_t row, std::size_t col) const;
};

CsvTable parse_csv(std::string_view text, std::string source = "<memory>");
CsvTable read_csv(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
std::vector<std::string_view> split(std::string_view text, char sep);
std::string_view trim(std::string_view text);

// Fixed-precision seconds with picosecond resolution, e.g. "12.000000123456".
std::string format_seconds(double seconds);
// Exact decimal rendering of a clock value.
std::string format_time(SimTime t);
// Shortest text that parses back to the same double.
std::string format_double(double value);

} // namespace leosim
