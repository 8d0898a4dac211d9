#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace m3h {

// Shortest decimal text that parses back to the same double.
std::string format_double(double v);
std::optional<double> parse_double(std::string_view text);

// Plain comma splitting; fields carry no quoting. Trailing '\r' is dropped.
std::vector<std::string_view> split_csv_line(std::string_view line);

std::vector<std::string> read_lines(const std::filesystem::path& path);
std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string join(const std::vector<std::string>& parts, std::string_view sep);
std::vector<std::string> split_list(std::string_view text, char sep = ',');

}  // namespace m3h
