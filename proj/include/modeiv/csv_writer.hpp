#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace modeiv {

/// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);

/// Splits one CSV line on commas. No quoting support.
std::vector<std::string> split_csv_line(const std::string& line);

/// Writes `contents` to a temporary sibling then renames it over `path`.
void write_file_atomic(const std::filesystem::path& path,
                       const std::string& contents);

std::string read_file(const std::filesystem::path& path);

}  // namespace modeiv
