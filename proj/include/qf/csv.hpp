#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace qf::csv {

/// Splits a CSV line on commas (no quoting; identifiers and numbers only).
std::vector<std::string_view> split(std::string_view line);
/// Splits text into lines, stripping trailing '\r'.
std::vector<std::string_view> lines(std::string_view text);

/// Shortest decimal text that parses back to exactly `v`.
std::string format_double(double v);
/// Strict full-field parse; returns false on trailing garbage or non-finite.
bool parse_double(std::string_view text, double& out);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

}  // namespace qf::csv
