#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace arff::csv {

/// Shortest form that reads back to the same double (17 significant digits at most).
std::string format_double(double value);
std::string format_int(std::int64_t value);

double parse_double(std::string_view field);
std::int64_t parse_int(std::string_view field);

/// Splits on commas; no quoting (every field the tool writes is numeric or a bare word).
std::vector<std::string> split_line(std::string_view line);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column position by name; throws IoError if absent.
  std::size_t column(std::string_view name) const;
};

Table read(std::istream& in);
Table read_file(const std::filesystem::path& path);

/// Writes `content` to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace arff::csv
