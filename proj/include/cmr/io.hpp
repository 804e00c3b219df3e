#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace cmr::io {

std::string read_text(const std::filesystem::path& path);

/// Writes to a sibling temporary file and renames it into place.
void atomic_write(const std::filesystem::path& path, std::string_view contents);

/// Shortest decimal text that round-trips to the same double.
std::string format_double(double value);

/// Parses a decimal number; throws DataError naming `context` on failure.
double parse_double(std::string_view text, std::string_view context);
int parse_int(std::string_view text, std::string_view context);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Index of `name` in the header; throws DataError when absent.
  std::size_t column(std::string_view name) const;
};

/// Comma-separated, first line is the header. Double-quoted fields may contain
/// commas; embedded quotes are written as "".
CsvTable read_csv(const std::filesystem::path& path);
CsvTable parse_csv(std::string_view text, std::string_view context);
std::string to_csv(const CsvTable& table);

}  // namespace cmr::io
