#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tlcqm::csv {

/// Raw comma-separated table. Fields are trimmed of surrounding whitespace
/// and optional double quotes.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Index of `name` in the header, if present.
  std::optional<std::size_t> column(std::string_view name) const;
};

/// Throws EmptyInputError on an empty file or a header without data rows.
Table read(const std::string& path);

std::vector<std::string> split_line(std::string_view line);

/// Parses a finite double; nullopt on failure.
std::optional<double> parse_number(std::string_view cell);

/// Shortest text that round-trips to the same double.
std::string format_number(double value);

}  // namespace tlcqm::csv
