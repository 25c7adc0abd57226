// Minimal CSV reading shared by the dataset loaders and the report command.
#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace nkb::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  // 1-based source line of each row
};

std::vector<std::string> split(std::string_view line);

/// Reads a header plus data rows; blank lines are skipped. Every row must have
/// as many fields as the header, otherwise ParseError names the line.
Table read(const std::filesystem::path& path);

double to_double(const std::string& field, std::size_t line, const std::string& column);
long to_integer(const std::string& field, std::size_t line, const std::string& column);

}  // namespace nkb::csv
