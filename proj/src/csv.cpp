#include "csv.hpp"

#include "nkbandit/environments.hpp"

#include <charconv>
#include <fstream>

namespace nkb::csv {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

std::vector<std::string> split(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.emplace_back(trim(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

Table read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path.string() + "'", 0);
  Table t;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto fields = split(line);
    if (t.header.empty()) {
      if (lineno == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0)
        fields = split(std::string_view(line).substr(3));
      t.header = std::move(fields);
      continue;
    }
    if (fields.size() != t.header.size())
      throw ParseError(path.string() + ": line " + std::to_string(lineno) + " has " +
                           std::to_string(fields.size()) + " fields, expected " +
                           std::to_string(t.header.size()),
                       lineno);
    t.rows.push_back(std::move(fields));
    t.line_numbers.push_back(lineno);
  }
  if (t.header.empty()) throw ParseError(path.string() + ": missing header row", 0);
  return t;
}

double to_double(const std::string& field, std::size_t line, const std::string& column) {
  double value = 0;
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc() || ptr != end || field.empty())
    throw ParseError("line " + std::to_string(line) + ": column '" + column + "' is not a number: '" +
                         field + "'",
                     line);
  return value;
}

long to_integer(const std::string& field, std::size_t line, const std::string& column) {
  long value = 0;
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc() || ptr != end || field.empty())
    throw ParseError("line " + std::to_string(line) + ": column '" + column +
                         "' is not an integer: '" + field + "'",
                     line);
  return value;
}

}  // namespace nkb::csv
