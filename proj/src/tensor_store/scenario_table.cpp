#include "xferod/error.hpp"
#include "xferod/scenario_table.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace xferod {

namespace {

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

bool is_null_marker(std::string_view cell) {
  return cell.empty() || cell == "NA" || cell == "null" || cell == "nan" || cell == "NaN";
}

}  // namespace

std::vector<double> ScenarioTable::maps() const {
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r.map);
  return out;
}

std::vector<OptionalScore> ScenarioTable::series(std::string_view metric) const {
  const auto it = std::find(metrics.begin(), metrics.end(), metric);
  if (it == metrics.end()) throw std::out_of_range("no metric column '" + std::string(metric) + "'");
  const auto col = static_cast<std::size_t>(it - metrics.begin());
  std::vector<OptionalScore> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r.scores[col]);
  return out;
}

void ScenarioTable::add_row(ScenarioRow row) {
  if (row.scores.size() != metrics.size())
    throw InvalidData("row '" + row.scenario_id + "' has " + std::to_string(row.scores.size()) +
                      " scores for " + std::to_string(metrics.size()) + " metrics");
  if (!(row.map >= 0.0 && row.map <= 1.0))
    throw RangeError("map of scenario '" + row.scenario_id + "' outside [0, 1]");
  for (const auto& r : rows)
    if (r.scenario_id == row.scenario_id)
      throw DuplicateKey("duplicate scenario id '" + row.scenario_id + "'");
  rows.push_back(std::move(row));
}

std::optional<double> parse_number(std::string_view text) {
  if (text.empty()) return std::nullopt;
  if (text.front() == '+') text.remove_prefix(1);
  double v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v))
    return std::nullopt;
  return v;
}

std::string format_number(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string format_score(const OptionalScore& v) { return v ? format_number(*v) : "NA"; }

ScenarioTable parse_scenarios(std::string_view csv) {
  std::vector<std::string_view> lines;
  for (auto line : split(csv, '\n')) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) throw ParseError("scenario CSV is empty");

  const auto header = split(lines.front(), ',');
  if (header.size() < 2 || header[0] != "scenario_id" || header[1] != "map")
    throw ParseError("scenario CSV header must start with 'scenario_id,map'");

  ScenarioTable table;
  for (std::size_t c = 2; c < header.size(); ++c) {
    if (header[c].empty()) throw ParseError("empty metric column name");
    if (std::find(table.metrics.begin(), table.metrics.end(), header[c]) != table.metrics.end())
      throw ParseError("duplicate metric column '" + std::string(header[c]) + "'");
    table.metrics.emplace_back(header[c]);
  }

  for (std::size_t li = 1; li < lines.size(); ++li) {
    const std::string where = "line " + std::to_string(li + 1);
    const auto cells = split(lines[li], ',');
    if (cells.size() != header.size())
      throw ParseError(where + ": expected " + std::to_string(header.size()) + " cells, got " +
                       std::to_string(cells.size()));
    ScenarioRow row;
    row.scenario_id = std::string(cells[0]);
    if (row.scenario_id.empty()) throw ParseError(where + ": empty scenario_id");
    const auto map = parse_number(cells[1]);
    if (!map) throw ParseError(where + ": map value '" + std::string(cells[1]) + "' is not a number");
    row.map = *map;
    for (std::size_t c = 2; c < cells.size(); ++c) {
      if (is_null_marker(cells[c])) {
        row.scores.emplace_back();
        continue;
      }
      const auto v = parse_number(cells[c]);
      if (!v)
        throw ParseError(where + ": cell '" + std::string(cells[c]) + "' of column '" +
                         table.metrics[c - 2] + "' is not a number");
      row.scores.emplace_back(*v);
    }
    table.add_row(std::move(row));
  }
  return table;
}

ScenarioTable load_scenarios(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenarios(buf.str());
}

std::string format_scenarios(const ScenarioTable& table) {
  std::string out = "scenario_id,map";
  for (const auto& m : table.metrics) out += "," + m;
  out += "\n";
  for (const auto& row : table.rows) {
    out += row.scenario_id + "," + format_number(row.map);
    for (const auto& s : row.scores) out += "," + format_score(s);
    out += "\n";
  }
  return out;
}

void write_scenarios(const ScenarioTable& table, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << format_scenarios(table);
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace xferod
