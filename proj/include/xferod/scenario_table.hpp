#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace xferod {

/// Metric value that may be missing (a metric raised DegenerateTarget, or the
/// cell was left empty). Written to CSV as `NA`.
using OptionalScore = std::optional<double>;

struct ScenarioRow {
  std::string scenario_id;
  double map = 0.0;                   // ground-truth transfer performance in [0, 1]
  std::vector<OptionalScore> scores;  // aligned with ScenarioTable::metrics
};

/// One row per transfer scenario: its realized performance and the
/// transferability scores computed for it.
struct ScenarioTable {
  std::vector<std::string> metrics;
  std::vector<ScenarioRow> rows;

  std::size_t size() const { return rows.size(); }
  std::vector<double> maps() const;
  /// Scores of one metric column; throws std::out_of_range for unknown names.
  std::vector<OptionalScore> series(std::string_view metric) const;

  /// Appends a row. Throws DuplicateKey on a repeated scenario id,
  /// RangeError when map is outside [0, 1], InvalidData on a width mismatch.
  void add_row(ScenarioRow row);
};

/// Parses `scenario_id,map,<metric...>` CSV (LF line endings, `.` decimal
/// point). Empty, `NA`, `null` and `nan` cells are null scores.
///
/// Throws ParseError on malformed structure or non-numeric cells,
/// DuplicateKey on repeated ids and RangeError when map leaves [0, 1]. A
/// header-only file yields an empty table.
ScenarioTable parse_scenarios(std::string_view csv);
ScenarioTable load_scenarios(const std::filesystem::path& path);

std::string format_scenarios(const ScenarioTable& table);
void write_scenarios(const ScenarioTable& table, const std::filesystem::path& path);

/// Shortest decimal text that parses back to exactly v.
std::string format_number(double v);
std::string format_score(const OptionalScore& v);

/// Strict decimal parse of a whole cell; nullopt when it is not a number.
std::optional<double> parse_number(std::string_view text);

}  // namespace xferod
