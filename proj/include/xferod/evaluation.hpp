#pragma once

#include "xferod/scenario_table.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace xferod {

inline constexpr double kSignificanceLevel = 0.05;

struct Correlation {
  double statistic = 0.0;
  double p_value = 1.0;  // two-sided
};

struct CorrelationOptions {
  /// Exact two-sided permutation p-values instead of the t / normal
  /// approximations. Only honoured for M <= kMaxExactSize.
  bool exact = false;
};

inline constexpr std::size_t kMaxExactSize = 10;

/// Sample Pearson r; p from t = r sqrt((M-2)/(1-r^2)) with M-2 dof.
/// Throws TooFewScenarios for M < 3, DegenerateSeries for a constant input
/// and std::invalid_argument for mismatched lengths.
Correlation pearson(std::span<const double> x, std::span<const double> y,
                    const CorrelationOptions& opts = {});

/// Pearson on midranks; same p approximation as pearson.
Correlation spearman(std::span<const double> x, std::span<const double> y,
                     const CorrelationOptions& opts = {});

/// Kendall tau-b; p from the normal approximation with tie-adjusted variance.
Correlation kendall(std::span<const double> x, std::span<const double> y,
                    const CorrelationOptions& opts = {});

/// 1-based ranks, ties share their average rank.
std::vector<double> midranks(std::span<const double> x);

struct CorrelationResult {
  Correlation pearson, spearman, kendall;
  std::size_t m = 0;

  bool pearson_significant() const { return pearson.p_value < kSignificanceLevel; }
  bool spearman_significant() const { return spearman.p_value < kSignificanceLevel; }
  bool kendall_significant() const { return kendall.p_value < kSignificanceLevel; }
};

CorrelationResult correlate(std::span<const double> scores, std::span<const double> map,
                            const CorrelationOptions& opts = {});

struct MetricEvaluation {
  std::string metric;
  std::size_t m = 0;  // rows left after dropping null scores
  std::optional<CorrelationResult> result;
  std::string note;   // why result is missing
};

/// One correlation per metric column against map. Null scores are dropped
/// pairwise; metrics with fewer than 3 remaining rows or a constant series are
/// reported without a result.
std::vector<MetricEvaluation> evaluate_table(const ScenarioTable& table,
                                             const CorrelationOptions& opts = {});

/// Average of each statistic over groups of results (p-values are not averaged).
struct MeanCorrelation {
  double pearson = 0.0, spearman = 0.0, kendall = 0.0;
  std::size_t groups = 0;
};
MeanCorrelation mean_correlation(std::span<const CorrelationResult> results);

struct RankEntry {
  std::string metric;
  std::size_t m = 0;
  std::optional<std::string> chosen;  // scenario ranked first by the metric
  bool tied = false;                  // another scenario had the same top score
  bool top1_hit = false;              // chosen scenario attains the best map
  double regret = 0.0;                // best map - map of chosen scenario
  std::string best;                   // scenario with the best map
};

/// Source/target selection summary per metric. Score ties resolve to the
/// lexicographically smallest scenario id and are flagged. Metrics with fewer
/// than two non-null scores get no choice.
std::vector<RankEntry> rank_report(const ScenarioTable& table);

/// `metric,stat,value,p,significant,m` rows; unavailable metrics get NA cells.
std::string format_correlation_csv(const std::vector<MetricEvaluation>& evals);

/// Metrics as columns, one row per statistic; non-significant values carry
/// an asterisk.
std::string format_correlation_table(const std::vector<MetricEvaluation>& evals);

std::string format_rank_report(const std::vector<RankEntry>& ranks);

}  // namespace xferod
