#include "xferod/error.hpp"
#include "xferod/evaluation.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <stdexcept>

namespace xferod {

namespace {

void check_pair(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("correlation inputs differ in length");
  if (x.size() < 3)
    throw TooFewScenarios("correlation needs at least 3 scenarios, got " + std::to_string(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i)
    if (!std::isfinite(x[i]) || !std::isfinite(y[i]))
      throw DegenerateSeries("correlation inputs must be finite");
}

bool constant(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [&](double a) { return a == v.front(); });
}

double pearson_statistic(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (!(sxx > 0) || !(syy > 0)) throw DegenerateSeries("correlation input is constant");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double t_test_p(double r, std::size_t m) {
  if (std::abs(r) >= 1.0) return 0.0;
  const double dof = static_cast<double>(m - 2);
  const double t = std::abs(r) * std::sqrt(dof / (1.0 - r * r));
  const boost::math::students_t dist(dof);
  return std::clamp(2.0 * boost::math::cdf(boost::math::complement(dist, t)), 0.0, 1.0);
}

struct TieCounts {
  double pairs = 0;   // sum t(t-1)/2
  double cubic = 0;   // sum t(t-1)(t-2)
  double weight = 0;  // sum t(t-1)(2t+5)
};

TieCounts tie_counts(std::span<const double> v) {
  std::map<double, double> groups;
  for (const double a : v) groups[a] += 1;
  TieCounts t;
  for (const auto& [value, c] : groups) {
    if (c < 2) continue;
    t.pairs += c * (c - 1) / 2;
    t.cubic += c * (c - 1) * (c - 2);
    t.weight += c * (c - 1) * (2 * c + 5);
  }
  return t;
}

double sign(double v) { return (v > 0) - (v < 0); }

struct KendallParts {
  double tau;
  double concordant_minus_discordant;
};

KendallParts kendall_parts(std::span<const double> x, std::span<const double> y) {
  const std::size_t m = x.size();
  double s = 0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) s += sign(x[i] - x[j]) * sign(y[i] - y[j]);
  const double n0 = static_cast<double>(m) * static_cast<double>(m - 1) / 2;
  const double denom = (n0 - tie_counts(x).pairs) * (n0 - tie_counts(y).pairs);
  if (!(denom > 0)) throw DegenerateSeries("Kendall tau undefined: a series is fully tied");
  return {std::clamp(s / std::sqrt(denom), -1.0, 1.0), s};
}

double kendall_normal_p(std::span<const double> x, std::span<const double> y, double s) {
  const double n = static_cast<double>(x.size());
  const auto tx = tie_counts(x), ty = tie_counts(y);
  const double m = n * (n - 1);
  const double var = (m * (2 * n + 5) - tx.weight - ty.weight) / 18 + 2 * tx.pairs * ty.pairs / m +
                     tx.cubic * ty.cubic / (9 * m * (n - 2));
  if (!(var > 0)) return 1.0;
  const double z = std::abs(s) / std::sqrt(var);
  return std::clamp(std::erfc(z / std::sqrt(2.0)), 0.0, 1.0);
}

// Fraction of all orderings of y whose statistic is at least as extreme.
double permutation_p(std::span<const double> x, std::span<const double> y, double observed,
                     const std::function<double(std::span<const double>, std::span<const double>)>& stat) {
  std::vector<std::size_t> order(y.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> permuted(y.size());
  double extreme = 0, total = 0;
  const double threshold = std::abs(observed) - 1e-12;
  do {
    for (std::size_t i = 0; i < order.size(); ++i) permuted[i] = y[order[i]];
    total += 1;
    double value = 0.0;
    try {
      value = stat(x, permuted);
    } catch (const DegenerateSeries&) {
      continue;
    }
    if (std::abs(value) >= threshold) extreme += 1;
  } while (std::next_permutation(order.begin(), order.end()));
  return extreme / total;
}

bool use_exact(const CorrelationOptions& opts, std::size_t m) {
  return opts.exact && m <= kMaxExactSize;
}

}  // namespace

std::vector<double> midranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

Correlation pearson(std::span<const double> x, std::span<const double> y,
                    const CorrelationOptions& opts) {
  check_pair(x, y);
  if (constant(x) || constant(y)) throw DegenerateSeries("Pearson input is constant");
  const double r = pearson_statistic(x, y);
  const double p = use_exact(opts, x.size()) ? permutation_p(x, y, r, pearson_statistic)
                                             : t_test_p(r, x.size());
  return {r, p};
}

Correlation spearman(std::span<const double> x, std::span<const double> y,
                     const CorrelationOptions& opts) {
  check_pair(x, y);
  if (constant(x) || constant(y)) throw DegenerateSeries("Spearman input is constant");
  const auto rx = midranks(x), ry = midranks(y);
  const double rho = pearson_statistic(rx, ry);
  const double p = use_exact(opts, x.size()) ? permutation_p(rx, ry, rho, pearson_statistic)
                                             : t_test_p(rho, x.size());
  return {rho, p};
}

Correlation kendall(std::span<const double> x, std::span<const double> y,
                    const CorrelationOptions& opts) {
  check_pair(x, y);
  const auto parts = kendall_parts(x, y);
  if (use_exact(opts, x.size())) {
    const auto tau_of = [](std::span<const double> a, std::span<const double> b) {
      return kendall_parts(a, b).tau;
    };
    return {parts.tau, permutation_p(x, y, parts.tau, tau_of)};
  }
  return {parts.tau, kendall_normal_p(x, y, parts.concordant_minus_discordant)};
}

CorrelationResult correlate(std::span<const double> scores, std::span<const double> map,
                            const CorrelationOptions& opts) {
  CorrelationResult r;
  r.pearson = pearson(scores, map, opts);
  r.spearman = spearman(scores, map, opts);
  r.kendall = kendall(scores, map, opts);
  r.m = scores.size();
  return r;
}

std::vector<MetricEvaluation> evaluate_table(const ScenarioTable& table,
                                             const CorrelationOptions& opts) {
  std::vector<MetricEvaluation> out;
  for (std::size_t c = 0; c < table.metrics.size(); ++c) {
    MetricEvaluation e;
    e.metric = table.metrics[c];
    std::vector<double> scores, maps;
    for (const auto& row : table.rows) {
      if (!row.scores[c]) continue;
      scores.push_back(*row.scores[c]);
      maps.push_back(row.map);
    }
    e.m = scores.size();
    try {
      e.result = correlate(scores, maps, opts);
    } catch (const TooFewScenarios& ex) {
      e.note = ex.what();
    } catch (const DegenerateSeries& ex) {
      e.note = ex.what();
    }
    out.push_back(std::move(e));
  }
  return out;
}

MeanCorrelation mean_correlation(std::span<const CorrelationResult> results) {
  MeanCorrelation mean;
  mean.groups = results.size();
  if (results.empty()) return mean;
  for (const auto& r : results) {
    mean.pearson += r.pearson.statistic;
    mean.spearman += r.spearman.statistic;
    mean.kendall += r.kendall.statistic;
  }
  const double g = static_cast<double>(results.size());
  mean.pearson /= g;
  mean.spearman /= g;
  mean.kendall /= g;
  return mean;
}

std::vector<RankEntry> rank_report(const ScenarioTable& table) {
  std::vector<RankEntry> out;
  if (table.rows.empty()) {
    for (const auto& m : table.metrics) {
      RankEntry e;
      e.metric = m;
      out.push_back(std::move(e));
    }
    return out;
  }

  // Best scenario by map; ties go to the smallest id.
  const ScenarioRow* best = &table.rows.front();
  for (const auto& row : table.rows)
    if (row.map > best->map || (row.map == best->map && row.scenario_id < best->scenario_id))
      best = &row;

  for (std::size_t c = 0; c < table.metrics.size(); ++c) {
    RankEntry e;
    e.metric = table.metrics[c];
    e.best = best->scenario_id;
    const ScenarioRow* chosen = nullptr;
    for (const auto& row : table.rows) {
      if (!row.scores[c]) continue;
      ++e.m;
      if (!chosen) {
        chosen = &row;
        continue;
      }
      const double s = *row.scores[c], top = *chosen->scores[c];
      if (s > top) {
        chosen = &row;
        e.tied = false;
      } else if (s == top) {
        e.tied = true;
        if (row.scenario_id < chosen->scenario_id) chosen = &row;
      }
    }
    if (chosen && e.m >= 2) {
      e.chosen = chosen->scenario_id;
      e.top1_hit = chosen->map == best->map;
      e.regret = best->map - chosen->map;
    } else {
      e.tied = false;
    }
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace xferod
