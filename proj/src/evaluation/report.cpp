#include "xferod/evaluation.hpp"

#include <algorithm>
#include <cstdio>

namespace xferod {

namespace {

std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  // "-0.00" reads as a sign error in a table.
  if (std::string_view(buf) == "-0.00") return "0.00";
  return buf;
}

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

const char* flag(bool b) { return b ? "true" : "false"; }

}  // namespace

std::string format_correlation_csv(const std::vector<MetricEvaluation>& evals) {
  std::string out = "metric,stat,value,p,significant,m\n";
  for (const auto& e : evals) {
    const std::string m = std::to_string(e.m);
    if (!e.result) {
      for (const char* stat : {"pearson", "spearman", "kendall"})
        out += e.metric + "," + stat + ",NA,NA,NA," + m + "\n";
      continue;
    }
    const auto& r = *e.result;
    const struct {
      const char* name;
      const Correlation& c;
      bool significant;
    } rows[] = {{"pearson", r.pearson, r.pearson_significant()},
                {"spearman", r.spearman, r.spearman_significant()},
                {"kendall", r.kendall, r.kendall_significant()}};
    for (const auto& row : rows)
      out += e.metric + "," + row.name + "," + format_number(row.c.statistic) + "," +
             format_number(row.c.p_value) + "," + flag(row.significant) + "," + m + "\n";
  }
  return out;
}

std::string format_correlation_table(const std::vector<MetricEvaluation>& evals) {
  std::size_t width = 8;
  for (const auto& e : evals) width = std::max(width, e.metric.size() + 2);

  std::string out = pad("", 10);
  for (const auto& e : evals) out += pad(e.metric, width);
  out += "\n";

  auto cell = [&](const MetricEvaluation& e, const Correlation CorrelationResult::*stat) {
    if (!e.result) return pad("n/a", width);
    const Correlation& c = (*e.result).*stat;
    const bool significant = c.p_value < kSignificanceLevel;
    return pad(fixed2(c.statistic) + (significant ? " " : "*"), width);
  };
  const struct {
    const char* label;
    Correlation CorrelationResult::*stat;
  } stats[] = {{"pearson", &CorrelationResult::pearson},
               {"spearman", &CorrelationResult::spearman},
               {"kendall", &CorrelationResult::kendall}};
  for (const auto& s : stats) {
    out += pad(s.label, 10);
    for (const auto& e : evals) out += cell(e, s.stat);
    out += "\n";
  }
  out += pad("M", 10);
  for (const auto& e : evals) out += pad(std::to_string(e.m) + " ", width);
  out += "\n";
  out += "(*) p >= " + fixed2(kSignificanceLevel) + ", not significant\n";
  for (const auto& e : evals)
    if (!e.result) out += e.metric + ": unavailable (" + e.note + ")\n";
  return out;
}

std::string format_rank_report(const std::vector<RankEntry>& ranks) {
  std::string out = "selection (top-1 by score):\n";
  for (const auto& r : ranks) {
    out += "  " + r.metric + ": ";
    if (!r.chosen) {
      out += "unavailable (" + std::to_string(r.m) + " scored scenarios)\n";
      continue;
    }
    out += *r.chosen + (r.tied ? " (tied)" : "") + ", best " + r.best +
           (r.top1_hit ? ", hit" : ", miss") + ", regret " + format_number(r.regret) + "\n";
  }
  return out;
}

}  // namespace xferod
