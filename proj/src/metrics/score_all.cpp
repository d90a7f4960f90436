#include "xferod/error.hpp"
#include "xferod/metrics.hpp"

#include <algorithm>
#include <functional>
#include <stdexcept>

namespace xferod {

const std::vector<std::string>& all_metric_names() {
  static const std::vector<std::string> names{
      metric_names::kLogme,  metric_names::kTlogme,     metric_names::kLogmePos,
      metric_names::kHscore, metric_names::kHscoreReg, metric_names::kTransrate};
  return names;
}

std::map<std::string, MetricScore> score_all(const FeatureMatrix& fm, const MetricsConfig& cfg,
                                             const std::vector<std::string>& metrics) {
  fm.validate();
  const auto& wanted = metrics.empty() ? all_metric_names() : metrics;
  for (const auto& name : wanted)
    if (std::find(all_metric_names().begin(), all_metric_names().end(), name) ==
        all_metric_names().end())
      throw std::invalid_argument("unknown metric '" + name + "'");
  auto requested = [&](const char* name) {
    return std::find(wanted.begin(), wanted.end(), name) != wanted.end();
  };

  std::map<std::string, MetricScore> out;
  auto evaluate = [&](const char* name, const std::function<double()>& fn) {
    MetricScore s{name, fm.extractor_tag, std::nullopt, {}};
    try {
      s.value = fn();
    } catch (const DegenerateTarget& e) {
      s.note = e.what();
    }
    out[name] = std::move(s);
  };

  const bool need_logme = requested(metric_names::kLogme) || requested(metric_names::kTlogme) ||
                          requested(metric_names::kLogmePos);
  if (need_logme) {
    // One SVD serves the class columns and the four box columns.
    const EvidenceModel model(feature_values(fm, cfg));
    std::optional<double> cls, pos;
    std::string cls_note, pos_note;
    auto capture = [&](auto&& fn, std::optional<double>& slot, std::string& note) {
      try {
        slot = fn();
      } catch (const DegenerateTarget& e) {
        note = e.what();
      }
    };
    capture([&] { return logme_class(model, fm, cfg.evidence); }, cls, cls_note);
    capture([&] { return logme_pos(model, fm, cfg.evidence); }, pos, pos_note);

    if (requested(metric_names::kLogme))
      out[metric_names::kLogme] = {metric_names::kLogme, fm.extractor_tag, cls, cls_note};
    if (requested(metric_names::kLogmePos))
      out[metric_names::kLogmePos] = {metric_names::kLogmePos, fm.extractor_tag, pos, pos_note};
    if (requested(metric_names::kTlogme)) {
      MetricScore s{metric_names::kTlogme, fm.extractor_tag, std::nullopt, {}};
      if (cls && pos)
        s.value = *pos + *cls;
      else
        s.note = !pos ? pos_note : cls_note;
      out[metric_names::kTlogme] = std::move(s);
    }
  }

  if (requested(metric_names::kHscore)) evaluate(metric_names::kHscore, [&] { return hscore(fm, cfg); });
  if (requested(metric_names::kHscoreReg))
    evaluate(metric_names::kHscoreReg, [&] { return hscore_regularized(fm, cfg); });
  if (requested(metric_names::kTransrate))
    evaluate(metric_names::kTransrate, [&] { return transrate(fm, cfg); });
  return out;
}

}  // namespace xferod
