#include "xferod/error.hpp"
#include "xferod/log.hpp"
#include "xferod/parallel.hpp"
#include "xferod/synth.hpp"

#include <cmath>
#include <optional>
#include <random>
#include <sstream>

namespace xferod {

namespace {

std::vector<double> parse_list(std::string_view key, std::string_view text) {
  std::vector<double> out;
  if (text.empty()) throw ParseError("grid: empty list for " + std::string(key));
  std::size_t start = 0;
  while (true) {
    const auto comma = text.find(',', start);
    const auto cell = text.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    const auto v = parse_number(cell);
    if (!v || !std::isfinite(*v))
      throw ParseError("grid: bad number '" + std::string(cell) + "' for " + std::string(key));
    if (*v < 0) throw ParseError("grid: " + std::string(key) + " values must be >= 0");
    out.push_back(*v);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace

SweepGrid parse_grid(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string token;
  std::optional<std::vector<double>> seps, noises;
  while (in >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) throw ParseError("grid: expected key=values, got '" + token + "'");
    const std::string key = token.substr(0, eq);
    auto& slot = key == "sep" ? seps : key == "noise" ? noises : throw ParseError("grid: unknown key '" + key + "'");
    if (slot) throw ParseError("grid: '" + key + "' given twice");
    slot = parse_list(key, std::string_view(token).substr(eq + 1));
  }
  if (!seps || !noises) throw ParseError("grid: need both sep=... and noise=...");
  return {std::move(*seps), std::move(*noises)};
}

std::uint64_t derive_seed(std::uint64_t seed, std::size_t index) {
  // Mixed rather than xor-ed: seed ^ index would make neighbouring sweep
  // seeds share grid points.
  const auto i = static_cast<std::uint64_t>(index);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i >> 32)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[1]) << 32) | words[0];
}

std::string scenario_id_for(double class_sep, double box_noise) {
  return "sep" + format_number(class_sep) + "_noise" + format_number(box_noise);
}

ScenarioTable scenario_sweep(const SynthSpec& base, const SweepGrid& grid, const MetricsConfig& cfg) {
  if (grid.size() < 3) throw InvalidData("sweep grid needs at least 3 points, got " + std::to_string(grid.size()));
  base.validate();

  const auto& names = all_metric_names();
  std::vector<std::optional<ScenarioRow>> rows(grid.size());
  parallel_for(grid.size(), [&](std::size_t index) {
    SynthSpec spec = base;
    spec.class_sep = grid.class_seps[index / grid.box_noises.size()];
    spec.box_noise = grid.box_noises[index % grid.box_noises.size()];
    spec.seed = derive_seed(base.seed, index);
    const std::string id = scenario_id_for(spec.class_sep, spec.box_noise);
    try {
      const SynthData data = generate(spec);
      const auto scores = score_all(data.features, cfg, names);
      const ProbeResult pr = probe(data.features, spec.seed);
      ScenarioRow row{id, pr.map_proxy, {}};
      for (const auto& name : names) row.scores.push_back(scores.at(name).value);
      rows[index] = std::move(row);
    } catch (const Error& e) {
      warn("scenario " + id + " dropped: " + e.what());
    }
  });

  ScenarioTable table;
  table.metrics = names;
  for (auto& row : rows)
    if (row) table.add_row(std::move(*row));
  return table;
}

}  // namespace xferod
