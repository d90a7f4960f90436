#include "xferod/cli.hpp"
#include "xferod/error.hpp"
#include "xferod/evaluation.hpp"
#include "xferod/log.hpp"
#include "xferod/metrics.hpp"
#include "xferod/pooling.hpp"
#include "xferod/synth.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <mutex>

namespace xferod::cli {

namespace {

namespace fs = std::filesystem;

struct ExtractArgs {
  std::string manifest;
  std::string extractor;
  std::string out;
  RoiAlignConfig roi;
  MultiScaleConfig ms;
};

struct ScoreArgs {
  std::string features;
  std::string scenario_id;
  std::vector<std::string> metrics;
  double transrate_eps = TransRateConfig{}.eps;
  bool standardize = false;
  std::optional<double> map;
  std::string out;
};

struct EvaluateArgs {
  std::string scenarios;
  std::string out;
  bool exact = false;
};

struct SynthArgs {
  std::string grid;
  std::uint64_t seed = 0;
  std::string out;
  SynthSpec base;
  double transrate_eps = TransRateConfig{}.eps;
  bool standardize = false;
};

void write_file(const fs::path& path, std::string_view text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw IoError("write failed: " + path.string());
}

std::string read_first_line(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read " + path.string());
  std::string line;
  std::getline(f, line);
  return line;
}

FeatureMatrix run_extractor(const ExtractArgs& a, const DatasetManifest& manifest) {
  const auto& name = a.extractor;
  if (name == "ms") return extract_multiscale(manifest, a.ms, a.roi);
  if (name == "fc") return extract_fc(manifest);
  if (name.starts_with("roi:") && name.size() > 4) return extract_roi(name.substr(4), manifest, a.roi);
  if (name.starts_with("global:") && name.size() > 7) return extract_global(name.substr(7), manifest);
  throw CLI::ValidationError("--extractor", "expected global:<level>, roi:<level>, ms or fc, got '" + name + "'");
}

void cmd_extract(const ExtractArgs& a) {
  const DatasetManifest manifest = load_manifest(a.manifest);
  write_feature_matrix(run_extractor(a, manifest), a.out);
}

void cmd_score(const ScoreArgs& a, std::ostream& out, std::ostream& err) {
  std::vector<std::string> metrics;
  for (const auto& m : a.metrics.empty() ? all_metric_names() : a.metrics)
    if (std::find(metrics.begin(), metrics.end(), m) == metrics.end()) metrics.push_back(m);
  for (const auto& m : metrics)
    if (std::find(all_metric_names().begin(), all_metric_names().end(), m) == all_metric_names().end())
      throw CLI::ValidationError("--metrics", "unknown metric '" + m + "'");
  if (a.map && !(*a.map >= 0.0 && *a.map <= 1.0)) throw RangeError("--map must lie in [0, 1]");
  if (a.scenario_id.find_first_of(",\n\r") != std::string::npos)
    throw CLI::ValidationError("--scenario-id", "must not contain commas or line breaks");

  const FeatureMatrix fm = read_feature_matrix(a.features);
  MetricsConfig cfg;
  cfg.transrate.eps = a.transrate_eps;
  cfg.standardize = a.standardize;
  const auto scores = score_all(fm, cfg, metrics);

  std::string header = "scenario_id";
  std::string row = a.scenario_id;
  if (a.map) {
    header += ",map";
    row += "," + format_number(*a.map);
  }
  for (const auto& m : metrics) {
    header += "," + m;
    const auto& s = scores.at(m);
    row += "," + format_score(s.value);
    if (!s.value) err << "note: " << m << " is null: " << s.note << "\n";
  }

  if (a.out.empty()) {
    out << header << "\n" << row << "\n";
    return;
  }
  const fs::path path = a.out;
  std::error_code ec;
  if (fs::exists(path, ec) && fs::file_size(path, ec) > 0) {
    const std::string existing = read_first_line(path);
    if (existing != header)
      throw SchemaError(path.string() + " has header '" + existing + "', expected '" + header + "'");
    std::ofstream f(path, std::ios::binary | std::ios::app);
    if (!f) throw IoError("cannot open " + path.string() + " for appending");
    f << row << "\n";
    if (!f) throw IoError("write failed: " + path.string());
    return;
  }
  write_file(path, header + "\n" + row + "\n");
}

void cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
  const ScenarioTable table = load_scenarios(a.scenarios);
  if (table.size() < 3)
    throw TooFewScenarios("evaluation needs at least 3 scenarios, got " + std::to_string(table.size()));
  const auto evals = evaluate_table(table, {.exact = a.exact});
  if (!a.out.empty()) write_file(a.out, format_correlation_csv(evals));
  out << format_correlation_table(evals) << "\n" << format_rank_report(rank_report(table));
}

void cmd_synth(const SynthArgs& a) {
  const SweepGrid grid = parse_grid(a.grid);
  SynthSpec base = a.base;
  base.seed = a.seed;
  MetricsConfig cfg;
  cfg.transrate.eps = a.transrate_eps;
  cfg.standardize = a.standardize;
  write_scenarios(scenario_sweep(base, grid, cfg), a.out);
}

// Routes library warnings to `err` for the lifetime of one run.
class WarningScope {
 public:
  explicit WarningScope(std::ostream& err)
      : previous_(set_warning_sink([&err, this](std::string_view msg) {
          std::lock_guard lock(mutex_);
          err << "warning: " << msg << "\n";
        })) {}
  ~WarningScope() { set_warning_sink(std::move(previous_)); }
  WarningScope(const WarningScope&) = delete;
  WarningScope& operator=(const WarningScope&) = delete;

 private:
  std::mutex mutex_;
  WarningSink previous_;
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Transferability metrics for object detection features", "xferod"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML file with defaults for any flag; command-line flags win");
  app.allow_config_extras(CLI::config_extras_mode::error);

  ExtractArgs ex;
  auto* extract = app.add_subcommand("extract", "Build an object feature matrix from a dataset manifest");
  extract->add_option("manifest", ex.manifest, "Manifest JSON")->required();
  extract->add_option("--extractor", ex.extractor, "global:<level>, roi:<level>, ms or fc")->required();
  extract->add_option("--out", ex.out, "Output directory for features.npy and meta.json")->required();
  extract->add_option("--output-size", ex.roi.output_size, "ROI-Align bins per side")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  extract->add_option("--sampling-ratio", ex.roi.sampling_ratio, "Samples per bin side; 0 = adaptive")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  extract->add_option("--aligned", ex.roi.aligned, "Half-pixel offset in ROI-Align")->capture_default_str();
  extract->add_option("--k0", ex.ms.k0, "Canonical pyramid level for multi-scale selection")->capture_default_str();
  extract->add_option("--s0", ex.ms.s0, "Canonical box size in pixels")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  extract->add_option("--levels", ex.ms.levels, "Levels eligible for multi-scale selection")->delimiter(',');

  ScoreArgs sc;
  auto* score = app.add_subcommand("score", "Score a feature matrix with transferability metrics");
  score->add_option("features", sc.features, "Directory holding features.npy and meta.json")->required();
  score->add_option("--scenario-id", sc.scenario_id, "Identifier written in the scenario_id column")->required();
  score->add_option("--metrics", sc.metrics, "Comma-separated metric names (default: all)")->delimiter(',');
  score->add_option("--transrate-eps", sc.transrate_eps, "TransRate distortion eps")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  score->add_flag("--standardize", sc.standardize, "Z-score feature columns before scoring");
  score->add_option("--map", sc.map, "Observed transfer performance; emits a full scenario row");
  score->add_option("--out", sc.out, "CSV to create or append to (default: stdout)");

  EvaluateArgs ev;
  auto* evaluate = app.add_subcommand("evaluate", "Correlate metric scores with transfer performance");
  evaluate->add_option("scenarios", ev.scenarios, "Scenario table CSV")->required();
  evaluate->add_option("--out", ev.out, "Correlation report CSV");
  evaluate->add_flag("--exact", ev.exact, "Exact permutation p-values when M <= 10");

  SynthArgs sy;
  auto* synth = app.add_subcommand("synth", "Run a synthetic scenario sweep");
  synth->add_option("--grid", sy.grid, "Grid as 'sep=a,b,... noise=x,y,...'")->required();
  synth->add_option("--seed", sy.seed, "Sweep seed")->capture_default_str();
  synth->add_option("--out", sy.out, "Scenario table CSV")->required();
  synth->add_option("--objects", sy.base.objects, "Objects per scenario")->capture_default_str();
  synth->add_option("--dims", sy.base.dims, "Feature dimensions")->capture_default_str();
  synth->add_option("--classes", sy.base.classes, "Classes")->capture_default_str();
  synth->add_option("--images", sy.base.images, "Images objects are dealt to")->capture_default_str();
  synth->add_option("--transrate-eps", sy.transrate_eps, "TransRate distortion eps")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  synth->add_flag("--standardize", sy.standardize, "Z-score feature columns before scoring");

  WarningScope warnings(err);
  try {
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    app.parse(static_cast<int>(argv.size()), argv.data());

    if (*extract) cmd_extract(ex);
    if (*score) cmd_score(sc, out, err);
    if (*evaluate) cmd_evaluate(ev, out);
    if (*synth) cmd_synth(sy);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const MissingFile& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}

}  // namespace xferod::cli
