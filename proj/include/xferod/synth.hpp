#pragma once

#include "xferod/feature_matrix.hpp"
#include "xferod/manifest.hpp"
#include "xferod/metrics.hpp"
#include "xferod/scenario_table.hpp"

#include <cstdint>
#include <string_view>
#include <vector>

namespace xferod {

/// Parameters of one synthetic transfer scenario.
struct SynthSpec {
  std::size_t objects = 400;
  std::size_t dims = 16;
  int classes = 4;
  double class_sep = 1.0;  // pairwise distance of class means, in within-class sd units
  double box_noise = 0.1;  // sd of noise added to the squashed box coordinates
  std::uint64_t seed = 0;
  std::size_t images = 40;  // objects are dealt to images round-robin
  int image_width = 800;
  int image_height = 800;

  /// Throws InvalidData unless objects >= classes >= 1, dims >= 1,
  /// images >= 1, image sides >= 1 and class_sep, box_noise >= 0.
  void validate() const;
};

struct SynthData {
  FeatureMatrix features;
  DatasetManifest manifest;  // images without feature files; objects with pixel boxes
};

/// Draws features = class mean + N(0, I) with class means on a regular
/// simplex, labels dealt round-robin over classes, and boxes from a squashed
/// random linear map of the features plus Gaussian noise. Deterministic in
/// spec.seed.
SynthData generate(const SynthSpec& spec);

struct ProbeResult {
  double probe_accuracy = 0.0;  // held-out accuracy of a one-vs-rest ridge classifier
  double box_r2 = 0.0;          // held-out R^2 of ridge box regression, averaged over coordinates
  double map_proxy = 0.0;       // probe_accuracy * max(0, box_r2)
};

inline constexpr double kProbeRidge = 1e-3;
inline constexpr double kProbeTrainFraction = 0.7;

/// Fits closed-form ridge probes on a class-stratified 70/30 split and scores
/// them on the held-out part. Throws ProbeError for fewer than 10 rows or an
/// empty split.
ProbeResult probe(const FeatureMatrix& fm, std::uint64_t split_seed);

struct SweepGrid {
  std::vector<double> class_seps;
  std::vector<double> box_noises;
  std::size_t size() const { return class_seps.size() * box_noises.size(); }
};

/// Parses `sep=a,b,c noise=x,y`. Throws ParseError on unknown keys, empty or
/// negative lists, and malformed numbers.
SweepGrid parse_grid(std::string_view text);

/// Seed for grid point `index` of a sweep seeded with `seed`.
std::uint64_t derive_seed(std::uint64_t seed, std::size_t index);

std::string scenario_id_for(double class_sep, double box_noise);

/// For every (class_sep, box_noise) pair, sep-major: generate, score every
/// metric, probe, and emit one row whose map is the probe's map_proxy. Rows
/// whose generation or probe fails are dropped with a warning.
/// Throws InvalidData when the grid has fewer than 3 points.
ScenarioTable scenario_sweep(const SynthSpec& base, const SweepGrid& grid,
                             const MetricsConfig& cfg = {});

}  // namespace xferod
