#include "xferod/error.hpp"
#include "xferod/synth.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <random>

namespace xferod {

namespace {

// Vertices of a regular simplex with unit edge length, in the first K-1
// coordinates (Helmert basis of the sum-zero subspace).
Eigen::MatrixXd simplex_vertices(int k) {
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(k, std::max(k - 1, 1));
  for (int j = 1; j < k; ++j) {
    const double norm = std::sqrt(static_cast<double>(j) * (j + 1));
    for (int i = 0; i < j; ++i) v(i, j - 1) = 1.0 / norm;
    v(j, j - 1) = -static_cast<double>(j) / norm;
  }
  return v / std::sqrt(2.0);
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

void SynthSpec::validate() const {
  if (classes < 1) throw InvalidData("synth: need at least one class");
  if (objects < static_cast<std::size_t>(classes))
    throw InvalidData("synth: fewer objects than classes");
  if (dims < 1) throw InvalidData("synth: need at least one feature dimension");
  if (images < 1) throw InvalidData("synth: need at least one image");
  if (image_width < 1 || image_height < 1) throw InvalidData("synth: image size must be positive");
  if (!(class_sep >= 0) || !std::isfinite(class_sep))
    throw InvalidData("synth: class_sep must be finite and >= 0");
  if (!(box_noise >= 0) || !std::isfinite(box_noise))
    throw InvalidData("synth: box_noise must be finite and >= 0");
}

SynthData generate(const SynthSpec& spec) {
  spec.validate();
  const auto n = static_cast<Eigen::Index>(spec.objects);
  const auto d = static_cast<Eigen::Index>(spec.dims);
  const int k = spec.classes;

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal;

  // Means live in the first min(D, K-1) coordinates; with D < K-1 the
  // simplex is truncated and separations are no longer equal.
  const Eigen::MatrixXd vertices = simplex_vertices(k) * spec.class_sep;
  const Eigen::Index mean_dims = std::min<Eigen::Index>(d, vertices.cols());

  Eigen::MatrixXd weights(d, 4);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < 4; ++j) weights(i, j) = normal(rng);

  Eigen::MatrixXd x(n, d);
  std::vector<int> labels(spec.objects);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % k);
    labels[i] = label;
    for (Eigen::Index j = 0; j < d; ++j)
      x(i, j) = normal(rng) + (j < mean_dims ? vertices(label, j) : 0.0);
  }

  // Standardize each projection so the squash keeps its curvature whatever
  // the scale of the features.
  Eigen::MatrixXd proj = x * weights;
  for (Eigen::Index j = 0; j < 4; ++j) {
    auto col = proj.col(j);
    const double mean = col.mean();
    col.array() -= mean;
    const double sd = std::sqrt(col.squaredNorm() / static_cast<double>(n));
    if (sd > 0) col /= sd;
  }

  DatasetManifest manifest;
  manifest.meta.num_classes = k;
  for (std::size_t i = 0; i < spec.images; ++i) {
    ImageEntry image;
    image.id = "synth_" + std::to_string(i);
    image.width = spec.image_width;
    image.height = spec.image_height;
    manifest.images.push_back(std::move(image));
  }

  FeatureMatrix fm;
  fm.features = x.cast<float>();
  fm.labels = std::move(labels);
  fm.boxes.resize(n, 4);
  fm.num_classes = k;
  fm.extractor_tag = "synth";
  fm.source_objects.resize(spec.objects);

  const double w_px = spec.image_width, h_px = spec.image_height;
  for (Eigen::Index i = 0; i < n; ++i) {
    double u[4];
    for (int j = 0; j < 4; ++j)
      u[j] = std::clamp(sigmoid(proj(i, j)) + spec.box_noise * normal(rng), 0.0, 1.0);
    // x, y in [0, 0.5] and w, h in [0.05, 0.5] keep every box inside the image.
    const Box pixel{0.5 * u[0] * w_px, 0.5 * u[1] * h_px, (0.05 + 0.45 * u[2]) * w_px,
                    (0.05 + 0.45 * u[3]) * h_px};
    const auto& image = manifest.images[static_cast<std::size_t>(i) % spec.images];
    manifest.objects.push_back({image.id, fm.labels[i], pixel});
    const Box norm = normalize_box(pixel, image.width, image.height);
    fm.boxes.row(i) << norm.x, norm.y, norm.w, norm.h;
    fm.source_objects[i] = static_cast<std::size_t>(i);
  }
  return {std::move(fm), std::move(manifest)};
}

}  // namespace xferod
