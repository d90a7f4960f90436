#pragma once

#include "xferod/feature_matrix.hpp"
#include "xferod/manifest.hpp"
#include "xferod/tensor.hpp"

#include <optional>
#include <string>
#include <vector>

namespace xferod {

struct RoiAlignConfig {
  int output_size = 7;     // P: the box is split into P x P bins
  int sampling_ratio = 2;  // samples per bin side; 0 = ceil(bin extent)
  bool aligned = true;     // shift pixel coordinates by -0.5 before sampling
};

struct MultiScaleConfig {
  int k0 = 4;
  double s0 = 224.0;
  /// Level keys eligible for selection. Empty means every level in the
  /// manifest. A level's pyramid index is log2 of its scale ratio.
  std::vector<std::string> levels;
};

/// Bilinear value of one channel plane at continuous coordinates (y, x).
/// Samples more than one cell outside the plane are zero; samples within the
/// one-cell border are clamped to the edge row or column.
double bilinear_sample(std::span<const float> plane, std::size_t height, std::size_t width,
                       double y, double x);

/// ROI-Align of a pixel-space box over a C x H x W map whose cells cover
/// `scale` pixels each. Returns a C x P x P tensor; bin (i, j) is the mean of
/// sampling_ratio^2 bilinear samples on a regular grid inside the bin.
///
/// Throws InvalidData for a non rank-3 map, a non-positive scale, a box
/// without positive extent or P < 1.
Tensor roi_align(const Tensor& map, const Box& box, double scale, const RoiAlignConfig& cfg = {});

/// ROI-Align followed by a mean over the P x P bins: one value per channel.
std::vector<float> roi_align_pooled(const Tensor& map, const Box& box, double scale,
                                    const RoiAlignConfig& cfg = {});

/// Channel-wise mean over H x W.
std::vector<float> spatial_mean(const Tensor& map);

/// Pyramid level for a box of the given pixel size:
/// floor(k0 + log2(sqrt(w * h) / s0)), clamped to [k_min, k_max].
int fpn_level_for_box(double box_w, double box_h, const MultiScaleConfig& cfg, int k_min,
                      int k_max);

/// Pyramid index of a scale ratio when it is a power of two.
std::optional<int> pyramid_index(double scale);

/// Object-level features from one level via ROI-Align. Tag "roi:<level>".
/// Boxes are clipped to their image; objects whose box clips to nothing are
/// dropped with a warning. Throws MissingFile when an image lacks the level.
FeatureMatrix extract_roi(const std::string& level, const DatasetManifest& manifest,
                          const RoiAlignConfig& cfg = {});

/// Per-object pyramid level chosen by box size, then ROI-Align at that level.
/// Tag "ms". Throws InvalidData when the levels objects are assigned to
/// disagree on channel count, two levels share a pyramid index, a scale is not a power of two, or
/// k0 lies outside the available index range; MissingFile when an assigned
/// level is absent.
FeatureMatrix extract_multiscale(const DatasetManifest& manifest, const MultiScaleConfig& ms = {},
                                 const RoiAlignConfig& roi = {});

/// Image-level baseline: every object gets the spatial mean of its image's
/// map. Tag "global:<level>".
FeatureMatrix extract_global(const std::string& level, const DatasetManifest& manifest);

/// Precomputed dense-layer rows, concatenated in manifest object order. Tag
/// "fc:-1". Throws InvalidData when an image lacks fc features or their row
/// count differs from its object count.
FeatureMatrix extract_fc(const DatasetManifest& manifest);

}  // namespace xferod
