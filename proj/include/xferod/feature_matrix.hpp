#pragma once

#include "xferod/manifest.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <string>
#include <vector>

namespace xferod {

using FeatureRows = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using BoxRows = Eigen::Matrix<double, Eigen::Dynamic, 4, Eigen::RowMajor>;

/// Object-level features with their class labels and normalized boxes. Row i
/// of every member describes the same object.
struct FeatureMatrix {
  FeatureRows features;  // n x D
  std::vector<int> labels;
  BoxRows boxes;         // (x, y, w, h) / image extent
  int num_classes = 1;
  std::string extractor_tag;
  std::vector<std::size_t> source_objects;  // manifest object index of each row; may be empty

  std::size_t rows() const { return static_cast<std::size_t>(features.rows()); }
  std::size_t dims() const { return static_cast<std::size_t>(features.cols()); }

  /// Throws InvalidData when shapes disagree, n or D is zero, a value is not
  /// finite, a label is outside [0, num_classes) or a box leaves [0, 1].
  void validate() const;

  /// Exact equality of every member, shapes included.
  friend bool operator==(const FeatureMatrix& a, const FeatureMatrix& b);
};

/// Writes `<dir>/features.npy` and the `<dir>/meta.json` sidecar holding
/// labels, boxes, class count and extractor tag.
void write_feature_matrix(const FeatureMatrix& fm, const std::filesystem::path& dir);
FeatureMatrix read_feature_matrix(const std::filesystem::path& dir);

}  // namespace xferod
