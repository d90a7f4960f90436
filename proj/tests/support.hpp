#pragma once

#include "xferod/feature_matrix.hpp"
#include "xferod/log.hpp"
#include "xferod/manifest.hpp"
#include "xferod/tensor.hpp"

#include <Eigen/Core>

#include <atomic>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("xferod_test_" + std::to_string(rd()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Collects warnings instead of printing them, for the scope's lifetime.
class CaptureWarnings {
 public:
  CaptureWarnings()
      : previous_(xferod::set_warning_sink([this](std::string_view m) { messages.emplace_back(m); })) {}
  ~CaptureWarnings() { xferod::set_warning_sink(std::move(previous_)); }
  CaptureWarnings(const CaptureWarnings&) = delete;
  CaptureWarnings& operator=(const CaptureWarnings&) = delete;

  std::vector<std::string> messages;

 private:
  xferod::WarningSink previous_;
};

inline xferod::Tensor random_tensor(std::vector<std::size_t> shape, std::mt19937_64& rng, float lo = -1.0f,
                                    float hi = 1.0f) {
  xferod::Tensor t(std::move(shape));
  std::uniform_real_distribution<float> u(lo, hi);
  for (auto& v : t.values()) v = u(rng);
  return t;
}

inline Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> normal(0.0, sd);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = normal(rng);
  return m;
}

/// Feature matrix with the given features, labels and random valid boxes.
inline xferod::FeatureMatrix make_fm(const Eigen::MatrixXd& x, std::vector<int> labels, int classes,
                                     std::mt19937_64& rng) {
  xferod::FeatureMatrix fm;
  fm.features = x.cast<float>();
  fm.labels = std::move(labels);
  fm.num_classes = classes;
  fm.boxes.resize(x.rows(), 4);
  std::uniform_real_distribution<double> u(0.0, 0.5);
  for (Eigen::Index i = 0; i < x.rows(); ++i) fm.boxes.row(i) << u(rng), u(rng), 0.05 + u(rng), 0.05 + u(rng);
  fm.extractor_tag = "test";
  return fm;
}

inline std::vector<int> round_robin_labels(std::size_t n, int classes) {
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % static_cast<std::size_t>(classes));
  return labels;
}

}  // namespace testing
