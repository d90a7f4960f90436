#include "xferod/error.hpp"
#include "xferod/feature_matrix.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

namespace xferod {

using nlohmann::json;

void FeatureMatrix::validate() const {
  const auto n = features.rows();
  if (n < 1 || features.cols() < 1) throw InvalidData("feature matrix must have n >= 1 and D >= 1");
  if (static_cast<Eigen::Index>(labels.size()) != n || boxes.rows() != n)
    throw InvalidData("features, labels and boxes must have the same row count");
  if (!source_objects.empty() && static_cast<Eigen::Index>(source_objects.size()) != n)
    throw InvalidData("source object index must be empty or have one entry per row");
  if (num_classes < 1) throw InvalidData("num_classes must be >= 1");
  if (!features.allFinite()) throw InvalidData("feature matrix contains NaN or Inf");
  for (auto y : labels)
    if (y < 0 || y >= num_classes) throw InvalidData("label outside [0, num_classes)");
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto b = boxes.row(i);
    if (!b.allFinite() || b(0) < 0 || b(0) > 1 || b(1) < 0 || b(1) > 1 || !(b(2) > 0) ||
        b(2) > 1 || !(b(3) > 0) || b(3) > 1)
      throw InvalidData("normalized box " + std::to_string(i) + " outside [0, 1]");
  }
}

bool operator==(const FeatureMatrix& a, const FeatureMatrix& b) {
  return a.features.rows() == b.features.rows() && a.features.cols() == b.features.cols() &&
         a.boxes.rows() == b.boxes.rows() && a.features == b.features && a.boxes == b.boxes &&
         a.labels == b.labels && a.num_classes == b.num_classes &&
         a.extractor_tag == b.extractor_tag && a.source_objects == b.source_objects;
}

void write_feature_matrix(const FeatureMatrix& fm, const std::filesystem::path& dir) {
  fm.validate();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  const std::vector<float> flat(fm.features.data(), fm.features.data() + fm.features.size());
  write_tensor(Tensor({fm.rows(), fm.dims()}, flat), dir / "features.npy");

  json meta;
  meta["extractor"] = fm.extractor_tag;
  meta["num_classes"] = fm.num_classes;
  meta["labels"] = fm.labels;
  meta["boxes"] = json::array();
  for (Eigen::Index i = 0; i < fm.boxes.rows(); ++i)
    meta["boxes"].push_back({fm.boxes(i, 0), fm.boxes(i, 1), fm.boxes(i, 2), fm.boxes(i, 3)});
  if (!fm.source_objects.empty()) meta["source_objects"] = fm.source_objects;

  std::ofstream out(dir / "meta.json", std::ios::trunc);
  if (!out) throw IoError("cannot write " + (dir / "meta.json").string());
  out << meta.dump(1) << '\n';
  if (!out) throw IoError("write failed: " + (dir / "meta.json").string());
}

FeatureMatrix read_feature_matrix(const std::filesystem::path& dir) {
  const auto meta_path = dir / "meta.json";
  if (!std::filesystem::is_regular_file(dir / "features.npy") ||
      !std::filesystem::is_regular_file(meta_path))
    throw MissingFile("expected features.npy and meta.json in " + dir.string());

  const Tensor t = read_tensor(dir / "features.npy");
  if (t.rank() != 2) throw InvalidData("features.npy must be a matrix");

  std::ifstream in(meta_path);
  if (!in) throw IoError("cannot open " + meta_path.string());
  std::stringstream buf;
  buf << in.rdbuf();

  FeatureMatrix fm;
  try {
    const json meta = json::parse(buf.str());
    fm.extractor_tag = meta.at("extractor").get<std::string>();
    fm.num_classes = meta.at("num_classes").get<int>();
    fm.labels = meta.at("labels").get<std::vector<int>>();
    const auto& boxes = meta.at("boxes");
    fm.boxes.resize(static_cast<Eigen::Index>(boxes.size()), 4);
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      if (boxes[i].size() != 4) throw InvalidData("box rows must have 4 entries");
      for (int c = 0; c < 4; ++c) fm.boxes(static_cast<Eigen::Index>(i), c) = boxes[i][c].get<double>();
    }
    if (meta.contains("source_objects"))
      fm.source_objects = meta["source_objects"].get<std::vector<std::size_t>>();
  } catch (const json::exception& e) {
    throw InvalidData(std::string("malformed meta.json: ") + e.what());
  }

  fm.features = Eigen::Map<const FeatureRows>(t.values().data(), static_cast<Eigen::Index>(t.dim(0)),
                                              static_cast<Eigen::Index>(t.dim(1)));
  fm.validate();
  return fm;
}

}  // namespace xferod
