#include "xferod/error.hpp"
#include "xferod/manifest.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace xferod {

using nlohmann::json;

namespace {

const json& require(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object()) throw SchemaError(where + " must be an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError(where + ": missing key '" + key + "'");
  return *it;
}

long long require_int(const json& obj, const char* key, const std::string& where) {
  const auto& v = require(obj, key, where);
  if (!v.is_number_integer()) throw SchemaError(where + "." + key + " must be an integer");
  return v.get<long long>();
}

std::string require_string(const json& obj, const char* key, const std::string& where) {
  const auto& v = require(obj, key, where);
  if (!v.is_string()) throw SchemaError(where + "." + key + " must be a string");
  return v.get<std::string>();
}

double as_finite(const json& v, const std::string& where) {
  if (!v.is_number()) throw SchemaError(where + " must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw SchemaError(where + " must be finite");
  return d;
}

}  // namespace

std::size_t DatasetManifest::image_index(std::string_view image_id) const {
  for (std::size_t i = 0; i < images.size(); ++i)
    if (images[i].id == image_id) return i;
  throw ReferenceError("unknown image id '" + std::string(image_id) + "'");
}

std::vector<std::vector<std::size_t>> DatasetManifest::objects_by_image() const {
  std::map<std::string_view, std::size_t> index;
  for (std::size_t i = 0; i < images.size(); ++i) index.emplace(images[i].id, i);
  std::vector<std::vector<std::size_t>> grouped(images.size());
  for (std::size_t o = 0; o < objects.size(); ++o) {
    auto it = index.find(objects[o].image_id);
    if (it == index.end())
      throw ReferenceError("object " + std::to_string(o) + " references unknown image '" +
                           objects[o].image_id + "'");
    grouped[it->second].push_back(o);
  }
  return grouped;
}

DatasetManifest parse_manifest(std::string_view json_text, const std::filesystem::path& root,
                               bool check_files) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("manifest is not valid JSON: ") + e.what());
  }

  DatasetManifest m;
  m.root = root;

  const auto& meta = require(doc, "meta", "manifest");
  const long long k = require_int(meta, "num_classes", "meta");
  if (k < 1 || k > std::numeric_limits<int>::max())
    throw SchemaError("meta.num_classes must be in [1, INT_MAX], got " + std::to_string(k));
  m.meta.num_classes = static_cast<int>(k);
  const auto& scales = require(meta, "scales", "meta");
  if (!scales.is_object()) throw SchemaError("meta.scales must be an object");
  for (const auto& [level, value] : scales.items()) {
    const double s = as_finite(value, "meta.scales." + level);
    if (!(s > 0)) throw SchemaError("meta.scales." + level + " must be > 0");
    m.meta.scales.emplace(level, s);
  }

  const auto& images = require(doc, "images", "manifest");
  if (!images.is_array()) throw SchemaError("images must be an array");
  std::set<std::string> seen;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const std::string where = "images[" + std::to_string(i) + "]";
    const auto& img = images[i];
    ImageEntry e;
    e.id = require_string(img, "id", where);
    if (e.id.empty()) throw SchemaError(where + ".id must be non-empty");
    if (!seen.insert(e.id).second) throw SchemaError("duplicate image id '" + e.id + "'");
    const long long w = require_int(img, "width", where);
    const long long h = require_int(img, "height", where);
    constexpr long long kMaxSide = std::numeric_limits<int>::max();
    if (w < 1 || h < 1 || w > kMaxSide || h > kMaxSide)
      throw SchemaError(where + ": width and height must be in [1, INT_MAX]");
    e.width = static_cast<int>(w);
    e.height = static_cast<int>(h);
    const auto& levels = require(img, "levels", where);
    if (!levels.is_object()) throw SchemaError(where + ".levels must be an object");
    for (const auto& [level, rel] : levels.items()) {
      if (!rel.is_string()) throw SchemaError(where + ".levels." + level + " must be a path");
      if (!m.meta.scales.contains(level))
        throw SchemaError(where + ": level '" + level + "' has no scale in meta.scales");
      e.levels.emplace(level, rel.get<std::string>());
    }
    if (auto it = img.find("fc"); it != img.end() && !it->is_null()) {
      if (!it->is_string()) throw SchemaError(where + ".fc must be a path");
      e.fc = it->get<std::string>();
    }
    m.images.push_back(std::move(e));
  }

  const auto& objects = require(doc, "objects", "manifest");
  if (!objects.is_array()) throw SchemaError("objects must be an array");
  for (std::size_t i = 0; i < objects.size(); ++i) {
    const std::string where = "objects[" + std::to_string(i) + "]";
    const auto& obj = objects[i];
    ObjectRecord rec;
    rec.image_id = require_string(obj, "image_id", where);
    if (!seen.contains(rec.image_id))
      throw ReferenceError(where + " references unknown image '" + rec.image_id + "'");
    const long long cls = require_int(obj, "class_id", where);
    if (cls < 0 || cls >= k)
      throw SchemaError(where + ".class_id " + std::to_string(cls) + " outside [0, " +
                        std::to_string(k) + ")");
    rec.class_id = static_cast<int>(cls);
    const auto& bbox = require(obj, "bbox", where);
    if (!bbox.is_array() || bbox.size() != 4) throw SchemaError(where + ".bbox must be [x, y, w, h]");
    rec.bbox = {as_finite(bbox[0], where + ".bbox"), as_finite(bbox[1], where + ".bbox"),
                as_finite(bbox[2], where + ".bbox"), as_finite(bbox[3], where + ".bbox")};
    if (!(rec.bbox.w > 0) || !(rec.bbox.h > 0))
      throw SchemaError(where + ".bbox width and height must be > 0");
    m.objects.push_back(std::move(rec));
  }

  if (check_files) {
    for (const auto& img : m.images) {
      for (const auto& [level, rel] : img.levels)
        if (!std::filesystem::is_regular_file(m.resolve(rel)))
          throw MissingFile("image '" + img.id + "' level '" + level + "': missing file " +
                            m.resolve(rel).string());
      if (img.fc && !std::filesystem::is_regular_file(m.resolve(*img.fc)))
        throw MissingFile("image '" + img.id + "': missing fc file " + m.resolve(*img.fc).string());
    }
  }
  return m;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_manifest(buf.str(), std::filesystem::absolute(path).parent_path());
}

std::string manifest_to_json(const DatasetManifest& m) {
  json doc;
  doc["meta"]["num_classes"] = m.meta.num_classes;
  doc["meta"]["scales"] = json::object();
  for (const auto& [level, s] : m.meta.scales) doc["meta"]["scales"][level] = s;
  doc["images"] = json::array();
  for (const auto& img : m.images) {
    json e;
    e["id"] = img.id;
    e["width"] = img.width;
    e["height"] = img.height;
    e["levels"] = json::object();
    for (const auto& [level, rel] : img.levels) e["levels"][level] = rel;
    if (img.fc) e["fc"] = *img.fc;
    doc["images"].push_back(std::move(e));
  }
  doc["objects"] = json::array();
  for (const auto& o : m.objects)
    doc["objects"].push_back(
        {{"image_id", o.image_id}, {"class_id", o.class_id}, {"bbox", {o.bbox.x, o.bbox.y, o.bbox.w, o.bbox.h}}});
  return doc.dump(2) + "\n";
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << manifest_to_json(manifest);
  if (!out) throw IoError("write failed: " + path.string());
}

FeatureMapSet load_feature_maps(const DatasetManifest& manifest, std::size_t image,
                                std::span<const std::string> levels, bool with_fc) {
  const auto& entry = manifest.images.at(image);
  FeatureMapSet set;
  set.image_id = entry.id;
  for (const auto& level : levels) {
    auto it = entry.levels.find(level);
    if (it == entry.levels.end())
      throw MissingFile("image '" + entry.id + "' has no level '" + level + "'");
    Tensor map = read_tensor(manifest.resolve(it->second));
    if (map.rank() != 3)
      throw InvalidData("level '" + level + "' of image '" + entry.id + "' is not a C x H x W tensor");
    set.levels.emplace(level, FeatureLevel{std::move(map), manifest.meta.scales.at(level)});
  }
  if (with_fc) {
    if (!entry.fc) throw InvalidData("missing fc features for image '" + entry.id + "'");
    try {
      set.fc_features = read_tensor(manifest.resolve(*entry.fc));
    } catch (const IoError&) {
      throw InvalidData("missing fc features for image '" + entry.id + "'");
    }
    if (set.fc_features->rank() != 2)
      throw InvalidData("fc features of image '" + entry.id + "' must be a matrix");
  }
  return set;
}

std::optional<Box> clip_box(const Box& box, int width, int height) {
  const double x0 = std::clamp(box.x, 0.0, static_cast<double>(width));
  const double y0 = std::clamp(box.y, 0.0, static_cast<double>(height));
  const double x1 = std::clamp(box.x + box.w, 0.0, static_cast<double>(width));
  const double y1 = std::clamp(box.y + box.h, 0.0, static_cast<double>(height));
  if (!(x1 > x0) || !(y1 > y0)) return std::nullopt;
  return Box{x0, y0, x1 - x0, y1 - y0};
}

Box normalize_box(const Box& clipped, int width, int height) {
  const double w = width, h = height;
  return {clipped.x / w, clipped.y / h, clipped.w / w, clipped.h / h};
}

}  // namespace xferod
