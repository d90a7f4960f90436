#include "xferod/error.hpp"
#include "xferod/log.hpp"
#include "xferod/parallel.hpp"
#include "xferod/pooling.hpp"

#include <map>
#include <set>

namespace xferod {

namespace {

// Per-object pooled rows; nullopt marks an object dropped for an empty box.
using ObjectRows = std::vector<std::optional<std::vector<float>>>;

std::optional<Box> clipped_object_box(const DatasetManifest& m, std::size_t image,
                                      const ObjectRecord& obj) {
  const auto& img = m.images[image];
  return clip_box(obj.bbox, img.width, img.height);
}

FeatureMatrix assemble(const DatasetManifest& m, std::string tag, const ObjectRows& rows) {
  std::vector<std::size_t> kept;
  std::size_t dims = 0;
  for (std::size_t o = 0; o < rows.size(); ++o) {
    if (!rows[o]) {
      warn("object " + std::to_string(o) + " on image '" + m.objects[o].image_id +
           "' has an empty box after clipping; skipped");
      continue;
    }
    if (kept.empty()) dims = rows[o]->size();
    if (rows[o]->size() != dims)
      throw InvalidData("object " + std::to_string(o) + " has " + std::to_string(rows[o]->size()) +
                        " feature dims, expected " + std::to_string(dims) +
                        " (channel count differs across images or levels)");
    kept.push_back(o);
  }
  if (kept.empty()) throw InvalidData("no object survives box clipping");

  FeatureMatrix fm;
  const auto n = static_cast<Eigen::Index>(kept.size());
  fm.features.resize(n, static_cast<Eigen::Index>(dims));
  fm.boxes.resize(n, 4);
  fm.labels.reserve(kept.size());
  fm.num_classes = m.meta.num_classes;
  fm.extractor_tag = std::move(tag);
  fm.source_objects = kept;

  std::map<std::string_view, std::size_t> image_of;
  for (std::size_t i = 0; i < m.images.size(); ++i) image_of.emplace(m.images[i].id, i);

  for (Eigen::Index r = 0; r < n; ++r) {
    const auto o = kept[static_cast<std::size_t>(r)];
    const auto& obj = m.objects[o];
    const auto image = image_of.at(obj.image_id);
    const auto& img = m.images[image];
    const Box norm = normalize_box(*clipped_object_box(m, image, obj), img.width, img.height);
    fm.boxes.row(r) << norm.x, norm.y, norm.w, norm.h;
    fm.labels.push_back(obj.class_id);
    for (std::size_t d = 0; d < dims; ++d)
      fm.features(r, static_cast<Eigen::Index>(d)) = (*rows[o])[d];
  }
  fm.validate();
  return fm;
}

void require_level_everywhere(const std::string& level, const DatasetManifest& m) {
  if (!m.meta.scales.contains(level))
    throw MissingFile("level '" + level + "' is not declared in meta.scales");
  for (const auto& img : m.images)
    if (!img.levels.contains(level))
      throw MissingFile("image '" + img.id + "' has no level '" + level + "'");
}

}  // namespace

FeatureMatrix extract_roi(const std::string& level, const DatasetManifest& manifest,
                          const RoiAlignConfig& cfg) {
  require_level_everywhere(level, manifest);
  const auto by_image = manifest.objects_by_image();
  ObjectRows rows(manifest.objects.size());
  const std::vector<std::string> wanted{level};

  parallel_for(manifest.images.size(), [&](std::size_t image) {
    if (by_image[image].empty()) return;
    const auto maps = load_feature_maps(manifest, image, wanted);
    const auto& lvl = maps.levels.at(level);
    for (const auto o : by_image[image]) {
      const auto box = clipped_object_box(manifest, image, manifest.objects[o]);
      if (box) rows[o] = roi_align_pooled(lvl.map, *box, lvl.scale, cfg);
    }
  });
  return assemble(manifest, "roi:" + level, rows);
}

FeatureMatrix extract_multiscale(const DatasetManifest& manifest, const MultiScaleConfig& ms,
                                 const RoiAlignConfig& roi) {
  std::vector<std::string> eligible = ms.levels;
  if (eligible.empty())
    for (const auto& [level, scale] : manifest.meta.scales) eligible.push_back(level);
  if (eligible.empty()) throw InvalidData("manifest declares no feature levels");

  std::map<int, std::string> by_index;
  for (const auto& level : eligible) {
    const auto it = manifest.meta.scales.find(level);
    if (it == manifest.meta.scales.end())
      throw MissingFile("level '" + level + "' is not declared in meta.scales");
    const auto k = pyramid_index(it->second);
    if (!k)
      throw InvalidData("level '" + level + "' has scale " + std::to_string(it->second) +
                        ", which is not a power of two; pick pyramid levels explicitly");
    if (auto [pos, inserted] = by_index.emplace(*k, level); !inserted)
      throw InvalidData("levels '" + pos->second + "' and '" + level +
                        "' share pyramid index " + std::to_string(*k) +
                        "; pick pyramid levels explicitly");
  }
  const int k_min = by_index.begin()->first;
  const int k_max = by_index.rbegin()->first;
  if (ms.k0 < k_min || ms.k0 > k_max)
    throw InvalidData("canonical level k0=" + std::to_string(ms.k0) + " outside available range [" +
                      std::to_string(k_min) + ", " + std::to_string(k_max) + "]");

  const auto by_image = manifest.objects_by_image();
  ObjectRows rows(manifest.objects.size());
  std::vector<std::size_t> channel_counts(manifest.images.size(), 0);

  parallel_for(manifest.images.size(), [&](std::size_t image) {
    std::vector<std::optional<Box>> boxes;
    std::set<std::string> needed;
    std::vector<std::string> assigned;
    for (const auto o : by_image[image]) {
      boxes.push_back(clipped_object_box(manifest, image, manifest.objects[o]));
      if (!boxes.back()) {
        assigned.emplace_back();
        continue;
      }
      const int k = fpn_level_for_box(boxes.back()->w, boxes.back()->h, ms, k_min, k_max);
      const auto it = by_index.find(k);
      if (it == by_index.end())
        throw MissingFile("no feature level with pyramid index " + std::to_string(k) +
                          " for object " + std::to_string(o));
      assigned.push_back(it->second);
      needed.insert(it->second);
    }
    if (needed.empty()) return;

    const std::vector<std::string> levels(needed.begin(), needed.end());
    const auto maps = load_feature_maps(manifest, image, levels);
    const std::size_t channels = maps.levels.begin()->second.map.dim(0);
    for (const auto& [level, lvl] : maps.levels)
      if (lvl.map.dim(0) != channels)
        throw InvalidData("levels of image '" + manifest.images[image].id +
                          "' disagree on channel count");
    channel_counts[image] = channels;

    for (std::size_t j = 0; j < by_image[image].size(); ++j) {
      if (!boxes[j]) continue;
      const auto& lvl = maps.levels.at(assigned[j]);
      rows[by_image[image][j]] = roi_align_pooled(lvl.map, *boxes[j], lvl.scale, roi);
    }
  });

  std::size_t channels = 0;
  for (const auto c : channel_counts) {
    if (c == 0) continue;
    if (channels != 0 && c != channels)
      throw InvalidData("feature levels disagree on channel count across images");
    channels = c;
  }
  return assemble(manifest, "ms", rows);
}

FeatureMatrix extract_global(const std::string& level, const DatasetManifest& manifest) {
  require_level_everywhere(level, manifest);
  const auto by_image = manifest.objects_by_image();
  ObjectRows rows(manifest.objects.size());
  const std::vector<std::string> wanted{level};

  parallel_for(manifest.images.size(), [&](std::size_t image) {
    if (by_image[image].empty()) return;
    const auto maps = load_feature_maps(manifest, image, wanted);
    const auto pooled = spatial_mean(maps.levels.at(level).map);
    for (const auto o : by_image[image])
      if (clipped_object_box(manifest, image, manifest.objects[o])) rows[o] = pooled;
  });
  return assemble(manifest, "global:" + level, rows);
}

FeatureMatrix extract_fc(const DatasetManifest& manifest) {
  const auto by_image = manifest.objects_by_image();
  for (std::size_t i = 0; i < manifest.images.size(); ++i)
    if (!by_image[i].empty() && !manifest.images[i].fc)
      throw InvalidData("missing fc features for image '" + manifest.images[i].id + "'");

  ObjectRows rows(manifest.objects.size());

  parallel_for(manifest.images.size(), [&](std::size_t image) {
    if (by_image[image].empty()) return;
    const auto maps = load_feature_maps(manifest, image, {}, /*with_fc=*/true);
    const Tensor& fc = *maps.fc_features;
    if (fc.dim(0) != by_image[image].size())
      throw InvalidData("fc features of image '" + manifest.images[image].id + "' have " +
                        std::to_string(fc.dim(0)) + " rows for " +
                        std::to_string(by_image[image].size()) + " objects");
    for (std::size_t j = 0; j < by_image[image].size(); ++j) {
      const auto o = by_image[image][j];
      if (!clipped_object_box(manifest, image, manifest.objects[o])) continue;
      std::vector<float> row(fc.dim(1));
      for (std::size_t d = 0; d < row.size(); ++d) row[d] = fc.at(j, d);
      rows[o] = std::move(row);
    }
  });
  return assemble(manifest, "fc:-1", rows);
}

}  // namespace xferod
