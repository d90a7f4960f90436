#pragma once

#include "xferod/tensor.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace xferod {

/// Axis-aligned box (x, y, w, h); origin top-left.
struct Box {
  double x = 0, y = 0, w = 0, h = 0;
  friend bool operator==(const Box&, const Box&) = default;
};

/// One annotated object. bbox is in absolute image pixels.
struct ObjectRecord {
  std::string image_id;
  int class_id = 0;
  Box bbox;
  friend bool operator==(const ObjectRecord&, const ObjectRecord&) = default;
};

struct ImageEntry {
  std::string id;
  int width = 0;
  int height = 0;
  std::map<std::string, std::string> levels;  // level key -> NPY path relative to the manifest
  std::optional<std::string> fc;              // per-object dense-layer features, one row per object
  friend bool operator==(const ImageEntry&, const ImageEntry&) = default;
};

struct DatasetMeta {
  int num_classes = 0;
  std::map<std::string, double> scales;  // level key -> input/feature size ratio
  friend bool operator==(const DatasetMeta&, const DatasetMeta&) = default;
};

/// Validated index of an exported dataset. Object order is the canonical
/// row order of every feature matrix built from it.
struct DatasetManifest {
  DatasetMeta meta;
  std::vector<ImageEntry> images;
  std::vector<ObjectRecord> objects;
  std::filesystem::path root;  // directory that relative paths resolve against

  std::size_t image_index(std::string_view image_id) const;
  std::filesystem::path resolve(const std::string& relpath) const { return root / relpath; }

  /// Objects grouped by image, in manifest order: result[i] lists object
  /// indices living on images[i].
  std::vector<std::vector<std::size_t>> objects_by_image() const;

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

/// Feature maps of one image, loaded from the level files listed in the manifest.
struct FeatureLevel {
  Tensor map;  // C x H x W
  double scale = 1.0;
};

struct FeatureMapSet {
  std::string image_id;
  std::map<std::string, FeatureLevel> levels;
  std::optional<Tensor> fc_features;  // n_i x D
};

/// Parses and validates a manifest document. When check_files is set, every
/// referenced NPY path must exist under root.
///
/// Throws SchemaError for structural or range violations (including K < 1),
/// ReferenceError for objects naming an unknown image, and MissingFile for
/// absent level or fc files.
DatasetManifest parse_manifest(std::string_view json_text, const std::filesystem::path& root,
                               bool check_files = true);

/// Reads a manifest file; relative paths resolve against its directory.
DatasetManifest load_manifest(const std::filesystem::path& path);

/// Writes the manifest as JSON. Paths are written exactly as stored.
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);
std::string manifest_to_json(const DatasetManifest& manifest);

/// Loads the requested levels (and optionally the fc matrix) for one image.
/// Throws MissingFile when the image does not list a requested level.
FeatureMapSet load_feature_maps(const DatasetManifest& manifest, std::size_t image,
                                std::span<const std::string> levels, bool with_fc = false);

/// Clips a pixel box to the [0, width] x [0, height] rectangle. Returns
/// nullopt when the clipped box has zero area.
std::optional<Box> clip_box(const Box& box, int width, int height);

/// Clipped box divided by the image extent; every coordinate lies in [0, 1].
Box normalize_box(const Box& clipped, int width, int height);

}  // namespace xferod
