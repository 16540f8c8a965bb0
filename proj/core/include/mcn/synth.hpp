// Copyright 2026 The mcn Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mcn/codec.hpp"
#include "mcn/image.hpp"
#include "mcn/tensor.hpp"

namespace mcn {

// Stick-figure joints in annotation order. Configs with K < 11 use the
// first K entries.
inline constexpr int kMaxStickJoints = 11;
const char* stick_joint_name(int k);
// Index of the mirror joint (itself for joints on the body axis).
int stick_joint_mirror(int k);

struct DatasetConfig {
  int image_size = 64;
  int num_classes = 4;  // class 0 is the stick-figure person
  int max_objects = 3;
  int num_keypoints = 5;
  std::uint64_t seed = 0;
  int scenes = 100;
  // Object extent range in pixels; 0 picks size/5 and 2*size/5.
  int min_object_size = 0;
  int max_object_size = 0;
  // When set, no two objects share a center cell and no two visible
  // keypoints share a cell, at `cell_size` granularity.
  bool no_collision = false;
  int cell_size = 4;
  // Share of persons that carry keypoint annotations.
  double pose_fraction = 1.0;

  void validate() const;
  int min_extent() const;
  int max_extent() const;
  bool operator==(const DatasetConfig&) const = default;
};

void to_json(nlohmann::json& j, const DatasetConfig& c);
void from_json(const nlohmann::json& j, DatasetConfig& c);

struct Scene {
  RgbImage image;
  SceneAnnotation annotation;

  Tensor<float> tensor() const { return image_to_tensor(image); }
};

// Pure function of (cfg, index).
Scene generate_scene(const DatasetConfig& cfg, int index);
std::vector<Scene> generate_dataset(const DatasetConfig& cfg);

// Mirrors image and annotation about the vertical axis, swapping
// left/right joints.
Scene flip_horizontal(const Scene& scene);
SceneAnnotation flip_horizontal(const SceneAnnotation& ann);

// Keeps only person boxes (renumbering persons) and maps every other
// seg label to background.
SceneAnnotation restrict_to_person(const SceneAnnotation& ann);

struct DatasetEntry {
  int id = 0;
  SceneAnnotation annotation;
  std::string file;  // image path relative to the annotation file, may be empty
  bool operator==(const DatasetEntry&) const = default;
};

struct Dataset {
  int num_classes = 0;
  int num_keypoints = 0;
  std::vector<DatasetEntry> entries;
  bool operator==(const Dataset&) const = default;
};

// Row-major (id, run length) pairs.
std::vector<std::pair<std::uint16_t, std::uint32_t>> rle_encode(
    const std::vector<std::uint16_t>& labels);
std::vector<std::uint16_t> rle_decode(
    const std::vector<std::pair<std::uint16_t, std::uint32_t>>& runs, std::size_t expected);

// Shortest decimal string that parses back to the same double.
std::string format_coordinate(double v);
double parse_coordinate(const nlohmann::json& v);

inline constexpr const char* kAnnotationVersion = "1";

nlohmann::json dataset_to_json(const Dataset& ds);
// Throws VersionError, ValidationError (naming the offending entry) or
// ParseError for structural problems.
Dataset dataset_from_json(const nlohmann::json& j);

void save_annotations(const Dataset& ds, const std::filesystem::path& path);
// Throws ParseError on malformed JSON, plus the errors of dataset_from_json.
Dataset load_annotations(const std::filesystem::path& path);

// Writes annotations.json and images/NNNNNN.ppm under `dir`.
void write_dataset(const DatasetConfig& cfg, const std::vector<Scene>& scenes,
                   const std::filesystem::path& dir);

// Annotations plus decoded images of a dataset directory.
struct LoadedDataset {
  Dataset dataset;
  std::vector<RgbImage> images;
};
LoadedDataset read_dataset(const std::filesystem::path& dir);

struct CocoImport {
  Dataset dataset;
  std::vector<std::string> category_names;  // by dense class id
  std::vector<std::string> warnings;
};

// Reads every *.json under `dir` (and `dir`/annotations) in COCO format.
// Polygons and RLE masks are rasterized into one label map per image;
// the person category becomes class 0. Problems are collected as
// warnings; only a missing annotation file throws (IoError).
CocoImport coco_subset_import(const std::filesystem::path& dir);

// Decoders for COCO mask encodings (column-major runs starting with 0s).
std::vector<std::uint8_t> coco_rle_decode(const std::vector<std::uint32_t>& counts, int h, int w);
std::vector<std::uint32_t> coco_rle_counts_from_string(const std::string& s);
std::vector<std::uint8_t> rasterize_polygon(const std::vector<double>& xy, int h, int w);

}  // namespace mcn
