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

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "mcn/synth.hpp"

namespace mcn {
namespace {

namespace fs = std::filesystem;

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("mcn_synth_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

TEST(Generate, PureFunctionOfConfigAndIndex) {
  DatasetConfig cfg;
  cfg.seed = 11;
  const Scene a = generate_scene(cfg, 3), b = generate_scene(cfg, 3);
  EXPECT_EQ(a.image.pixels, b.image.pixels);
  EXPECT_EQ(a.annotation, b.annotation);
  EXPECT_NE(generate_scene(cfg, 4).image.pixels, a.image.pixels);
}

TEST(Generate, AnnotationsAreConsistent) {
  DatasetConfig cfg;
  cfg.scenes = 20;
  for (const auto& s : generate_dataset(cfg)) {
    const auto& a = s.annotation;
    EXPECT_EQ(a.width, 64);
    EXPECT_EQ(a.seg_map.size(), 64u * 64u);
    EXPECT_LE(a.boxes.size(), 3u);
    for (const auto& b : a.boxes) {
      EXPECT_GE(b.box.x0(), 0);
      EXPECT_LE(b.box.x1(), 64);
      EXPECT_LT(b.cls, 4);
    }
    for (const auto& p : a.persons) {
      EXPECT_EQ(a.boxes[static_cast<std::size_t>(p.box_index)].cls, kPersonClass);
      EXPECT_EQ(p.keypoints.size(), 5u);
    }
  }
}

TEST(Generate, SingleClassIsPersonOnly) {
  DatasetConfig cfg;
  cfg.num_classes = 1;
  cfg.scenes = 10;
  for (const auto& s : generate_dataset(cfg)) {
    for (const auto& b : s.annotation.boxes) EXPECT_EQ(b.cls, kPersonClass);
    for (auto l : s.annotation.seg_map) EXPECT_LE(l, 1);
  }
}

TEST(Generate, NoCollisionKeepsCellsDistinct) {
  DatasetConfig cfg;
  cfg.scenes = 30;
  cfg.no_collision = true;
  for (const auto& s : generate_dataset(cfg)) {
    std::set<std::pair<int, int>> cells;
    for (const auto& b : s.annotation.boxes) {
      EXPECT_TRUE(cells.insert({static_cast<int>(b.box.cx) / 4, static_cast<int>(b.box.cy) / 4}).second);
    }
  }
}

TEST(Generate, RejectsBadConfig) {
  DatasetConfig cfg;
  cfg.num_keypoints = 12;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.image_size = 4;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Flip, TwiceIsIdentityAndSwapsSides) {
  DatasetConfig cfg;
  cfg.seed = 2;
  const Scene s = generate_scene(cfg, 0);
  const Scene f = flip_horizontal(s);
  const Scene ff = flip_horizontal(f);
  EXPECT_EQ(ff.image.pixels, s.image.pixels);
  EXPECT_EQ(ff.annotation, s.annotation);
  EXPECT_EQ(stick_joint_mirror(1), 2);
  EXPECT_EQ(stick_joint_mirror(0), 0);
  if (!s.annotation.boxes.empty()) {
    EXPECT_DOUBLE_EQ(f.annotation.boxes[0].box.cx, 64 - s.annotation.boxes[0].box.cx);
  }
}

TEST(RestrictToPerson, DropsOtherClasses) {
  SceneAnnotation a;
  a.width = a.height = 2;
  a.boxes = {{2, Box{1, 1, 1, 1}}, {0, Box{1, 1, 2, 2}}};
  a.persons = {{1, {Keypoint{1, 1, true}}}};
  a.seg_map = {0, 1, 3, 1};
  const auto r = restrict_to_person(a);
  ASSERT_EQ(r.boxes.size(), 1u);
  EXPECT_EQ(r.persons[0].box_index, 0);
  EXPECT_EQ(r.seg_map, (std::vector<std::uint16_t>{0, 1, 0, 1}));
}

TEST(Rle, Roundtrip) {
  const std::vector<std::uint16_t> labels{0, 0, 2, 2, 2, 1, 0};
  const auto runs = rle_encode(labels);
  EXPECT_EQ(runs.size(), 4u);
  EXPECT_EQ(rle_decode(runs, labels.size()), labels);
  EXPECT_THROW(rle_decode(runs, labels.size() + 1), Error);
}

TEST(Coordinates, ShortestRoundtrip) {
  for (double v : {0.1, 1.0 / 3, 12.5, 1e-7, 63.999999999}) {
    EXPECT_EQ(parse_coordinate(format_coordinate(v)), v);
  }
  EXPECT_EQ(format_coordinate(12.5), "12.5");
  EXPECT_DOUBLE_EQ(parse_coordinate(nlohmann::json(3.25)), 3.25);
}

TEST(AnnotationJson, RoundtripIsExact) {
  DatasetConfig cfg;
  cfg.scenes = 5;
  Dataset ds;
  ds.num_classes = 4;
  ds.num_keypoints = 5;
  int id = 0;
  for (const auto& s : generate_dataset(cfg)) ds.entries.push_back({id++, s.annotation, ""});
  EXPECT_EQ(dataset_from_json(dataset_to_json(ds)), ds);
}

TEST(AnnotationJson, VersionAndValidationErrors) {
  DatasetConfig cfg;
  cfg.scenes = 1;
  Dataset ds;
  ds.num_classes = 4;
  ds.num_keypoints = 5;
  ds.entries.push_back({7, generate_scene(cfg, 0).annotation, ""});
  nlohmann::json j = dataset_to_json(ds);

  nlohmann::json wrong_version = j;
  wrong_version["version"] = "2";
  EXPECT_THROW(dataset_from_json(wrong_version), VersionError);

  nlohmann::json bad_class = j;
  bad_class["images"][0]["boxes"][0]["class"] = 9;
  try {
    dataset_from_json(bad_class);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("7"), std::string::npos) << e.what();
  }
  EXPECT_THROW(dataset_from_json(nlohmann::json::array()), ParseError);
}

TEST(AnnotationFile, MalformedJsonIsParseError) {
  const fs::path dir = temp_dir("malformed");
  std::ofstream(dir / "a.json") << "{ not json";
  EXPECT_THROW(load_annotations(dir / "a.json"), ParseError);
}

TEST(DatasetDir, WriteReadAndByteIdentical) {
  DatasetConfig cfg;
  cfg.scenes = 3;
  cfg.image_size = 32;
  const auto scenes = generate_dataset(cfg);
  const fs::path a = temp_dir("dir_a"), b = temp_dir("dir_b");
  write_dataset(cfg, scenes, a);
  write_dataset(cfg, generate_dataset(cfg), b);
  EXPECT_EQ(slurp(a / "annotations.json"), slurp(b / "annotations.json"));
  EXPECT_EQ(slurp(a / "images" / "000002.ppm"), slurp(b / "images" / "000002.ppm"));
  const LoadedDataset loaded = read_dataset(a);
  ASSERT_EQ(loaded.images.size(), 3u);
  EXPECT_EQ(loaded.images[1].pixels, scenes[1].image.pixels);
  EXPECT_EQ(loaded.dataset.entries[1].annotation, scenes[1].annotation);
}

TEST(CocoMasks, RleAndPolygon) {
  // Column-major runs on a 2x3 image: 1 zero, 2 ones, 3 zeros.
  const auto m = coco_rle_decode({1, 2, 3}, 2, 3);
  EXPECT_EQ(m, (std::vector<std::uint8_t>{0, 1, 0, 1, 0, 0}));
  // Compressed string for counts {1, 2, 3}.
  EXPECT_EQ(coco_rle_counts_from_string("123"), (std::vector<std::uint32_t>{1, 2, 3}));
  const auto poly = rasterize_polygon({0, 0, 4, 0, 4, 2, 0, 2}, 4, 4);
  int inside = 0;
  for (auto v : poly) inside += v;
  EXPECT_EQ(inside, 8);
}

TEST(CocoImport, PersonFirstAndWarnings) {
  const fs::path dir = temp_dir("coco");
  nlohmann::json j;
  j["images"] = {{{"id", 1}, {"width", 8}, {"height", 4}, {"file_name", "a.jpg"}}};
  j["categories"] = {{{"id", 3}, {"name", "dog"}},
                     {{"id", 5}, {"name", "person"}, {"keypoints", {"nose", "tail"}}}};
  j["annotations"] = {
      {{"image_id", 1}, {"category_id", 5}, {"bbox", {0, 0, 4, 4}},
       {"segmentation", {{0, 0, 4, 0, 4, 4, 0, 4}}},
       {"keypoints", {1, 1, 2, 3, 3, 0}}},
      {{"image_id", 1}, {"category_id", 3}, {"bbox", {4, 0, 4, 4}},
       {"segmentation", {{"size", {4, 8}}, {"counts", {16, 16}}}},
       {"keypoints", {1, 1, 2, 0, 0, 0}}},
      {{"image_id", 9}, {"category_id", 3}, {"bbox", {0, 0, 1, 1}}},
      {{"image_id", 1}, {"category_id", 3}, {"bbox", {0, 0, 0, 1}}}};
  std::ofstream(dir / "instances.json") << j.dump();

  const CocoImport r = coco_subset_import(dir);
  EXPECT_EQ(r.category_names, (std::vector<std::string>{"person", "dog"}));
  ASSERT_EQ(r.dataset.entries.size(), 1u);
  const auto& a = r.dataset.entries[0].annotation;
  ASSERT_EQ(a.boxes.size(), 2u);
  EXPECT_EQ(a.boxes[0].cls, 0);
  EXPECT_EQ(a.boxes[1].cls, 1);
  ASSERT_EQ(a.persons.size(), 1u);
  EXPECT_TRUE(a.persons[0].keypoints[0].visible);
  EXPECT_FALSE(a.persons[0].keypoints[1].visible);
  EXPECT_EQ(a.seg_map[0], 1);
  EXPECT_EQ(a.seg_map[7], 2);
  EXPECT_EQ(r.warnings.size(), 3u);
}

TEST(CocoImport, MissingFilesThrow) {
  EXPECT_THROW(coco_subset_import(temp_dir("empty")), IoError);
}

}  // namespace
}  // namespace mcn
