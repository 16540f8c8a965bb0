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

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "commands.hpp"
#include "mcn/losses.hpp"
#include "mcn/net.hpp"
#include "overlay.hpp"
#include "selftest.hpp"

namespace mcn::cli {
namespace {

namespace fs = std::filesystem;

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("mcn_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

int mcn(std::vector<std::string> args) {
  args.insert(args.begin(), "mcn");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

TEST(Cli, UsageErrorsExitTwo) {
  const fs::path d = temp_dir("usage");
  EXPECT_EQ(mcn({"gen", "--scenes", "0", "--out", (d / "g").string()}), kExitUsage);
  EXPECT_EQ(mcn({"frobnicate"}), kExitUsage);
  EXPECT_EQ(mcn({"bench", "--repeats", "4"}), kExitUsage);
  EXPECT_EQ(mcn({"gen", "--size", "64"}), kExitUsage);
  EXPECT_EQ(mcn({"--version"}), kExitOk);
}

TEST(Cli, PoseWithoutDetectionIsUsageError) {
  const fs::path d = temp_dir("pose_rule");
  ASSERT_EQ(mcn({"gen", "--scenes", "2", "--size", "32", "--out", (d / "data").string()}), 0);
  EXPECT_EQ(mcn({"train", "--tasks", "pose", "--data", (d / "data").string(), "--out",
                 (d / "run").string()}),
            kExitUsage);
  EXPECT_FALSE(fs::exists(d / "run"));
}

TEST(Cli, GenIsByteIdentical) {
  const fs::path d = temp_dir("gen");
  for (const char* name : {"a", "b"}) {
    ASSERT_EQ(mcn({"gen", "--seed", "5", "--scenes", "3", "--size", "32", "--out",
                   (d / name).string()}),
              0);
  }
  EXPECT_EQ(slurp(d / "a" / "annotations.json"), slurp(d / "b" / "annotations.json"));
  for (const char* img : {"000000.ppm", "000001.ppm", "000002.ppm"}) {
    EXPECT_EQ(slurp(d / "a" / "images" / img), slurp(d / "b" / "images" / img)) << img;
  }
  const RunManifest m = read_manifest(d / "a" / kManifestFile);
  EXPECT_EQ(m.command, "gen");
  EXPECT_EQ(m.seed, 5u);
  EXPECT_EQ(m.config.at("dataset").at("scenes").get<int>(), 3);
}

TEST(Cli, ManifestIsWrittenBeforeWork) {
  const fs::path d = temp_dir("early_manifest");
  std::ofstream(d / "img.ppm") << "P6\n2 2\n255\n";
  EXPECT_EQ(mcn({"infer", "--model", (d / "missing.mcnw").string(), "--input",
                 (d / "img.ppm").string(), "--out", (d / "out").string()}),
            kExitFailure);
  EXPECT_TRUE(fs::exists(d / "out" / kManifestFile));
}

TEST(Cli, TrainRerunInferRender) {
  const fs::path d = temp_dir("pipeline");
  const std::string data = (d / "data").string();
  ASSERT_EQ(mcn({"gen", "--seed", "1", "--scenes", "4", "--size", "32", "--out", data}), 0);
  ASSERT_EQ(mcn({"--strict", "train", "--data", data, "--steps", "6", "--batch", "2", "--widths",
                 "4,8,8,8", "--head-width", "8", "--checkpoint-interval", "3", "--eval-interval",
                 "3", "--out", (d / "run").string()}),
            0);
  for (const char* f : {"manifest.json", "train_log.jsonl", "model.mcnw", "model.json",
                        "metrics.json", "checkpoints/step_000003.mcnw"}) {
    EXPECT_TRUE(fs::exists(d / "run" / f)) << f;
  }
  std::ifstream log(d / "run" / "train_log.jsonl");
  int lines = 0;
  for (std::string line; std::getline(log, line);) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_TRUE(j.contains("step"));
    ++lines;
  }
  EXPECT_EQ(lines, 6 + 2);

  ASSERT_EQ(mcn({"rerun", "--manifest", (d / "run" / kManifestFile).string(), "--out",
                 (d / "again").string()}),
            0);
  EXPECT_EQ(file_hash(d / "run" / "model.mcnw"), file_hash(d / "again" / "model.mcnw"));

  const std::string image = (d / "data" / "images" / "000000.ppm").string();
  ASSERT_EQ(mcn({"infer", "--model", (d / "run" / "model.mcnw").string(), "--input", image,
                 "--threshold", "0.01", "--out", (d / "infer").string()}),
            0);
  ASSERT_EQ(mcn({"render", "--input", image, "--predictions",
                 (d / "infer" / "prediction.json").string(), "--out", (d / "render").string()}),
            0);
  EXPECT_EQ(slurp(d / "infer" / "overlay.ppm"), slurp(d / "render" / "overlay.ppm"));

  ASSERT_EQ(mcn({"eval", "--model", (d / "run" / "model.mcnw").string(), "--data", data,
                 "--tasks", "seg", "--out", (d / "eval").string()}),
            0);
  const auto metrics = nlohmann::json::parse(slurp(d / "eval" / "metrics.json"));
  EXPECT_TRUE(metrics.at("det_map").is_null());
  EXPECT_FALSE(metrics.at("seg_miou").is_null());
}

TEST(Cli, BenchWritesJson) {
  const fs::path d = temp_dir("bench");
  ASSERT_EQ(mcn({"bench", "--tasks", "det", "--repeats", "5", "--warmup", "1", "--size", "32",
                 "--widths", "4,4,8,8", "--head-width", "4", "--json", (d / "b.json").string()}),
            0);
  const auto j = nlohmann::json::parse(slurp(d / "b.json"));
  EXPECT_EQ(j.at("latency_ratio").get<double>(), 1.0);
  EXPECT_NEAR(j.at("mcn").at("fps").get<double>(),
              1000.0 / j.at("mcn").at("median_ms").get<double>(), 1e-9);
}

TEST(Manifest, JsonRoundtrip) {
  RunManifest m;
  m.version = "1.2.3";
  m.command = "train";
  m.seed = 42;
  m.out = "/tmp/x";
  m.strict = true;
  m.config = {{"a", 1}};
  const auto back = nlohmann::json(m).get<RunManifest>();
  EXPECT_EQ(back.command, "train");
  EXPECT_EQ(back.seed, 42u);
  EXPECT_TRUE(back.strict);
  EXPECT_EQ(back.config, m.config);
}

TEST(Manifest, StrictFromEnvironment) {
  ::setenv("MCN_STRICT", "1", 1);
  EXPECT_TRUE(strict_from_env());
  ::setenv("MCN_STRICT", "0", 1);
  EXPECT_FALSE(strict_from_env());
  ::unsetenv("MCN_STRICT");
}

RgbImage gray(int w, int h, std::uint8_t v) {
  RgbImage img;
  img.width = w;
  img.height = h;
  img.pixels.assign(static_cast<std::size_t>(w) * h * 3, v);
  return img;
}

nlohmann::json background_only(int w, int h, int res) {
  return {{"width", w},
          {"height", h},
          {"detections", nlohmann::json::array()},
          {"poses", nlohmann::json::array()},
          {"seg", {{"resolution", res}, {"rle", {{0, res * res}}}}}};
}

TEST(Overlay, EmptyPredictionsBlendWithBackground) {
  const RgbImage img = gray(8, 8, 101);
  const RgbImage out = render_overlay(img, background_only(8, 8, 4));
  for (auto v : out.pixels) EXPECT_EQ(v, 51);
}

TEST(Overlay, SegOnlyHasNoRectangles) {
  const RgbImage img = gray(8, 8, 100);
  nlohmann::json pred = background_only(8, 8, 2);
  pred["seg"]["rle"] = {{0, 2}, {2, 2}};
  const RgbImage out = render_overlay(img, pred);
  const auto& c = kPalette[2];
  EXPECT_EQ(out.at(0, 0)[0], 50);
  EXPECT_EQ(out.at(7, 7)[0], (100 + c[0] + 1) / 2);
  EXPECT_EQ(out.at(7, 7)[2], (100 + c[2] + 1) / 2);
}

TEST(Overlay, BoxesUseClassPalette) {
  const RgbImage img = gray(16, 16, 0);
  nlohmann::json pred = background_only(16, 16, 4);
  pred["seg"] = nullptr;
  pred["detections"] = {{{"class", 2}, {"score", 0.9}, {"cx", 8}, {"cy", 8}, {"w", 8}, {"h", 4}}};
  const RgbImage out = render_overlay(img, pred);
  const auto& c = kPalette[3];
  EXPECT_TRUE(std::equal(c.begin(), c.end(), out.at(4, 6)));
  EXPECT_TRUE(std::equal(c.begin(), c.end(), out.at(11, 9)));
  EXPECT_EQ(out.at(8, 8)[0], 0);
}

TEST(Overlay, PaletteIsFixed) {
  EXPECT_EQ(kPalette.size(), 16u);
  EXPECT_EQ(kPalette[0], (std::array<std::uint8_t, 3>{0, 0, 0}));
  EXPECT_EQ(kPalette[1], (std::array<std::uint8_t, 3>{230, 25, 75}));
}

TEST(Selftest, CleanBuildPasses) {
  for (const auto& r : run_selftest()) EXPECT_TRUE(r.passed) << r.name << ": " << r.detail;
}

TEST(Selftest, InjectedFocalFaultIsNamed) {
  testing::inject_focal_gradient_fault(true);
  const auto results = op_gradient_checks(0);
  testing::inject_focal_gradient_fault(false);
  std::vector<std::string> failed;
  for (const auto& r : results) {
    if (!r.passed) failed.push_back(r.name);
  }
  EXPECT_EQ(failed, (std::vector<std::string>{"grad.focal_heatmap_loss"}));
}

TEST(Selftest, CodecRoundtripOnCollisionFreeScenes) {
  DatasetConfig cfg;
  cfg.scenes = 25;
  cfg.no_collision = true;
  const auto st = codec_roundtrip(cfg);
  EXPECT_TRUE(st.exact(0.5, 1e-4, 0.5));
  EXPECT_GT(st.gt_keypoints, 0);
}

}  // namespace
}  // namespace mcn::cli
