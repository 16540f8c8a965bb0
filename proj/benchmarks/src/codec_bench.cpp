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

#include <benchmark/benchmark.h>

#include "mcn/codec.hpp"
#include "mcn/synth.hpp"

namespace {

mcn::Scene sample_scene() {
  mcn::DatasetConfig cfg;
  cfg.image_size = 256;
  cfg.max_objects = 8;
  cfg.seed = 5;
  return mcn::generate_scene(cfg, 0);
}

void BM_EncodeTargets(benchmark::State& state) {
  const auto scene = sample_scene();
  const mcn::HeadConfig hc;
  for (auto _ : state) {
    auto t = mcn::encode_targets(scene.annotation, hc);
    benchmark::DoNotOptimize(t.center_gt.data());
  }
}
BENCHMARK(BM_EncodeTargets)->Unit(benchmark::kMicrosecond);

void BM_DecodeDetectionsAndPoses(benchmark::State& state) {
  const auto scene = sample_scene();
  const mcn::HeadConfig hc;
  const auto targets = mcn::encode_targets(scene.annotation, hc);
  const auto pred = mcn::targets_as_prediction(targets, 0, hc.output_stride);
  const mcn::DecodeParams params;
  for (auto _ : state) {
    auto dets = mcn::decode_detections(pred, params);
    auto poses = mcn::decode_poses(pred, dets, params);
    benchmark::DoNotOptimize(poses.data());
  }
}
BENCHMARK(BM_DecodeDetectionsAndPoses)->Unit(benchmark::kMicrosecond);

void BM_DecodeSegmentation(benchmark::State& state) {
  const auto scene = sample_scene();
  const mcn::HeadConfig hc;
  const auto targets = mcn::encode_targets(scene.annotation, hc);
  const auto pred = mcn::targets_as_prediction(targets, 0, hc.output_stride);
  for (auto _ : state) {
    auto ids = mcn::decode_segmentation(pred.seg, hc.num_classes + 1, hc.seg_resolution);
    benchmark::DoNotOptimize(ids.data());
  }
}
BENCHMARK(BM_DecodeSegmentation)->Unit(benchmark::kMicrosecond);

}  // namespace
