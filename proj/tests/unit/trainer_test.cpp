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

#include <cmath>

#include "mcn/trainer.hpp"

namespace mcn {
namespace {

struct Fixture {
  BackboneConfig backbone;
  HeadConfig heads;
  std::vector<Scene> scenes;

  Fixture() {
    backbone.stage_widths = {4, 8, 8, 8};
    heads.head_width = 8;
    heads.seg_resolution = 32;
    DatasetConfig dc;
    dc.image_size = 32;
    dc.scenes = 4;
    dc.seed = 1;
    scenes = generate_dataset(dc);
  }
};

TrainConfig short_run(int steps) {
  TrainConfig c;
  c.steps = steps;
  c.batch_size = 2;
  c.learning_rate = 2e-3;
  return c;
}

std::vector<float> flat_params(const MCNModel<float>& m, const std::string& group) {
  std::vector<float> out;
  for (const auto& p : m.parameters()) {
    if (p.group == group) out.insert(out.end(), p.value.data().begin(), p.value.data().end());
  }
  return out;
}

TEST(TrainConfig, JsonRoundtripAndValidation) {
  TrainConfig c;
  c.steps = 17;
  c.optimizer = OptimizerKind::kSgd;
  c.active = {Task::kDetection, Task::kSegmentation};
  c.flip = true;
  const nlohmann::json j = c;
  EXPECT_EQ(j.get<TrainConfig>(), c);
  c.steps = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(TrainingData, SingleClassKeepsPersonsOnly) {
  Fixture f;
  HeadConfig single = f.heads;
  single.class_mode = ClassMode::kSingle;
  single.num_classes = 1;
  const auto data = make_training_data(f.scenes, single);
  for (const auto& a : data.annotations) {
    for (const auto& b : a.boxes) EXPECT_EQ(b.cls, kPersonClass);
  }
}

TEST(Train, LossDecreases) {
  Fixture f;
  auto model = build_model<float>(f.backbone, f.heads, 0);
  const auto log = train(model, make_training_data(f.scenes, f.heads), short_run(40));
  ASSERT_EQ(log.steps.size(), 40u);
  double first = 0, last = 0;
  for (int i = 0; i < 5; ++i) {
    first += log.steps[static_cast<std::size_t>(i)].loss.total;
    last += log.steps[log.steps.size() - 1 - static_cast<std::size_t>(i)].loss.total;
  }
  EXPECT_LT(last, first);
}

TEST(Train, SameSeedSameWeights) {
  Fixture f;
  const auto data = make_training_data(f.scenes, f.heads);
  auto a = build_model<float>(f.backbone, f.heads, 5);
  auto b = build_model<float>(f.backbone, f.heads, 5);
  train(a, data, short_run(6));
  train(b, data, short_run(6));
  EXPECT_EQ(flat_params(a, "backbone"), flat_params(b, "backbone"));
  EXPECT_EQ(flat_params(a, "pose"), flat_params(b, "pose"));
}

TEST(Train, InactiveHeadIsUntouched) {
  Fixture f;
  auto model = build_model<float>(f.backbone, f.heads, 2);
  const auto seg_before = flat_params(model, "seg");
  const auto backbone_before = flat_params(model, "backbone");
  TrainConfig c = short_run(4);
  c.active = {Task::kDetection, Task::kPose};
  train(model, make_training_data(f.scenes, f.heads), c);
  EXPECT_EQ(flat_params(model, "seg"), seg_before);
  EXPECT_NE(flat_params(model, "backbone"), backbone_before);
}

TEST(Train, NonFiniteLossNamesStep) {
  Fixture f;
  auto model = build_model<float>(f.backbone, f.heads, 2);
  TrainConfig c = short_run(3);
  c.weights.lambda_seg = 3e38;  // overflows the float total
  try {
    train(model, make_training_data(f.scenes, f.heads), c);
    FAIL() << "expected TrainingError";
  } catch (const TrainingError& e) {
    EXPECT_EQ(e.step(), 1);
    EXPECT_EQ(e.term(), "total");
  }
}

TEST(Train, PeriodicEvaluation) {
  Fixture f;
  auto model = build_model<float>(f.backbone, f.heads, 2);
  TrainConfig c = short_run(5);
  c.eval_interval = 2;
  std::vector<int> eval_steps;
  TrainCallbacks cb;
  cb.on_eval = [&](int step, const MetricReport&) { eval_steps.push_back(step); };
  train(model, make_training_data(f.scenes, f.heads), c, cb);
  EXPECT_EQ(eval_steps, (std::vector<int>{2, 4, 5}));
}

TEST(Evaluate, DoesNotMutateModel) {
  Fixture f;
  auto model = build_model<float>(f.backbone, f.heads, 2);
  const auto params = flat_params(model, "backbone");
  const auto buffers = model.buffers().begin()->second.mean.clone();
  const auto report = evaluate(model, make_training_data(f.scenes, f.heads));
  EXPECT_EQ(flat_params(model, "backbone"), params);
  const auto& after = model.buffers().begin()->second.mean;
  for (std::int64_t i = 0; i < after.numel(); ++i) EXPECT_EQ(after.data()[i], buffers.data()[i]);
  EXPECT_TRUE(report.det_map50.has_value());
  EXPECT_TRUE(report.seg_miou.has_value());
  EXPECT_EQ(report.images, 4);
}

TEST(Predict, OneResultPerImage) {
  Fixture f;
  auto model = build_model<float>(f.backbone, f.heads, 2);
  const auto data = make_training_data(f.scenes, f.heads);
  const auto results = predict(model, data.images);
  ASSERT_EQ(results.size(), 4u);
  EXPECT_EQ(results[0].seg.size(), 32u * 32u);
  EXPECT_EQ(results[0].seg_resolution, 32);
}

}  // namespace
}  // namespace mcn
