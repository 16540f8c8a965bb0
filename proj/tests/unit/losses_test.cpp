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

#include "mcn/losses.hpp"
#include "mcn/synth.hpp"

namespace mcn {
namespace {

using Td = Tensor<double>;

TEST(LossWeights, Defaults) {
  const LossWeights w;
  EXPECT_EQ(w.lambda_size, 0.1);
  EXPECT_EQ(w.lambda_seg, 5.0);
  EXPECT_EQ(w.lambda_joint, 1.0);
  LossWeights bad;
  bad.lambda_seg = -1;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(LossWeights, JsonRoundtrip) {
  LossWeights w{0.25, 2.0, 0.5};
  const nlohmann::json j = w;
  EXPECT_EQ(j.get<LossWeights>(), w);
}

TEST(Focal, PositiveCell) {
  const Td p({1, 1, 1, 1}, std::vector<double>{0.5}), g({1, 1, 1, 1}, std::vector<double>{1});
  EXPECT_NEAR(focal_heatmap_loss(p, g).item(), 0.1733, 1e-4);
}

TEST(Focal, NegativeCellIsPenaltyReduced) {
  const Td p({1, 1, 1, 1}, std::vector<double>{0.5}), g({1, 1, 1, 1}, std::vector<double>{0.5});
  // -(1 - 0.5)^4 * 0.5^2 * log(1 - 0.5), normalized by max(1, 0 positives).
  EXPECT_NEAR(focal_heatmap_loss(p, g).item(), 0.0625 * 0.25 * std::log(2.0), 1e-12);
}

TEST(Focal, NormalizedByPositiveCount) {
  const Td p({1, 1, 1, 2}, std::vector<double>{0.5, 0.5});
  const Td g({1, 1, 1, 2}, std::vector<double>{1, 1});
  EXPECT_NEAR(focal_heatmap_loss(p, g).item(), 0.25 * std::log(2.0), 1e-12);
}

TEST(Focal, SaturatedPredictionsStayFinite) {
  const Td p({1, 1, 1, 2}, std::vector<double>{0.0, 1.0});
  const Td g({1, 1, 1, 2}, std::vector<double>{1, 0});
  EXPECT_TRUE(std::isfinite(focal_heatmap_loss(p, g).item()));
}

TEST(MaskedL1, SharedMask) {
  const Td pred({1, 1, 1, 2}, std::vector<double>{0, 4});
  const Td gt({1, 1, 1, 2}, std::vector<double>{2, 0});
  const Td mask({1, 1, 2}, std::vector<double>{1, 1});
  EXPECT_DOUBLE_EQ(masked_l1_loss(pred, gt, mask).item(), 3.0);
}

TEST(MaskedL1, PerChannelMaskCountsCellsOverChannels) {
  const Td pred({1, 2, 1, 2}, std::vector<double>{1, 1, 1, 1});
  const Td gt({1, 2, 1, 2}, 0.0);
  const Td mask({1, 2, 1, 2}, std::vector<double>{1, 1, 1, 1});
  // 4 masked entries over 2 channels = 2 cells.
  EXPECT_DOUBLE_EQ(masked_l1_loss(pred, gt, mask).item(), 2.0);
}

TEST(MaskedL1, EmptyMaskIsZero) {
  const Td pred({1, 1, 1, 2}, 1.0), gt({1, 1, 1, 2}, 0.0), mask({1, 1, 2}, 0.0);
  EXPECT_DOUBLE_EQ(masked_l1_loss(pred, gt, mask).item(), 0.0);
}

TEST(SegCrossEntropy, UniformOverFiveLabels) {
  const Td s({1, 5, 1, 1}, 0.2);
  const std::vector<std::uint16_t> gt{4};
  EXPECT_NEAR(seg_cross_entropy(s, std::span(gt)).item(), 1.6094, 1e-4);
}

TEST(SegCrossEntropy, RejectsOutOfRangeLabels) {
  const Td s({1, 2, 1, 1}, 0.5);
  const std::vector<std::uint16_t> gt{2};
  EXPECT_THROW(seg_cross_entropy(s, std::span(gt)), InvalidArgument);
}

TEST(ComposeTotal, WeightsApply) {
  LossBreakdown b;
  b.center = 1;
  b.size = 10;
  b.off = 0.5;
  b.keyp = 0.25;
  b.keyp_off = 0.25;
  b.seg = 0.1;
  EXPECT_DOUBLE_EQ(compose_total(b, LossWeights{}), ((((1 + 1.0) + 0.5) + 0.25) + 0.25) + 0.5);
}

TEST(ComposeTotal, BreakdownJsonFields) {
  const auto j = breakdown_to_json(LossBreakdown{});
  for (const char* k : {"center", "size", "off", "keyp", "keyp_off", "seg", "total"}) {
    EXPECT_TRUE(j.contains(k)) << k;
  }
}

class TotalLossTest : public ::testing::Test {
 protected:
  void SetUp() override {
    DatasetConfig dc;
    dc.image_size = 16;
    dc.scenes = 2;
    dc.seed = 4;
    BackboneConfig bb;
    bb.stage_widths = {4, 4, 8, 8};
    heads.seg_resolution = 16;
    heads.head_width = 4;
    model.emplace(build_model<double>(bb, heads, 2));
    std::vector<Tensor<float>> imgs;
    std::vector<EncodedTargets> ts;
    for (const auto& s : generate_dataset(dc)) {
      imgs.push_back(s.tensor());
      ts.push_back(encode_targets(s.annotation, heads));
    }
    std::vector<const Tensor<float>*> ptrs;
    for (const auto& i : imgs) ptrs.push_back(&i);
    x = stack_images<double>(ptrs);
    targets = stack_targets(ts);
  }

  HeadConfig heads;
  std::optional<MCNModel<double>> model;
  Td x;
  EncodedTargets targets;
};

TEST_F(TotalLossTest, TotalMatchesBreakdown) {
  const auto r = total_loss(model->forward(x, Mode::kEval), targets, LossWeights{}, TaskSet::all());
  EXPECT_TRUE(r.breakdown.det_active && r.breakdown.seg_active && r.breakdown.pose_active);
  EXPECT_NEAR(r.total.item(), compose_total(r.breakdown, LossWeights{}),
              1e-12 * std::abs(r.total.item()));
  EXPECT_DOUBLE_EQ(r.breakdown.total, r.total.item());
}

TEST_F(TotalLossTest, InactiveTermsAreZero) {
  const auto r = total_loss(model->forward(x, Mode::kEval), targets, LossWeights{},
                            TaskSet{Task::kDetection, Task::kSegmentation});
  EXPECT_FALSE(r.breakdown.pose_active);
  EXPECT_EQ(r.breakdown.keyp, 0.0);
  EXPECT_EQ(r.breakdown.keyp_off, 0.0);
  EXPECT_GT(r.breakdown.seg, 0.0);
}

TEST_F(TotalLossTest, MissingOutputThrows) {
  const auto out = model->forward(x, Mode::kEval, TaskSet{Task::kDetection});
  EXPECT_THROW(total_loss(out, targets, LossWeights{}, TaskSet::all()), InvalidArgument);
}

}  // namespace
}  // namespace mcn
