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

#include "mcn/metrics.hpp"

namespace mcn {
namespace {

Detection det(int cls, double score, Box b) {
  Detection d;
  d.cls = cls;
  d.score = score;
  d.box = b;
  return d;
}

TEST(BoxIou, Frozen) {
  EXPECT_NEAR(box_iou({1, 1, 2, 2}, {2, 1, 2, 2}), 1.0 / 3, 1e-12);
  EXPECT_DOUBLE_EQ(box_iou({0, 0, 2, 2}, {10, 10, 2, 2}), 0.0);
  EXPECT_DOUBLE_EQ(box_iou({0, 0, 0, 0}, {0, 0, 0, 0}), 0.0);
}

TEST(AveragePrecision, PerfectAndHalf) {
  EXPECT_DOUBLE_EQ(average_precision({det(0, 0.9, {5, 5, 4, 4})}, {Box{5, 5, 4, 4}}, 0.5), 1.0);
  EXPECT_DOUBLE_EQ(
      average_precision({det(0, 0.9, {5, 5, 4, 4})}, {Box{5, 5, 4, 4}, Box{20, 20, 4, 4}}, 0.5),
      0.5);
}

TEST(AveragePrecision, FalsePositiveRankedFirst) {
  // Ranks: FP then TP -> precision at recall 1 is 0.5.
  const std::vector<Detection> preds{det(0, 0.9, {30, 30, 4, 4}), det(0, 0.8, {5, 5, 4, 4})};
  EXPECT_DOUBLE_EQ(average_precision(preds, {Box{5, 5, 4, 4}}, 0.5), 0.5);
}

TEST(AveragePrecision, DuplicateIsFalsePositive) {
  const std::vector<Detection> preds{det(0, 0.9, {5, 5, 4, 4}), det(0, 0.8, {5, 5, 4, 4})};
  std::vector<ImageDetections> images(1);
  images[0].preds = preds;
  images[0].gts = {{0, Box{5, 5, 4, 4}}};
  MatchCounts c;
  EXPECT_DOUBLE_EQ(*average_precision(images, 0, 0.5, &c), 1.0);
  EXPECT_EQ(c.tp, 1);
  EXPECT_EQ(c.fp, 1);
  EXPECT_EQ(c.fn, 0);
}

TEST(AveragePrecision, ClassWithoutGroundTruthIsAbsent) {
  std::vector<ImageDetections> images(1);
  images[0].preds = {det(1, 0.9, {5, 5, 4, 4})};
  EXPECT_FALSE(average_precision(images, 1, 0.5).has_value());
}

TEST(MeanAp, AveragesPresentClasses) {
  std::vector<ImageDetections> images(1);
  images[0].gts = {{0, Box{5, 5, 4, 4}}, {2, Box{20, 20, 4, 4}}};
  images[0].preds = {det(0, 0.9, {5, 5, 4, 4})};
  const auto m = mean_ap(images, 3);
  EXPECT_DOUBLE_EQ(m.map50, 0.5);
  EXPECT_DOUBLE_EQ(m.map, 0.5);
  EXPECT_FALSE(m.per_class_ap[1].has_value());
  EXPECT_EQ(m.counts.size(), 10u);
}

TEST(CocoThresholds, TenSteps) {
  const auto t = coco_iou_thresholds();
  ASSERT_EQ(t.size(), 10u);
  EXPECT_DOUBLE_EQ(t.front(), 0.5);
  EXPECT_NEAR(t.back(), 0.95, 1e-12);
}

TEST(SegMiou, Frozen) {
  const std::vector<std::uint16_t> pred{0, 0, 0, 0}, gt{0, 0, 1, 1};
  EXPECT_DOUBLE_EQ(seg_miou(pred, gt, 2), 0.25);
  EXPECT_DOUBLE_EQ(seg_miou(gt, gt, 2), 1.0);
}

TEST(SegConfusion, AbsentLabelsSkipped) {
  SegConfusion c(4);
  const std::vector<std::uint16_t> a{0, 1, 1, 0};
  c.add(a, a);
  const auto per = c.per_label_iou();
  EXPECT_TRUE(per[1].has_value());
  EXPECT_FALSE(per[3].has_value());
  EXPECT_DOUBLE_EQ(*c.miou(), 1.0);
  EXPECT_FALSE(SegConfusion(3).miou().has_value());
}

TEST(Pose, PckCountsVisibleJointsWithinRadius) {
  PersonGroundTruth gt;
  gt.box = {10, 10, 10, 10};  // sqrt(area) = 10, radius 2 at alpha 0.2
  gt.keypoints = {{5, 5, true}, {15, 15, true}, {0, 0, false}};
  PoseInstance p;
  p.person = det(0, 0.9, gt.box);
  p.joints = {{6.5, 5, 1}, {15, 18, 1}, {50, 50, 1}};
  EXPECT_DOUBLE_EQ(pose_pck({p}, {gt}), 0.5);
}

TEST(Pose, UnmatchedPersonScoresZero) {
  PersonGroundTruth gt;
  gt.box = {10, 10, 10, 10};
  gt.keypoints = {{5, 5, true}};
  PoseInstance far;
  far.person = det(0, 0.9, {40, 40, 10, 10});
  far.joints = {{5, 5, 1}};
  PoseAccumulator acc;
  acc.add({far}, {gt});
  EXPECT_DOUBLE_EQ(*acc.pck(), 0.0);
  EXPECT_EQ(acc.visible(), 1);
}

TEST(Pose, OksIsOneForExactJoints) {
  PersonGroundTruth gt;
  gt.box = {10, 10, 10, 10};
  gt.keypoints = {{5, 5, true}, {12, 8, true}};
  PoseInstance p;
  p.person = det(0, 0.9, gt.box);
  p.joints = {{5, 5, 1}, {12, 8, 1}};
  PoseAccumulator acc;
  acc.add({p}, {gt});
  EXPECT_DOUBLE_EQ(*acc.oks(), 1.0);
}

TEST(Report, NullForAbsentTasks) {
  MetricReport r;
  r.seg_miou = 0.5;
  const auto j = report_to_json(r);
  EXPECT_TRUE(j.at("det_map").is_null());
  EXPECT_DOUBLE_EQ(j.at("seg_miou").get<double>(), 0.5);
  EXPECT_NE(format_report(r).find("mIoU"), std::string::npos);
}

}  // namespace
}  // namespace mcn
