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

#include <algorithm>

#include "mcn/codec.hpp"

namespace mcn {
namespace {

HeadConfig heads_for(int size) {
  HeadConfig h;
  h.num_classes = 3;
  h.num_keypoints = 2;
  h.seg_resolution = size;
  return h;
}

SceneAnnotation empty_scene(int size) {
  SceneAnnotation a;
  a.height = a.width = size;
  a.seg_map.assign(static_cast<std::size_t>(size) * size, 0);
  return a;
}

TEST(GaussianRadius, FrozenValues) {
  EXPECT_EQ(gaussian_radius(10, 10), 2);
  EXPECT_EQ(gaussian_radius(1, 1), 1);
  EXPECT_EQ(gaussian_radius(40, 40), 10);
  EXPECT_THROW(gaussian_radius(0, 5), InvalidArgument);
  EXPECT_THROW(gaussian_radius(5, 5, 1.5), InvalidArgument);
}

TEST(RenderGaussian, PeakAndSigma) {
  std::vector<float> map(49, 0.0f);
  render_gaussian(map, 7, 7, 3, 3, 3);
  EXPECT_FLOAT_EQ(map[3 * 7 + 3], 1.0f);
  // sigma = 1, so one cell away is exp(-1/2).
  EXPECT_NEAR(map[3 * 7 + 4], std::exp(-0.5), 1e-6);
  EXPECT_NEAR(map[0], std::exp(-9.0), 1e-6);
}

TEST(RenderGaussian, MaxCombinesAndClipsAtBorder) {
  std::vector<float> map(25, 0.0f);
  render_gaussian(map, 5, 5, 0, 0, 2);
  render_gaussian(map, 5, 5, 1, 0, 2);
  EXPECT_FLOAT_EQ(map[0], 1.0f);
  EXPECT_FLOAT_EQ(map[1], 1.0f);
  EXPECT_LE(*std::max_element(map.begin(), map.end()), 1.0f);
}

TEST(Encode, SingleBoxTargets) {
  SceneAnnotation a = empty_scene(32);
  a.boxes.push_back({1, Box{10, 14, 8, 6}});
  const auto t = encode_targets(a, heads_for(32));
  EXPECT_EQ(t.feat_h, 8);
  EXPECT_EQ(t.feat_w, 8);
  const std::size_t plane = 64, cell = 3 * 8 + 2;
  EXPECT_FLOAT_EQ(t.center_gt[plane * 1 + cell], 1.0f);
  EXPECT_FLOAT_EQ(t.reg_mask[cell], 1.0f);
  EXPECT_FLOAT_EQ(t.size_gt[cell], 2.0f);
  EXPECT_FLOAT_EQ(t.size_gt[plane + cell], 1.5f);
  EXPECT_FLOAT_EQ(t.offset_gt[cell], 0.5f);
  EXPECT_FLOAT_EQ(t.offset_gt[plane + cell], 0.5f);
  EXPECT_EQ(t.collisions, 0);
}

TEST(Encode, SameCellCollisionKeepsLargerBox) {
  SceneAnnotation a = empty_scene(32);
  a.boxes.push_back({1, Box{9, 9, 4, 4}});
  a.boxes.push_back({2, Box{10, 10, 12, 8}});
  const auto t = encode_targets(a, heads_for(32));
  EXPECT_EQ(t.collisions, 1);
  const std::size_t cell = 2 * 8 + 2;
  EXPECT_FLOAT_EQ(t.size_gt[cell], 3.0f);
}

TEST(Encode, RejectsBadInput) {
  SceneAnnotation a = empty_scene(30);
  EXPECT_THROW(encode_targets(a, heads_for(30)), InvalidArgument);
  SceneAnnotation b = empty_scene(32);
  b.boxes.push_back({7, Box{10, 10, 4, 4}});
  EXPECT_THROW(encode_targets(b, heads_for(32)), InvalidArgument);
}

TEST(Encode, PoseTargetsOnlyForVisibleJoints) {
  SceneAnnotation a = empty_scene(32);
  a.boxes.push_back({0, Box{16, 16, 12, 16}});
  a.persons.push_back({0, {Keypoint{14.5, 10.5, true}, Keypoint{20, 20, false}}});
  const auto t = encode_targets(a, heads_for(32));
  const std::size_t plane = 64, center = 4 * 8 + 4, kp = 2 * 8 + 3;
  EXPECT_FLOAT_EQ(t.keypoint_gt[kp], 1.0f);
  EXPECT_FLOAT_EQ(*std::max_element(t.keypoint_gt.begin() + plane, t.keypoint_gt.end()), 0.0f);
  EXPECT_FLOAT_EQ(t.keypoint_offset_mask[kp], 1.0f);
  EXPECT_NEAR(t.keypoint_offset_gt[kp], 14.5 / 4 - 3, 1e-6);
  EXPECT_NEAR(t.joint_regression_gt[center], (14.5 - 16) / 4, 1e-6);
  EXPECT_FLOAT_EQ(t.joint_regression_mask[center], 1.0f);
  EXPECT_FLOAT_EQ(t.joint_regression_mask[2 * plane + center], 0.0f);
}

TEST(Encode, SegNearestNeighbour) {
  SceneAnnotation a = empty_scene(8);
  a.seg_map[0] = 2;
  a.seg_map[7 * 8 + 7] = 3;
  HeadConfig h = heads_for(8);
  h.seg_resolution = 4;
  const auto t = encode_targets(a, h);
  ASSERT_EQ(t.seg_gt.size(), 16u);
  // Source pixel of output (y, x) is (2y + 1, 2x + 1).
  EXPECT_EQ(t.seg_gt[0], 0);
  EXPECT_EQ(t.seg_gt[15], 3);
}

TEST(Stack, ConcatenatesAlongBatch) {
  SceneAnnotation a = empty_scene(16), b = empty_scene(16);
  b.boxes.push_back({0, Box{8, 8, 4, 4}});
  const std::vector<EncodedTargets> items{encode_targets(a, heads_for(16)),
                                          encode_targets(b, heads_for(16))};
  const auto s = stack_targets(items);
  EXPECT_EQ(s.batch, 2);
  EXPECT_EQ(s.center_gt.size(), 2 * items[0].center_gt.size());
  EXPECT_EQ(s.seg_gt.size(), 2u * 16 * 16);
}

TEST(FindPeaks, PlateauCellsAllCount) {
  const std::vector<float> m{0.5f, 0.5f, 0.1f, 0.1f};
  const auto peaks = find_peaks(m, 1, 2, 2);
  ASSERT_EQ(peaks.size(), 2u);
  EXPECT_EQ(peaks[0].col, 0);
  EXPECT_EQ(peaks[1].col, 1);
}

TEST(Decode, RanksTruncatesThenThresholds) {
  ImagePrediction p;
  p.feat_h = 4;
  p.feat_w = 4;
  p.num_classes = 1;
  p.center.assign(16, 0.0f);
  p.size.assign(32, 1.0f);
  p.offset.assign(32, 0.0f);
  p.center[0] = 0.9f;
  p.center[10] = 0.5f;
  p.center[12] = 0.2f;
  DecodeParams params;
  auto d = decode_detections(p, params);
  ASSERT_EQ(d.size(), 2u);
  EXPECT_FLOAT_EQ(static_cast<float>(d[0].score), 0.9f);
  EXPECT_DOUBLE_EQ(d[1].box.cx, 2 * 4);
  EXPECT_DOUBLE_EQ(d[1].box.w, 4);
  params.top_k = 1;
  EXPECT_EQ(decode_detections(p, params).size(), 1u);
  params.top_k = 100;
  params.score_threshold = 0.2;
  EXPECT_EQ(decode_detections(p, params).size(), 3u);
}

TEST(Decode, PoseFallsBackToRegression) {
  SceneAnnotation a = empty_scene(32);
  a.boxes.push_back({0, Box{16, 16, 12, 16}});
  a.persons.push_back({0, {Keypoint{14.5, 10.5, true}, Keypoint{20, 20, false}}});
  const auto t = encode_targets(a, heads_for(32));
  const auto pred = targets_as_prediction(t, 0, 4);
  const auto dets = decode_detections(pred, DecodeParams{});
  const auto poses = decode_poses(pred, dets, DecodeParams{});
  ASSERT_EQ(poses.size(), 1u);
  EXPECT_DOUBLE_EQ(poses[0].joints[0].x, 14.5);
  EXPECT_DOUBLE_EQ(poses[0].joints[0].y, 10.5);
  EXPECT_DOUBLE_EQ(poses[0].joints[1].confidence, 0.1);
}

TEST(Decode, SegmentationTiesGoToLowerId) {
  // [C=2, 2x2]; pixel 0 is a tie.
  const std::vector<float> s{0.5f, 0.2f, 0.9f, 0.1f, 0.5f, 0.8f, 0.1f, 0.9f};
  EXPECT_EQ(decode_segmentation(s, 2, 2), (std::vector<std::uint16_t>{0, 1, 0, 1}));
  EXPECT_THROW(decode_segmentation(s, 3, 2), InvalidArgument);
}

}  // namespace
}  // namespace mcn
