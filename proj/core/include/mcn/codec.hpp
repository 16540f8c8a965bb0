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
#include <span>
#include <vector>

#include "mcn/net.hpp"

namespace mcn {

// Axis-aligned box in input pixels, described by its center and extent.
struct Box {
  double cx = 0, cy = 0, w = 0, h = 0;

  double x0() const { return cx - w / 2; }
  double y0() const { return cy - h / 2; }
  double x1() const { return cx + w / 2; }
  double y1() const { return cy + h / 2; }
  double area() const { return w * h; }
  bool operator==(const Box&) const = default;
};

struct ObjectAnnotation {
  int cls = 0;  // 0-based; class 0 is the person class
  Box box;
  bool operator==(const ObjectAnnotation&) const = default;
};

struct Keypoint {
  double x = 0, y = 0;
  bool visible = false;
  bool operator==(const Keypoint&) const = default;
};

struct PersonAnnotation {
  int box_index = 0;
  std::vector<Keypoint> keypoints;
  bool operator==(const PersonAnnotation&) const = default;
};

inline constexpr int kPersonClass = 0;

// Ground truth for one image. seg_map holds H*W ids: 0 is background and
// class c is stored as c + 1.
struct SceneAnnotation {
  int height = 0, width = 0;
  std::vector<ObjectAnnotation> boxes;
  std::vector<PersonAnnotation> persons;
  std::vector<std::uint16_t> seg_map;

  bool operator==(const SceneAnnotation&) const = default;
};

// Per-image targets, stacked along a leading batch axis by stack_targets.
// Masks are 1 exactly where the matching regression target is defined.
struct EncodedTargets {
  int batch = 0;
  int num_classes = 0, num_keypoints = 0;
  int feat_h = 0, feat_w = 0, seg_resolution = 0;
  TaskSet tasks;

  std::vector<float> center_gt;              // [N,C,h,w]
  std::vector<float> size_gt;                // [N,2,h,w]
  std::vector<float> offset_gt;              // [N,2,h,w]
  std::vector<float> reg_mask;               // [N,h,w]
  std::vector<float> keypoint_gt;            // [N,K,h,w]
  std::vector<float> keypoint_offset_gt;     // [N,2,h,w]
  std::vector<float> keypoint_offset_mask;   // [N,h,w]
  std::vector<float> joint_regression_gt;    // [N,2K,h,w]
  std::vector<float> joint_regression_mask;  // [N,2K,h,w]
  std::vector<std::uint16_t> seg_gt;         // [N,S,S]

  // Boxes (or keypoints) that landed on an already occupied regression
  // cell. The larger box keeps the cell; for keypoints the first one does.
  int collisions = 0;
};

EncodedTargets stack_targets(std::span<const EncodedTargets> items);

inline constexpr double kMinOverlap = 0.7;

// Gaussian radius (in feature pixels) for a box of the given feature-pixel
// size: max(1, floor(min of the three overlap-case roots)).
int gaussian_radius(double box_h, double box_w, double min_overlap = kMinOverlap);

// Max-combines exp(-(dx^2+dy^2) / (2 sigma^2)), sigma = radius / 3, over the
// (2r+1)^2 patch around (cx, cy) into a row-major [h,w] map.
void render_gaussian(std::span<float> heatmap, int h, int w, int cx, int cy, int radius);

EncodedTargets encode_targets(const SceneAnnotation& ann, const HeadConfig& cfg);

// Float view of one image's head outputs. Absent tasks leave vectors empty.
struct ImagePrediction {
  int feat_h = 0, feat_w = 0, stride = 4;
  int num_classes = 0, num_keypoints = 0, seg_resolution = 0;
  std::vector<float> center, size, offset;
  std::vector<float> keypoint, keypoint_offset, joint_regression;
  std::vector<float> seg;  // [C+1,S,S]
};

template <typename T>
ImagePrediction extract_image(const HeadOutputs<T>& out, int index, int stride);

// Perfect predictions built from image `index` of encoded targets.
ImagePrediction targets_as_prediction(const EncodedTargets& targets, int index, int stride);

struct Detection {
  int cls = 0;
  double score = 0;
  Box box;
  int cell_x = 0, cell_y = 0;
};

struct PoseJoint {
  double x = 0, y = 0, confidence = 0;
};

struct PoseInstance {
  Detection person;
  std::vector<PoseJoint> joints;
};

struct DecodeParams {
  int top_k = 100;
  double score_threshold = 0.3;
  double keypoint_threshold = 0.1;
  double fallback_confidence = 0.1;
  double box_expansion = 1.5;
};

// Local maxima of each [h,w] plane of a [C,h,w] map, as (channel, row, col)
// triples in ascending order.
struct Peak {
  int channel, row, col;
  float score;
};
std::vector<Peak> find_peaks(std::span<const float> maps, int channels, int h, int w);

// Peaks ranked by score (ties: class, row, column ascending), truncated to
// top_k and then thresholded.
std::vector<Detection> decode_detections(const ImagePrediction& pred, const DecodeParams& params);

std::vector<PoseInstance> decode_poses(const ImagePrediction& pred,
                                       const std::vector<Detection>& detections,
                                       const DecodeParams& params);

// Per-pixel argmax over channels; ties go to the lower id.
std::vector<std::uint16_t> decode_segmentation(std::span<const float> seg_softmax, int channels,
                                               int side);

}  // namespace mcn
