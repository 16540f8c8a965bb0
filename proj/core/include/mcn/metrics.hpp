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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mcn/codec.hpp"

namespace mcn {

// Intersection over union; 0 when the union is empty.
double box_iou(const Box& a, const Box& b);

// Detections and ground truth for one image.
struct ImageDetections {
  std::vector<Detection> preds;
  std::vector<ObjectAnnotation> gts;
};

struct MatchCounts {
  double iou_threshold = 0;
  std::int64_t tp = 0, fp = 0, fn = 0;
};

// AP of class `cls` over all images. Predictions are ranked by descending
// score (stable: image order, then input order) and matched greedily to
// the highest-IoU unmatched gt of the same image with IoU >= threshold.
// All-point interpolated area under the PR curve. nullopt when the class
// has no gt.
std::optional<double> average_precision(std::span<const ImageDetections> images, int cls,
                                        double iou_threshold, MatchCounts* counts = nullptr);

// Single-image, class-agnostic convenience form.
double average_precision(const std::vector<Detection>& preds, const std::vector<Box>& gts,
                         double iou_threshold);

std::vector<double> coco_iou_thresholds();  // 0.50, 0.55, ..., 0.95

struct DetectionMetrics {
  double map = 0;    // mean over gt classes and thresholds
  double map50 = 0;  // mean over gt classes at IoU 0.5
  std::vector<std::optional<double>> per_class_ap;  // averaged over thresholds
  std::vector<MatchCounts> counts;                  // per threshold, all classes
};

DetectionMetrics mean_ap(std::span<const ImageDetections> images, int num_classes,
                         const std::vector<double>& thresholds = coco_iou_thresholds());

// Accumulates a label confusion matrix; label 0 is background.
class SegConfusion {
 public:
  explicit SegConfusion(int num_labels);

  void add(std::span<const std::uint16_t> pred, std::span<const std::uint16_t> gt);
  // IoU per label; nullopt for labels absent from both sides.
  std::vector<std::optional<double>> per_label_iou() const;
  // Mean over present labels; nullopt when nothing was added.
  std::optional<double> miou() const;
  int num_labels() const { return num_labels_; }

 private:
  int num_labels_;
  std::vector<std::int64_t> matrix_;  // [gt][pred]
};

double seg_miou(std::span<const std::uint16_t> pred, std::span<const std::uint16_t> gt,
                int num_labels);

struct PersonGroundTruth {
  Box box;
  std::vector<Keypoint> keypoints;
};

std::vector<PersonGroundTruth> persons_of(const SceneAnnotation& ann);

enum class PoseMetricKind { kPck, kOks };

inline constexpr double kPckAlpha = 0.2;
inline constexpr double kUniformOksSigma = 0.1;

// Poses are matched to gt persons through their boxes (greedy by score,
// IoU >= 0.5). A visible gt joint counts as correct when the matched
// prediction lies within alpha * sqrt(gt box area).
class PoseAccumulator {
 public:
  explicit PoseAccumulator(double alpha = kPckAlpha) : alpha_(alpha) {}

  void add(const std::vector<PoseInstance>& preds, const std::vector<PersonGroundTruth>& gts);

  // Correct joints / visible gt joints; nullopt without visible joints.
  std::optional<double> pck() const;
  // Mean object keypoint similarity over gt persons with visible joints,
  // using one sigma for every joint.
  std::optional<double> oks() const;

  std::int64_t visible() const { return visible_; }
  std::int64_t correct() const { return correct_; }

 private:
  double alpha_;
  std::int64_t visible_ = 0, correct_ = 0;
  double oks_sum_ = 0;
  std::int64_t oks_count_ = 0;
};

double pose_pck(const std::vector<PoseInstance>& preds, const std::vector<PersonGroundTruth>& gts,
                double alpha = kPckAlpha);

// Metrics for absent tasks stay nullopt and serialize as null.
struct MetricReport {
  std::optional<double> det_map, det_map50;
  std::optional<double> seg_miou;
  std::optional<double> pose_pck, pose_oks;
  std::vector<std::optional<double>> per_class_ap;
  std::vector<std::optional<double>> per_label_iou;
  std::vector<MatchCounts> det_counts;
  int images = 0;
};

nlohmann::json report_to_json(const MetricReport& r);

// Fixed-width table: task, metric, value.
std::string format_report(const MetricReport& r);

}  // namespace mcn
