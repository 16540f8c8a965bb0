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

#include "mcn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "mcn/error.hpp"

namespace mcn {

double box_iou(const Box& a, const Box& b) {
  const double iw = std::min(a.x1(), b.x1()) - std::max(a.x0(), b.x0());
  const double ih = std::min(a.y1(), b.y1()) - std::max(a.y0(), b.y0());
  const double inter = (iw > 0 && ih > 0) ? iw * ih : 0.0;
  const double uni = a.area() + b.area() - inter;
  return uni > 0 ? inter / uni : 0.0;
}

namespace {

struct Ranked {
  double score;
  std::size_t image;
  const Box* box;
};

// All-point interpolation over the ranked TP/FP sequence.
double area_under_pr(const std::vector<bool>& is_tp, std::int64_t num_gt) {
  const std::size_t n = is_tp.size();
  std::vector<double> precision(n), recall(n);
  std::int64_t tp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    tp += is_tp[i];
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
    recall[i] = static_cast<double>(tp) / static_cast<double>(num_gt);
  }
  for (std::size_t i = n; i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);
  double ap = 0, prev_recall = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (recall[i] > prev_recall) {
      ap += (recall[i] - prev_recall) * precision[i];
      prev_recall = recall[i];
    }
  }
  return ap;
}

// Greedy matching of score-ranked predictions against per-image gt boxes.
std::vector<bool> match_ranked(const std::vector<Ranked>& ranked,
                               const std::vector<std::vector<const Box*>>& gts,
                               double iou_threshold) {
  std::vector<std::vector<bool>> used(gts.size());
  for (std::size_t i = 0; i < gts.size(); ++i) used[i].assign(gts[i].size(), false);
  std::vector<bool> is_tp;
  is_tp.reserve(ranked.size());
  for (const auto& r : ranked) {
    int best = -1;
    double best_iou = iou_threshold;
    const auto& cands = gts[r.image];
    for (std::size_t g = 0; g < cands.size(); ++g) {
      if (used[r.image][g]) continue;
      const double iou = box_iou(*r.box, *cands[g]);
      if (iou >= best_iou && (best < 0 || iou > best_iou)) {
        best = static_cast<int>(g);
        best_iou = iou;
      }
    }
    if (best >= 0) used[r.image][static_cast<std::size_t>(best)] = true;
    is_tp.push_back(best >= 0);
  }
  return is_tp;
}

}  // namespace

std::optional<double> average_precision(std::span<const ImageDetections> images, int cls,
                                        double iou_threshold, MatchCounts* counts) {
  std::vector<Ranked> ranked;
  std::vector<std::vector<const Box*>> gts(images.size());
  std::int64_t num_gt = 0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    for (const auto& d : images[i].preds) {
      if (d.cls == cls) ranked.push_back({d.score, i, &d.box});
    }
    for (const auto& g : images[i].gts) {
      if (g.cls == cls) gts[i].push_back(&g.box);
    }
    num_gt += static_cast<std::int64_t>(gts[i].size());
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const Ranked& a, const Ranked& b) { return a.score > b.score; });
  const auto is_tp = match_ranked(ranked, gts, iou_threshold);
  const auto tp = std::count(is_tp.begin(), is_tp.end(), true);
  if (counts) {
    counts->iou_threshold = iou_threshold;
    counts->tp += tp;
    counts->fp += static_cast<std::int64_t>(is_tp.size()) - tp;
    counts->fn += num_gt - tp;
  }
  if (num_gt == 0) return std::nullopt;
  return area_under_pr(is_tp, num_gt);
}

double average_precision(const std::vector<Detection>& preds, const std::vector<Box>& gts,
                         double iou_threshold) {
  ImageDetections image;
  image.preds = preds;
  for (auto& p : image.preds) p.cls = 0;
  for (const auto& g : gts) image.gts.push_back({0, g});
  return average_precision(std::span<const ImageDetections>(&image, 1), 0, iou_threshold)
      .value_or(0.0);
}

std::vector<double> coco_iou_thresholds() {
  std::vector<double> t;
  for (int i = 0; i < 10; ++i) t.push_back(0.5 + 0.05 * i);
  return t;
}

DetectionMetrics mean_ap(std::span<const ImageDetections> images, int num_classes,
                         const std::vector<double>& thresholds) {
  if (thresholds.empty()) throw InvalidArgument("mean_ap: no IoU thresholds");
  DetectionMetrics m;
  m.per_class_ap.assign(static_cast<std::size_t>(num_classes), std::nullopt);
  m.counts.resize(thresholds.size());
  double sum = 0, sum50 = 0;
  int present = 0;
  for (int c = 0; c < num_classes; ++c) {
    double class_sum = 0;
    bool has_gt = false;
    for (std::size_t t = 0; t < thresholds.size(); ++t) {
      const auto ap = average_precision(images, c, thresholds[t], &m.counts[t]);
      if (ap) {
        has_gt = true;
        class_sum += *ap;
      }
    }
    if (!has_gt) continue;
    const double class_ap = class_sum / static_cast<double>(thresholds.size());
    m.per_class_ap[static_cast<std::size_t>(c)] = class_ap;
    sum += class_ap;
    sum50 += *average_precision(images, c, 0.5);
    ++present;
  }
  if (present > 0) {
    m.map = sum / present;
    m.map50 = sum50 / present;
  }
  return m;
}

SegConfusion::SegConfusion(int num_labels) : num_labels_(num_labels) {
  if (num_labels < 1) throw InvalidArgument("SegConfusion: need at least one label");
  matrix_.assign(static_cast<std::size_t>(num_labels) * num_labels, 0);
}

void SegConfusion::add(std::span<const std::uint16_t> pred, std::span<const std::uint16_t> gt) {
  if (pred.size() != gt.size()) {
    throw InvalidArgument("SegConfusion: prediction and gt sizes differ");
  }
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] >= num_labels_ || gt[i] >= num_labels_) {
      throw InvalidArgument("SegConfusion: label out of range");
    }
    ++matrix_[static_cast<std::size_t>(gt[i]) * num_labels_ + pred[i]];
  }
}

std::vector<std::optional<double>> SegConfusion::per_label_iou() const {
  const auto n = static_cast<std::size_t>(num_labels_);
  std::vector<std::optional<double>> iou(n);
  for (std::size_t c = 0; c < n; ++c) {
    std::int64_t row = 0, col = 0;
    for (std::size_t k = 0; k < n; ++k) {
      row += matrix_[c * n + k];
      col += matrix_[k * n + c];
    }
    const std::int64_t inter = matrix_[c * n + c];
    const std::int64_t uni = row + col - inter;
    if (uni > 0) iou[c] = static_cast<double>(inter) / static_cast<double>(uni);
  }
  return iou;
}

std::optional<double> SegConfusion::miou() const {
  double sum = 0;
  int present = 0;
  for (const auto& v : per_label_iou()) {
    if (v) {
      sum += *v;
      ++present;
    }
  }
  if (present == 0) return std::nullopt;
  return sum / present;
}

double seg_miou(std::span<const std::uint16_t> pred, std::span<const std::uint16_t> gt,
                int num_labels) {
  SegConfusion conf(num_labels);
  conf.add(pred, gt);
  return conf.miou().value_or(0.0);
}

std::vector<PersonGroundTruth> persons_of(const SceneAnnotation& ann) {
  std::vector<PersonGroundTruth> out;
  for (const auto& p : ann.persons) {
    out.push_back({ann.boxes.at(static_cast<std::size_t>(p.box_index)).box, p.keypoints});
  }
  return out;
}

void PoseAccumulator::add(const std::vector<PoseInstance>& preds,
                          const std::vector<PersonGroundTruth>& gts) {
  std::vector<std::size_t> order(preds.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return preds[a].person.score > preds[b].person.score;
  });
  std::vector<const PoseInstance*> matched(gts.size(), nullptr);
  for (std::size_t i : order) {
    int best = -1;
    double best_iou = 0.5;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (matched[g]) continue;
      const double iou = box_iou(preds[i].person.box, gts[g].box);
      if (iou >= best_iou && (best < 0 || iou > best_iou)) {
        best = static_cast<int>(g);
        best_iou = iou;
      }
    }
    if (best >= 0) matched[static_cast<std::size_t>(best)] = &preds[i];
  }
  for (std::size_t g = 0; g < gts.size(); ++g) {
    const auto& gt = gts[g];
    const double scale = std::sqrt(gt.box.area());
    const double tol = alpha_ * scale;
    double oks = 0;
    int vis = 0;
    for (std::size_t k = 0; k < gt.keypoints.size(); ++k) {
      const auto& kp = gt.keypoints[k];
      if (!kp.visible) continue;
      ++vis;
      if (!matched[g] || k >= matched[g]->joints.size()) continue;
      const auto& j = matched[g]->joints[k];
      const double d2 = (j.x - kp.x) * (j.x - kp.x) + (j.y - kp.y) * (j.y - kp.y);
      if (std::sqrt(d2) <= tol) ++correct_;
      oks += std::exp(-d2 / (2 * gt.box.area() * kUniformOksSigma * kUniformOksSigma * 4));
    }
    visible_ += vis;
    if (vis > 0) {
      oks_sum_ += oks / vis;
      ++oks_count_;
    }
  }
}

std::optional<double> PoseAccumulator::pck() const {
  if (visible_ == 0) return std::nullopt;
  return static_cast<double>(correct_) / static_cast<double>(visible_);
}

std::optional<double> PoseAccumulator::oks() const {
  if (oks_count_ == 0) return std::nullopt;
  return oks_sum_ / static_cast<double>(oks_count_);
}

double pose_pck(const std::vector<PoseInstance>& preds, const std::vector<PersonGroundTruth>& gts,
                double alpha) {
  PoseAccumulator acc(alpha);
  acc.add(preds, gts);
  return acc.pck().value_or(0.0);
}

namespace {

nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

nlohmann::json optional_list(const std::vector<std::optional<double>>& values) {
  auto arr = nlohmann::json::array();
  for (const auto& v : values) arr.push_back(optional_json(v));
  return arr;
}

}  // namespace

nlohmann::json report_to_json(const MetricReport& r) {
  nlohmann::json j;
  j["images"] = r.images;
  j["det_map"] = optional_json(r.det_map);
  j["det_map50"] = optional_json(r.det_map50);
  j["seg_miou"] = optional_json(r.seg_miou);
  j["pose_pck"] = optional_json(r.pose_pck);
  j["pose_oks"] = optional_json(r.pose_oks);
  j["per_class_ap"] = optional_list(r.per_class_ap);
  j["per_label_iou"] = optional_list(r.per_label_iou);
  auto counts = nlohmann::json::array();
  for (const auto& c : r.det_counts) {
    counts.push_back({{"iou", c.iou_threshold}, {"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}});
  }
  j["det_counts"] = counts;
  return j;
}

std::string format_report(const MetricReport& r) {
  std::string out;
  char line[96];
  auto row = [&](const char* task, const char* metric, const std::optional<double>& v) {
    if (v) {
      std::snprintf(line, sizeof line, "%-6s %-12s %8.4f\n", task, metric, *v);
    } else {
      std::snprintf(line, sizeof line, "%-6s %-12s %8s\n", task, metric, "n/a");
    }
    out += line;
  };
  std::snprintf(line, sizeof line, "%-6s %-12s %8s\n", "task", "metric", "value");
  out += line;
  row("seg", "mIoU", r.seg_miou);
  row("det", "mAP", r.det_map);
  row("det", "mAP@0.5", r.det_map50);
  row("pose", "PCK@0.2", r.pose_pck);
  return out;
}

}  // namespace mcn
