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

#include "selftest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "mcn/hash.hpp"
#include "mcn/image.hpp"
#include "mcn/losses.hpp"
#include "mcn/metrics.hpp"
#include "mcn/net.hpp"
#include "mcn/ops.hpp"

namespace mcn::cli {

namespace {

using Td = Tensor<double>;
using Leaves = std::vector<std::pair<std::string, Td>>;

Td uniform(const Shape& shape, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(static_cast<std::size_t>(shape_numel(shape)));
  for (auto& x : v) x = dist(rng);
  return Td(shape, std::move(v));
}

// Values with |x| >= margin, so kinks at 0 stay out of the difference stencil.
Td away_from_zero(const Shape& shape, std::mt19937_64& rng, double margin) {
  Td t = uniform(shape, rng, margin, 1.0);
  std::bernoulli_distribution sign(0.5);
  for (auto& x : t.mutable_data()) x = sign(rng) ? x : -x;
  return t;
}

// Distinct values spaced 0.05 apart, shuffled, so every max is unique.
Td distinct(const Shape& shape, std::mt19937_64& rng) {
  std::vector<double> v(static_cast<std::size_t>(shape_numel(shape)));
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = 0.05 * static_cast<double>(i);
  std::shuffle(v.begin(), v.end(), rng);
  return Td(shape, std::move(v));
}

CheckResult grad_result(const std::string& op, const ParamGradCheck& r) {
  char detail[160];
  std::snprintf(detail, sizeof detail, "max rel error %.3g at %s", r.max_rel_error,
                r.worst_param.c_str());
  return {"grad." + op, r.max_rel_error <= kGradTolerance, detail};
}

CheckResult check(const std::string& op, const std::function<Td()>& loss, const Leaves& leaves) {
  try {
    return grad_result(op, grad_check_params<double>(loss, leaves));
  } catch (const Error& e) {
    return {"grad." + op, false, e.what()};
  }
}

CheckResult expect_near(const std::string& name, double got, double want, double tol) {
  char detail[128];
  std::snprintf(detail, sizeof detail, "got %.6g, expected %.6g", got, want);
  return {name, std::abs(got - want) <= tol, detail};
}

}  // namespace

std::vector<CheckResult> op_gradient_checks(std::uint64_t seed) {
  std::mt19937_64 rng(mix_seed(seed, 0x6a7d));
  std::vector<CheckResult> out;

  {
    Td x = uniform({2, 3, 5, 5}, rng, -1, 1), w = uniform({4, 3, 3, 3}, rng, -1, 1);
    Td b = uniform({4}, rng, -1, 1);
    const Td r1 = uniform({2, 4, 5, 5}, rng, -1, 1), r2 = uniform({2, 4, 3, 3}, rng, -1, 1);
    out.push_back(check(
        "conv2d",
        [&] {
          return ops::add(ops::sum(ops::mul(ops::conv2d(x, w, b, 1, 1), r1)),
                          ops::sum(ops::mul(ops::conv2d(x, w, b, 2, 1), r2)));
        },
        {{"input", x}, {"weight", w}, {"bias", b}}));
  }
  {
    Td x = uniform({2, 3, 4, 4}, rng, -1, 1), w = uniform({5, 3, 1, 1}, rng, -1, 1);
    const Td r = uniform({2, 5, 4, 4}, rng, -1, 1);
    out.push_back(check(
        "conv2d_1x1", [&] { return ops::sum(ops::mul(ops::conv2d(x, w, Td(), 1, 0), r)); },
        {{"input", x}, {"weight", w}}));
  }
  {
    Td x = away_from_zero({2, 3, 4, 4}, rng, 0.05);
    const Td r = uniform(x.shape(), rng, -1, 1);
    out.push_back(check("relu", [&] { return ops::sum(ops::mul(ops::relu(x), r)); }, {{"x", x}}));
  }
  {
    Td x = uniform({2, 3, 4, 4}, rng, -4, 4);
    const Td r = uniform(x.shape(), rng, -1, 1);
    out.push_back(
        check("sigmoid", [&] { return ops::sum(ops::mul(ops::sigmoid(x), r)); }, {{"x", x}}));
  }
  {
    Td x = uniform({3, 2, 3, 3}, rng, -2, 2), g = uniform({2}, rng, 0.5, 1.5);
    Td b = uniform({2}, rng, -1, 1);
    const Td r = uniform(x.shape(), rng, -1, 1);
    RunningStats<double> stats{Td({2}, 0.0), Td({2}, 1.0)};
    out.push_back(check(
        "batch_norm2d",
        [&] { return ops::sum(ops::mul(ops::batch_norm2d(x, g, b, stats, Mode::kTrain), r)); },
        {{"input", x}, {"gamma", g}, {"beta", b}}));
  }
  {
    Td x = uniform({2, 3, 3, 3}, rng, -2, 2), g = uniform({3}, rng, 0.5, 1.5);
    Td b = uniform({3}, rng, -1, 1);
    const Td r = uniform(x.shape(), rng, -1, 1);
    out.push_back(check(
        "channel_affine", [&] { return ops::sum(ops::mul(ops::channel_affine(x, g, b), r)); },
        {{"input", x}, {"gamma", g}, {"beta", b}}));
  }
  {
    Td x = distinct({1, 2, 5, 5}, rng);
    const Td r = uniform(x.shape(), rng, -1, 1);
    out.push_back(check("max_pool2d_3x3_same",
                        [&] { return ops::sum(ops::mul(ops::max_pool2d_3x3_same(x), r)); },
                        {{"x", x}}));
  }
  {
    Td x = uniform({2, 2, 3, 4}, rng, -1, 1);
    const Td r = uniform({2, 2, 7, 9}, rng, -1, 1);
    out.push_back(check("bilinear_upsample",
                        [&] { return ops::sum(ops::mul(ops::bilinear_upsample(x, 7, 9), r)); },
                        {{"x", x}}));
  }
  {
    Td x = uniform({2, 4, 3, 3}, rng, -2, 2);
    const Td r = uniform(x.shape(), rng, -1, 1);
    out.push_back(check("softmax_channels",
                        [&] { return ops::sum(ops::mul(ops::softmax_channels(x), r)); },
                        {{"x", x}}));
  }
  {
    Td x = uniform({2, 5, 2, 2}, rng, -1, 1);
    const Td r = uniform({2, 2, 2, 2}, rng, -1, 1);
    out.push_back(check("slice_channels",
                        [&] { return ops::sum(ops::mul(ops::slice_channels(x, 2, 2), r)); },
                        {{"x", x}}));
  }
  {
    Td a = uniform({2, 3}, rng, -1, 1), b = uniform({2, 3}, rng, -1, 1);
    const Td r = uniform({2, 3}, rng, -1, 1);
    out.push_back(check("add", [&] { return ops::sum(ops::mul(ops::add(a, b), r)); },
                        {{"a", a}, {"b", b}}));
    out.push_back(check("mul", [&] { return ops::sum(ops::mul(ops::mul(a, b), r)); },
                        {{"a", a}, {"b", b}}));
    out.push_back(check("scale", [&] { return ops::sum(ops::mul(ops::scale(a, 1.7), r)); },
                        {{"a", a}}));
    out.push_back(check("sum", [&] { return ops::scale(ops::sum(a), 0.3); }, {{"a", a}}));
  }
  {
    Td s1 = Td::scalar(0.4), s2 = Td::scalar(-1.3), s3 = Td::scalar(2.2);
    out.push_back(check("weighted_sum",
                        [&] {
                          const Td y = ops::weighted_sum<double>({s1, s2, s3}, {1.0, 0.1, 5.0});
                          return ops::mul(y, y);
                        },
                        {{"t0", s1}, {"t1", s2}, {"t2", s3}}));
  }
  {
    Td pred = uniform({2, 2, 4, 4}, rng, 0.05, 0.95);
    Td gt = uniform(pred.shape(), rng, 0.0, 0.9);
    auto g = gt.mutable_data();
    g[3] = g[21] = g[40] = 1.0;
    out.push_back(check("focal_heatmap_loss", [&] { return focal_heatmap_loss(pred, gt); },
                        {{"pred", pred}}));
  }
  {
    Td pred = uniform({2, 2, 3, 3}, rng, -1, 1);
    Td gt = pred.clone();
    for (auto& v : gt.mutable_data()) v += (v > 0 ? -0.3 : 0.3);
    Td mask({2, 3, 3}, 0.0);
    auto m = mask.mutable_data();
    for (std::size_t i = 0; i < m.size(); i += 2) m[i] = 1.0;
    Td channel_mask({2, 2, 3, 3}, 0.0);
    auto cm = channel_mask.mutable_data();
    for (std::size_t i = 0; i < cm.size(); i += 3) cm[i] = 1.0;
    out.push_back(check("masked_l1_loss",
                        [&] {
                          return ops::add(masked_l1_loss(pred, gt, mask),
                                          masked_l1_loss(pred, gt, channel_mask));
                        },
                        {{"pred", pred}}));
  }
  {
    Td logits = uniform({2, 3, 4, 4}, rng, -2, 2);
    std::vector<std::uint16_t> labels(2 * 16);
    std::uniform_int_distribution<int> label(0, 2);
    for (auto& l : labels) l = static_cast<std::uint16_t>(label(rng));
    out.push_back(check(
        "seg_cross_entropy",
        [&] { return seg_cross_entropy(ops::softmax_channels(logits), std::span(labels)); },
        {{"logits", logits}}));
  }
  return out;
}

ParamGradCheck full_loss_gradient_check(std::uint64_t seed, int elements_per_param) {
  DatasetConfig dc;
  dc.image_size = 16;
  dc.scenes = 2;
  dc.max_objects = 2;
  dc.seed = seed;
  const auto scenes = generate_dataset(dc);

  BackboneConfig bb;
  bb.stage_widths = {4, 4, 8, 8};
  HeadConfig hc;
  hc.seg_resolution = 16;
  hc.head_width = 4;
  auto model = build_model<double>(bb, hc, seed);

  std::vector<Tensor<float>> images;
  std::vector<EncodedTargets> targets;
  for (const auto& s : scenes) {
    images.push_back(s.tensor());
    targets.push_back(encode_targets(s.annotation, hc));
  }
  std::vector<const Tensor<float>*> ptrs;
  for (const auto& im : images) ptrs.push_back(&im);
  const Td x = stack_images<double>(ptrs);
  const EncodedTargets t = stack_targets(targets);

  Leaves leaves;
  for (const auto& p : model.parameters()) leaves.emplace_back(p.name, p.value);
  GradCheckOptions opts;
  opts.max_elements_per_param = elements_per_param;
  opts.scheme = FiniteDifference::kStepLadder;
  return grad_check_params<double>(
      [&] {
        return total_loss(model.forward(x, Mode::kTrain), t, LossWeights{}, TaskSet::all()).total;
      },
      leaves, opts);
}

bool RoundtripStats::exact(double center_tol, double size_tol, double keypoint_tol) const {
  return unmatched == 0 && collisions == 0 && decoded_boxes == gt_boxes &&
         max_center_error <= center_tol && max_size_error <= size_tol &&
         max_keypoint_error <= keypoint_tol;
}

RoundtripStats codec_roundtrip(const DatasetConfig& cfg) {
  HeadConfig hc;
  hc.num_classes = cfg.num_classes;
  hc.num_keypoints = cfg.num_keypoints;
  hc.seg_resolution = cfg.image_size;
  hc.class_mode = cfg.num_classes == 1 ? ClassMode::kSingle : ClassMode::kMulti;
  const int stride = hc.output_stride;

  RoundtripStats st;
  for (int i = 0; i < cfg.scenes; ++i) {
    const SceneAnnotation ann = generate_scene(cfg, i).annotation;
    const EncodedTargets t = encode_targets(ann, hc);
    const ImagePrediction pred = targets_as_prediction(t, 0, stride);
    const auto dets = decode_detections(pred, DecodeParams{});
    const auto poses = decode_poses(pred, dets, DecodeParams{});
    ++st.scenes;
    st.collisions += t.collisions;
    st.gt_boxes += static_cast<int>(ann.boxes.size());
    st.decoded_boxes += static_cast<int>(dets.size());

    auto cell_of = [&](const Box& b) {
      return std::pair{std::clamp(static_cast<int>(std::floor(b.cx / stride)), 0, t.feat_w - 1),
                       std::clamp(static_cast<int>(std::floor(b.cy / stride)), 0, t.feat_h - 1)};
    };
    for (const auto& gt : ann.boxes) {
      const auto [cx, cy] = cell_of(gt.box);
      const auto it = std::find_if(dets.begin(), dets.end(), [&](const Detection& d) {
        return d.cls == gt.cls && d.cell_x == cx && d.cell_y == cy;
      });
      if (it == dets.end()) {
        ++st.unmatched;
        continue;
      }
      st.max_center_error = std::max(
          {st.max_center_error, std::abs(it->box.cx - gt.box.cx), std::abs(it->box.cy - gt.box.cy)});
      st.max_size_error = std::max(
          {st.max_size_error, std::abs(it->box.w - gt.box.w), std::abs(it->box.h - gt.box.h)});
    }
    for (const auto& person : ann.persons) {
      const auto [cx, cy] = cell_of(ann.boxes[static_cast<std::size_t>(person.box_index)].box);
      const auto it = std::find_if(poses.begin(), poses.end(), [&](const PoseInstance& p) {
        return p.person.cell_x == cx && p.person.cell_y == cy;
      });
      for (std::size_t k = 0; k < person.keypoints.size(); ++k) {
        const auto& kp = person.keypoints[k];
        if (!kp.visible) continue;
        ++st.gt_keypoints;
        if (it == poses.end()) {
          st.max_keypoint_error = std::numeric_limits<double>::infinity();
          continue;
        }
        const auto& j = it->joints[k];
        st.max_keypoint_error =
            std::max({st.max_keypoint_error, std::abs(j.x - kp.x), std::abs(j.y - kp.y)});
      }
    }
  }
  return st;
}

std::vector<CheckResult> run_selftest(std::uint64_t seed) {
  std::vector<CheckResult> out = op_gradient_checks(seed);

  try {
    out.push_back(grad_result("total_loss", full_loss_gradient_check(seed, 4)));
  } catch (const Error& e) {
    out.push_back({"grad.total_loss", false, e.what()});
  }

  {
    DatasetConfig cfg;
    cfg.scenes = 20;
    cfg.no_collision = true;
    cfg.seed = seed;
    const RoundtripStats st = codec_roundtrip(cfg);
    char detail[200];
    std::snprintf(detail, sizeof detail,
                  "%d/%d boxes decoded, %d unmatched, center %.3g px, size %.3g px, keypoints %.3g px",
                  st.decoded_boxes, st.gt_boxes, st.unmatched, st.max_center_error,
                  st.max_size_error, st.max_keypoint_error);
    out.push_back({"codec.roundtrip", st.exact(0.5, 1e-4, 0.5), detail});
  }
  out.push_back(expect_near("codec.gaussian_radius", gaussian_radius(10, 10), 2, 0));
  {
    std::vector<float> map(16, 0.0f);
    map[5] = 0.9f;
    map[6] = 0.4f;
    map[15] = 0.7f;
    std::vector<Peak> peaks;
    for (const auto& p : find_peaks(map, 1, 4, 4)) {
      if (p.score > 0) peaks.push_back(p);
    }
    const bool ok = peaks.size() == 2 && peaks[0].row == 1 && peaks[0].col == 1 &&
                    peaks[1].row == 3 && peaks[1].col == 3;
    out.push_back({"codec.find_peaks", ok, std::to_string(peaks.size()) + " positive peaks"});
  }

  out.push_back(expect_near("metrics.box_iou", box_iou({1, 1, 2, 2}, {2, 1, 2, 2}), 1.0 / 3, 1e-12));
  {
    Detection hit;
    hit.score = 0.9;
    hit.box = {10, 10, 4, 4};
    out.push_back(expect_near("metrics.ap_perfect",
                              average_precision({hit}, {Box{10, 10, 4, 4}}, 0.5), 1.0, 1e-12));
    out.push_back(expect_near(
        "metrics.ap_half", average_precision({hit}, {Box{10, 10, 4, 4}, Box{30, 30, 4, 4}}, 0.5),
        0.5, 1e-12));
  }
  {
    const std::vector<std::uint16_t> pred{0, 0, 0, 0}, gt{0, 0, 1, 1};
    out.push_back(expect_near("metrics.seg_miou", seg_miou(pred, gt, 2), 0.25, 1e-12));
  }

  {
    const Td p({1, 1, 1, 1}, std::vector<double>{0.5}), g({1, 1, 1, 1}, std::vector<double>{1.0});
    out.push_back(expect_near("loss.focal", focal_heatmap_loss(p, g).item(),
                              0.25 * std::log(2.0), 1e-9));
    const Td uniform_softmax({1, 5, 1, 1}, 0.2);
    const std::vector<std::uint16_t> label{3};
    out.push_back(expect_near("loss.cross_entropy",
                              seg_cross_entropy(uniform_softmax, std::span(label)).item(),
                              std::log(5.0), 1e-9));
    LossBreakdown b;
    b.center = b.size = b.off = b.keyp = b.keyp_off = b.seg = 1.0;
    out.push_back(expect_near("loss.total", compose_total(b, LossWeights{}), 9.1, 1e-12));
  }
  return out;
}

}  // namespace mcn::cli
