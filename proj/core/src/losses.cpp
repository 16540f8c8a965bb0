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

#include "mcn/losses.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

#include "mcn/ops.hpp"

namespace mcn {

namespace {

std::atomic<bool> g_focal_fault{false};

void require_same_shape(const char* op, const Shape& a, const Shape& b) {
  if (a != b) {
    throw InvalidArgument(std::string(op) + ": shape " + shape_to_string(a) + " vs " +
                          shape_to_string(b));
  }
}

template <typename T>
Tensor<T> target_tensor(const std::vector<float>& values, Shape shape, const char* what) {
  if (static_cast<std::int64_t>(values.size()) != shape_numel(shape)) {
    throw InvalidArgument(std::string("total_loss: target ") + what + " has " +
                          std::to_string(values.size()) + " values, expected shape " +
                          shape_to_string(shape));
  }
  return Tensor<T>(std::move(shape), std::vector<T>(values.begin(), values.end()));
}

}  // namespace

void LossWeights::validate() const {
  if (!(lambda_size >= 0) || !(lambda_seg >= 0) || !(lambda_joint >= 0)) {
    throw ConfigError("loss weights must be non-negative");
  }
}

void to_json(nlohmann::json& j, const LossWeights& w) {
  j = {{"lambda_size", w.lambda_size},
       {"lambda_seg", w.lambda_seg},
       {"lambda_joint", w.lambda_joint}};
}

void from_json(const nlohmann::json& j, LossWeights& w) {
  w = LossWeights{};
  if (j.contains("lambda_size")) j.at("lambda_size").get_to(w.lambda_size);
  if (j.contains("lambda_seg")) j.at("lambda_seg").get_to(w.lambda_seg);
  if (j.contains("lambda_joint")) j.at("lambda_joint").get_to(w.lambda_joint);
  w.validate();
}

double compose_total(const LossBreakdown& b, const LossWeights& w) {
  double total = b.center;
  total += w.lambda_size * b.size;
  total += b.off;
  total += b.keyp;
  total += b.keyp_off;
  total += w.lambda_seg * b.seg;
  return total;
}

nlohmann::json breakdown_to_json(const LossBreakdown& b) {
  return {{"center", b.center}, {"size", b.size}, {"off", b.off},     {"keyp", b.keyp},
          {"keyp_off", b.keyp_off}, {"seg", b.seg}, {"total", b.total}};
}

template <typename T>
Tensor<T> focal_heatmap_loss(const Tensor<T>& pred, const Tensor<T>& gt) {
  require_same_shape("focal_heatmap_loss", pred.shape(), gt.shape());
  const auto p = pred.data();
  const auto g = gt.data();
  const T lo = T(kProbEps), hi = T(1) - T(kProbEps);
  std::int64_t peaks = 0;
  for (T v : g) peaks += (v == T(1));
  const T norm = T(std::max<std::int64_t>(1, peaks));

  T loss = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const T q = std::clamp(p[i], lo, hi);
    if (g[i] == T(1)) {
      loss -= (1 - q) * (1 - q) * std::log(q);
    } else {
      const T w = std::pow(1 - g[i], T(kFocalBeta));
      loss -= w * q * q * std::log(1 - q);
    }
  }
  auto pred_impl = pred.impl();
  auto gt_impl = gt.impl();
  const T sign = g_focal_fault ? T(-1) : T(1);
  return detail::record<T>(
      Shape{}, std::vector<T>{loss / norm}, "focal_heatmap_loss", {pred},
      [pred_impl, gt_impl, norm, lo, hi, sign](const detail::TensorImpl<T>& out) {
        if (!pred_impl->requires_grad) return;
        const T scale = sign * out.grad[0] / norm;
        auto& grad = pred_impl->grad_buffer();
        const auto& p = pred_impl->data;
        const auto& g = gt_impl->data;
        for (std::size_t i = 0; i < p.size(); ++i) {
          if (p[i] < lo || p[i] > hi) continue;
          const T q = p[i];
          T d;
          if (g[i] == T(1)) {
            d = 2 * (1 - q) * std::log(q) - (1 - q) * (1 - q) / q;
          } else {
            const T w = std::pow(1 - g[i], T(kFocalBeta));
            d = -w * (2 * q * std::log(1 - q) - q * q / (1 - q));
          }
          grad[i] += scale * d;
        }
      });
}

template <typename T>
Tensor<T> masked_l1_loss(const Tensor<T>& pred, const Tensor<T>& gt, const Tensor<T>& mask) {
  require_same_shape("masked_l1_loss", pred.shape(), gt.shape());
  if (pred.rank() != 4) {
    throw InvalidArgument("masked_l1_loss: expected [N,D,h,w], got " +
                          shape_to_string(pred.shape()));
  }
  const int n = pred.dim(0), d = pred.dim(1);
  const std::size_t plane = static_cast<std::size_t>(pred.dim(2)) * pred.dim(3);
  const bool per_channel = mask.rank() == 4;
  const Shape shared{n, pred.dim(2), pred.dim(3)};
  if (per_channel) {
    require_same_shape("masked_l1_loss", mask.shape(), pred.shape());
  } else {
    require_same_shape("masked_l1_loss", mask.shape(), shared);
  }
  T count = 0;
  for (T m : mask.data()) count += m;
  if (per_channel) count /= T(d);
  const T norm = std::max(T(1), count);

  auto mask_at = [per_channel, d, plane](std::span<const T> m, int b, int c, std::size_t i) {
    return per_channel ? m[(static_cast<std::size_t>(b) * d + c) * plane + i]
                       : m[static_cast<std::size_t>(b) * plane + i];
  };
  const auto p = pred.data(), g = gt.data(), m = mask.data();
  T loss = 0;
  for (int b = 0; b < n; ++b) {
    for (int c = 0; c < d; ++c) {
      const std::size_t base = (static_cast<std::size_t>(b) * d + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        const T w = mask_at(m, b, c, i);
        if (w != T(0)) loss += w * std::abs(p[base + i] - g[base + i]);
      }
    }
  }
  auto pred_impl = pred.impl();
  auto gt_impl = gt.impl();
  auto mask_impl = mask.impl();
  return detail::record<T>(
      Shape{}, std::vector<T>{loss / norm}, "masked_l1_loss", {pred},
      [pred_impl, gt_impl, mask_impl, norm, n, d, plane, mask_at](const detail::TensorImpl<T>& out) {
        if (!pred_impl->requires_grad) return;
        const T scale = out.grad[0] / norm;
        auto& grad = pred_impl->grad_buffer();
        const auto& p = pred_impl->data;
        const auto& g = gt_impl->data;
        const std::span<const T> m = mask_impl->data;
        for (int b = 0; b < n; ++b) {
          for (int c = 0; c < d; ++c) {
            const std::size_t base = (static_cast<std::size_t>(b) * d + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
              const T w = mask_at(m, b, c, i);
              const T diff = p[base + i] - g[base + i];
              if (w != T(0) && diff != T(0)) grad[base + i] += scale * w * (diff > 0 ? 1 : -1);
            }
          }
        }
      });
}

template <typename T>
Tensor<T> seg_cross_entropy(const Tensor<T>& seg_softmax, std::span<const std::uint16_t> seg_gt) {
  if (seg_softmax.rank() != 4) {
    throw InvalidArgument("seg_cross_entropy: expected [N,C+1,S,S], got " +
                          shape_to_string(seg_softmax.shape()));
  }
  const int n = seg_softmax.dim(0), channels = seg_softmax.dim(1);
  const std::size_t plane = static_cast<std::size_t>(seg_softmax.dim(2)) * seg_softmax.dim(3);
  if (seg_gt.size() != static_cast<std::size_t>(n) * plane) {
    throw InvalidArgument("seg_cross_entropy: gt has " + std::to_string(seg_gt.size()) +
                          " ids for softmax " + shape_to_string(seg_softmax.shape()));
  }
  std::vector<std::size_t> index(seg_gt.size());
  for (std::size_t i = 0; i < seg_gt.size(); ++i) {
    if (seg_gt[i] >= channels) {
      throw InvalidArgument("seg_cross_entropy: id " + std::to_string(seg_gt[i]) +
                            " out of range for " + std::to_string(channels) + " channels");
    }
    const std::size_t b = i / plane;
    index[i] = (b * channels + seg_gt[i]) * plane + i % plane;
  }
  const T eps = T(kProbEps);
  const T count = T(index.size());
  const auto p = seg_softmax.data();
  T loss = 0;
  for (std::size_t idx : index) loss -= std::log(std::max(p[idx], eps));
  auto impl = seg_softmax.impl();
  return detail::record<T>(Shape{}, std::vector<T>{loss / count}, "seg_cross_entropy",
                           {seg_softmax},
                           [impl, index = std::move(index), count, eps](const detail::TensorImpl<T>& out) {
                             if (!impl->requires_grad) return;
                             const T scale = out.grad[0] / count;
                             auto& grad = impl->grad_buffer();
                             for (std::size_t idx : index) {
                               const T q = impl->data[idx];
                               if (q > eps) grad[idx] -= scale / q;
                             }
                           });
}

template <typename T>
LossResult<T> total_loss(const HeadOutputs<T>& pred, const EncodedTargets& targets,
                         const LossWeights& weights, TaskSet active) {
  weights.validate();
  for (Task t : active.tasks()) {
    if (!pred.has(t)) {
      throw InvalidArgument("total_loss: task " + std::string(task_name(t)) +
                            " is active but the model produced no outputs for it");
    }
    if (!targets.tasks.has(t)) {
      throw InvalidArgument("total_loss: task " + std::string(task_name(t)) +
                            " is active but the targets do not encode it");
    }
  }
  const int n = targets.batch, h = targets.feat_h, w = targets.feat_w;
  const int c = targets.num_classes, k = targets.num_keypoints;
  LossResult<T> result;
  LossBreakdown& b = result.breakdown;
  std::vector<Tensor<T>> terms;
  std::vector<T> factors;
  auto push = [&](const Tensor<T>& t, double factor) {
    terms.push_back(t);
    factors.push_back(T(factor));
  };

  if (active.has(Task::kDetection)) {
    b.det_active = true;
    const auto center = focal_heatmap_loss(
        pred.center_heatmap, target_tensor<T>(targets.center_gt, {n, c, h, w}, "center"));
    const auto mask = target_tensor<T>(targets.reg_mask, {n, h, w}, "reg_mask");
    const auto size =
        masked_l1_loss(pred.size_map, target_tensor<T>(targets.size_gt, {n, 2, h, w}, "size"), mask);
    const auto off = masked_l1_loss(
        pred.offset_map, target_tensor<T>(targets.offset_gt, {n, 2, h, w}, "offset"), mask);
    b.center = center.item();
    b.size = size.item();
    b.off = off.item();
    push(center, 1.0);
    push(size, weights.lambda_size);
    push(off, 1.0);
  }
  if (active.has(Task::kPose)) {
    b.pose_active = true;
    const auto heat = focal_heatmap_loss(
        pred.keypoint_heatmap, target_tensor<T>(targets.keypoint_gt, {n, k, h, w}, "keypoint"));
    const auto joints = masked_l1_loss(
        pred.joint_regression,
        target_tensor<T>(targets.joint_regression_gt, {n, 2 * k, h, w}, "joint_regression"),
        target_tensor<T>(targets.joint_regression_mask, {n, 2 * k, h, w}, "joint_mask"));
    const auto keyp = ops::weighted_sum<T>({heat, joints}, {T(1), T(weights.lambda_joint)});
    const auto keyp_off = masked_l1_loss(
        pred.keypoint_offset,
        target_tensor<T>(targets.keypoint_offset_gt, {n, 2, h, w}, "keypoint_offset"),
        target_tensor<T>(targets.keypoint_offset_mask, {n, h, w}, "keypoint_mask"));
    b.keyp = keyp.item();
    b.keyp_off = keyp_off.item();
    push(keyp, 1.0);
    push(keyp_off, 1.0);
  }
  if (active.has(Task::kSegmentation)) {
    b.seg_active = true;
    const auto seg = seg_cross_entropy(pred.seg_softmax, std::span<const std::uint16_t>(targets.seg_gt));
    b.seg = seg.item();
    push(seg, weights.lambda_seg);
  }
  if (terms.empty()) throw InvalidArgument("total_loss: no active tasks");
  result.total = ops::weighted_sum(terms, factors);
  b.total = static_cast<double>(result.total.item());
  return result;
}

namespace testing {
void inject_focal_gradient_fault(bool on) { g_focal_fault = on; }
}  // namespace testing

#define MCN_INSTANTIATE_LOSSES(T)                                                             \
  template Tensor<T> focal_heatmap_loss(const Tensor<T>&, const Tensor<T>&);                  \
  template Tensor<T> masked_l1_loss(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);    \
  template Tensor<T> seg_cross_entropy(const Tensor<T>&, std::span<const std::uint16_t>);     \
  template LossResult<T> total_loss(const HeadOutputs<T>&, const EncodedTargets&,             \
                                    const LossWeights&, TaskSet);

MCN_INSTANTIATE_LOSSES(float)
MCN_INSTANTIATE_LOSSES(double)

#undef MCN_INSTANTIATE_LOSSES

}  // namespace mcn
