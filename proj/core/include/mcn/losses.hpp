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

#include <nlohmann/json.hpp>

#include "mcn/codec.hpp"
#include "mcn/net.hpp"
#include "mcn/tensor.hpp"

namespace mcn {

struct LossWeights {
  double lambda_size = 0.1;
  double lambda_seg = 5.0;
  double lambda_joint = 1.0;  // joint regression inside the keypoint term

  void validate() const;
  bool operator==(const LossWeights&) const = default;
};

void to_json(nlohmann::json& j, const LossWeights& w);
void from_json(const nlohmann::json& j, LossWeights& w);

// Per-term values. Inactive terms are 0 with their flag cleared.
struct LossBreakdown {
  double center = 0, size = 0, off = 0, keyp = 0, keyp_off = 0, seg = 0;
  double total = 0;
  bool det_active = false, pose_active = false, seg_active = false;
};

// center + lambda_size*size + off + keyp + keyp_off + lambda_seg*seg,
// summed left to right.
double compose_total(const LossBreakdown& b, const LossWeights& w);

// {"center", "size", "off", "keyp", "keyp_off", "seg", "total"}
nlohmann::json breakdown_to_json(const LossBreakdown& b);

inline constexpr double kFocalAlpha = 2.0;
inline constexpr double kFocalBeta = 4.0;

// Penalty-reduced focal loss over [N,C,h,w] heatmaps, normalized by the
// number of gt == 1 cells (at least 1). pred is clamped to [eps, 1 - eps].
template <typename T>
Tensor<T> focal_heatmap_loss(const Tensor<T>& pred, const Tensor<T>& gt);

// Sum of |pred - gt| over masked cells, divided by max(1, masked cells).
// mask is [N,h,w] (shared by all D channels) or [N,D,h,w] (per channel, in
// which case the count is sum(mask) / D).
template <typename T>
Tensor<T> masked_l1_loss(const Tensor<T>& pred, const Tensor<T>& gt, const Tensor<T>& mask);

// Mean over pixels of -log(max(p_gt, eps)) for a [N,C+1,S,S] softmax.
template <typename T>
Tensor<T> seg_cross_entropy(const Tensor<T>& seg_softmax, std::span<const std::uint16_t> seg_gt);

template <typename T>
struct LossResult {
  Tensor<T> total;
  LossBreakdown breakdown;
};

// Every task in `active` must be present in both outputs and targets.
template <typename T>
LossResult<T> total_loss(const HeadOutputs<T>& pred, const EncodedTargets& targets,
                         const LossWeights& weights, TaskSet active);

namespace testing {
// Flips the sign of the focal-loss gradient. Used to prove that the
// gradient checks catch a broken backward rule.
void inject_focal_gradient_fault(bool on);
}  // namespace testing

}  // namespace mcn
