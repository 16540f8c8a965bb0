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
#include <string>
#include <vector>

#include "mcn/codec.hpp"
#include "mcn/grad_check.hpp"
#include "mcn/synth.hpp"

namespace mcn::cli {

inline constexpr double kGradTolerance = 1e-3;

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

// One gradient audit per differentiable op and loss, in double precision.
// Names are "grad.<op>".
std::vector<CheckResult> op_gradient_checks(std::uint64_t seed);

// Gradient of the full three-task loss with respect to every parameter of
// a small model on a 16x16 synthetic batch of two images.
ParamGradCheck full_loss_gradient_check(std::uint64_t seed, int elements_per_param);

struct RoundtripStats {
  int scenes = 0;
  int gt_boxes = 0, decoded_boxes = 0;
  int unmatched = 0;  // gt boxes without a same-class decode on their cell
  int collisions = 0;
  double max_center_error = 0;  // input pixels
  double max_size_error = 0;
  int gt_keypoints = 0;
  double max_keypoint_error = 0;

  bool exact(double center_tol, double size_tol, double keypoint_tol) const;
};

// encode -> perfect prediction -> decode over `cfg.scenes` scenes of `cfg`.
RoundtripStats codec_roundtrip(const DatasetConfig& cfg);

// Everything the `selftest` command runs, in order.
std::vector<CheckResult> run_selftest(std::uint64_t seed = 0);

}  // namespace mcn::cli
