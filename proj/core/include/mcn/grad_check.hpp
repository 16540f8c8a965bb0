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

#include <functional>
#include <string>
#include <vector>

#include "mcn/tensor.hpp"

namespace mcn {

// Central-difference audit of reverse-mode gradients. The error of one
// element is |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
// `max_elements` > 0 checks an evenly strided subset of that many entries.
template <typename T>
double grad_check(const std::function<Tensor<T>(const Tensor<T>&)>& f, const Tensor<T>& x,
                  double eps = 1e-6, int max_elements = -1);

struct ParamGradCheck {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t elements_checked = 0;
};

// Same audit over a set of named leaves that `loss` closes over. The
// tensors are perturbed in place and restored afterwards.
template <typename T>
ParamGradCheck grad_check_params(const std::function<Tensor<T>()>& loss,
                                 const std::vector<std::pair<std::string, Tensor<T>>>& params,
                                 double eps = 1e-6, int max_elements_per_param = -1);

enum class FiniteDifference {
  kCentral,     // one central difference with step eps
  kStepLadder,  // central differences at 1e-3 * 10^(-i/2), i < 7; keeps the
                // smaller step of the adjacent pair that agrees best
};

struct GradCheckOptions {
  double eps = 1e-6;
  int max_elements_per_param = -1;
  FiniteDifference scheme = FiniteDifference::kCentral;
};

template <typename T>
ParamGradCheck grad_check_params(const std::function<Tensor<T>()>& loss,
                                 const std::vector<std::pair<std::string, Tensor<T>>>& params,
                                 const GradCheckOptions& options);

double relative_gradient_error(double analytic, double numeric);

}  // namespace mcn
