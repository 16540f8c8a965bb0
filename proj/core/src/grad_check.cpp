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

#include "mcn/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace mcn {

namespace {

std::vector<std::size_t> pick_indices(std::size_t n, int max_elements) {
  std::vector<std::size_t> idx;
  if (max_elements <= 0 || n <= static_cast<std::size_t>(max_elements)) {
    idx.resize(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    return idx;
  }
  const double stride = static_cast<double>(n) / max_elements;
  for (int i = 0; i < max_elements; ++i) {
    idx.push_back(std::min(n - 1, static_cast<std::size_t>(i * stride)));
  }
  return idx;
}

template <typename T>
double evaluate(const std::function<Tensor<T>()>& f) {
  const Tensor<T> y = f();
  if (y.numel() != 1) throw InvalidArgument("grad_check: function must return a scalar");
  const double v = static_cast<double>(y.item());
  if (!std::isfinite(v)) throw NumericError("grad_check: function value is not finite");
  return v;
}


template <typename T>
double central_difference(const std::function<Tensor<T>()>& loss, T& slot, double h) {
  const T saved = slot;
  slot = saved + static_cast<T>(h);
  const double up = evaluate<T>(loss);
  slot = saved - static_cast<T>(h);
  const double down = evaluate<T>(loss);
  slot = saved;
  return (up - down) / (2.0 * h);
}

template <typename T>
double ladder_difference(const std::function<Tensor<T>()>& loss, T& slot) {
  constexpr int kSteps = 7;
  double d[kSteps];
  for (int i = 0; i < kSteps; ++i) {
    d[i] = central_difference(loss, slot, 1e-3 * std::pow(10.0, -i / 2.0));
  }
  int best = 0;
  for (int i = 1; i + 1 < kSteps; ++i) {
    if (std::abs(d[i] - d[i + 1]) < std::abs(d[best] - d[best + 1])) best = i;
  }
  return d[best + 1];
}

}  // namespace

template <typename T>
ParamGradCheck grad_check_params(const std::function<Tensor<T>()>& loss,
                                 const std::vector<std::pair<std::string, Tensor<T>>>& params,
                                 double eps, int max_elements_per_param) {
  return grad_check_params<T>(loss, params, GradCheckOptions{eps, max_elements_per_param});
}

template <typename T>
ParamGradCheck grad_check_params(const std::function<Tensor<T>()>& loss,
                                 const std::vector<std::pair<std::string, Tensor<T>>>& params,
                                 const GradCheckOptions& options) {
  for (const auto& [name, p] : params) {
    auto t = p;
    t.zero_grad();
    t.set_requires_grad(true);
  }
  {
    const Tensor<T> y = loss();
    if (!std::isfinite(static_cast<double>(y.item()))) {
      throw NumericError("grad_check: function value is not finite");
    }
    y.backward();
  }
  ParamGradCheck result;
  for (const auto& [name, p] : params) {
    Tensor<T> t = p;
    std::vector<T> analytic(t.grad().begin(), t.grad().end());
    if (analytic.empty()) analytic.assign(static_cast<std::size_t>(t.numel()), T(0));
    auto data = t.mutable_data();
    for (std::size_t i : pick_indices(data.size(), options.max_elements_per_param)) {
      const double numeric = options.scheme == FiniteDifference::kStepLadder
                                 ? ladder_difference<T>(loss, data[i])
                                 : central_difference<T>(loss, data[i], options.eps);
      const double err = relative_gradient_error(static_cast<double>(analytic[i]), numeric);
      ++result.elements_checked;
      if (result.worst_param.empty() || err > result.max_rel_error) {
        result.max_rel_error = err;
        result.worst_param = name + "[" + std::to_string(i) + "]";
      }
    }
    t.zero_grad();
  }
  return result;
}

template <typename T>
double grad_check(const std::function<Tensor<T>(const Tensor<T>&)>& f, const Tensor<T>& x,
                  double eps, int max_elements) {
  Tensor<T> leaf = x.clone();
  leaf.set_requires_grad(true);
  std::function<Tensor<T>()> closed = [&] { return f(leaf); };
  return grad_check_params<T>(closed, {{"x", leaf}}, eps, max_elements).max_rel_error;
}

template double grad_check(const std::function<Tensor<float>(const Tensor<float>&)>&,
                           const Tensor<float>&, double, int);
template double grad_check(const std::function<Tensor<double>(const Tensor<double>&)>&,
                           const Tensor<double>&, double, int);
template ParamGradCheck grad_check_params(
    const std::function<Tensor<float>()>&,
    const std::vector<std::pair<std::string, Tensor<float>>>&, double, int);
template ParamGradCheck grad_check_params(
    const std::function<Tensor<double>()>&,
    const std::vector<std::pair<std::string, Tensor<double>>>&, double, int);
template ParamGradCheck grad_check_params(
    const std::function<Tensor<float>()>&,
    const std::vector<std::pair<std::string, Tensor<float>>>&, const GradCheckOptions&);
template ParamGradCheck grad_check_params(
    const std::function<Tensor<double>()>&,
    const std::vector<std::pair<std::string, Tensor<double>>>&, const GradCheckOptions&);

double relative_gradient_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
}

}  // namespace mcn
