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

#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "kernels.hpp"
#include "mcn/ops.hpp"

namespace {

std::vector<float> random_values(std::size_t n, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<float> d;
  std::vector<float> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

void BM_GemmNN(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto a = random_values(static_cast<std::size_t>(n) * n, 1);
  const auto b = random_values(static_cast<std::size_t>(n) * n, 2);
  std::vector<float> c(static_cast<std::size_t>(n) * n);
  for (auto _ : state) {
    mcn::kernels::gemm_nn(n, n, n, a.data(), b.data(), c.data());
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * 2 * static_cast<std::int64_t>(n) * n * n);
}
BENCHMARK(BM_GemmNN)->Arg(64)->Arg(128)->Arg(256);

mcn::Tensor<float> random_tensor(mcn::Shape shape, unsigned seed, bool grad = false) {
  std::size_t n = 1;
  for (auto d : shape) n *= static_cast<std::size_t>(d);
  return mcn::Tensor<float>(std::move(shape), random_values(n, seed), grad);
}

// Args: channels, spatial size, kernel, stride.
void BM_Conv2dForward(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0)), s = static_cast<int>(state.range(1));
  const int k = static_cast<int>(state.range(2)), stride = static_cast<int>(state.range(3));
  mcn::NoGradGuard no_grad;
  const auto x = random_tensor({1, c, s, s}, 3);
  const auto w = random_tensor({c, c, k, k}, 4);
  const mcn::Tensor<float> bias({c}, 0.0f);
  for (auto _ : state) {
    auto y = mcn::ops::conv2d(x, w, bias, stride, k / 2);
    benchmark::DoNotOptimize(y.data().data());
  }
}
BENCHMARK(BM_Conv2dForward)
    ->Args({16, 64, 3, 1})
    ->Args({32, 64, 3, 2})
    ->Args({64, 32, 3, 1})
    ->Args({64, 32, 1, 1})
    ->Unit(benchmark::kMicrosecond);

void BM_Conv2dBackward(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0)), s = static_cast<int>(state.range(1));
  const auto x = random_tensor({1, c, s, s}, 5, true);
  const auto w = random_tensor({c, c, 3, 3}, 6, true);
  const mcn::Tensor<float> bias({c}, 0.0f, true);
  for (auto _ : state) {
    auto loss = mcn::ops::sum(mcn::ops::conv2d(x, w, bias, 1, 1));
    loss.backward();
  }
}
BENCHMARK(BM_Conv2dBackward)->Args({16, 64})->Args({64, 32})->Unit(benchmark::kMicrosecond);

}  // namespace
