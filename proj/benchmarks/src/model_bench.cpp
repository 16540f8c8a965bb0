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

#include <benchmark/benchmark.h>

#include "mcn/bench.hpp"
#include "mcn/net.hpp"

namespace {

// Forward latency at 256x256 with the default configuration. Arg 0 is the
// shared multi-task model; 1..3 are the det, seg and pose single-task nets.
void BM_Forward(benchmark::State& state) {
  const mcn::BackboneConfig bb;
  const mcn::HeadConfig hc;
  const int which = static_cast<int>(state.range(0));
  auto model = which == 0 ? mcn::build_model<float>(bb, hc, 0)
                          : mcn::build_single_task_network<float>(
                                bb, hc, static_cast<mcn::Task>(which - 1), 0);
  state.SetLabel(which == 0 ? "mcn" : "stn " + std::string(mcn::task_name(static_cast<mcn::Task>(which - 1))));
  mcn::NoGradGuard no_grad;
  const mcn::Tensor<float> x({1, 3, 256, 256}, 0.5f);
  for (auto _ : state) {
    auto out = model.forward(x, mcn::Mode::kEval);
    benchmark::DoNotOptimize(out.center_heatmap.data().data());
  }
}
BENCHMARK(BM_Forward)->DenseRange(0, 3)->Unit(benchmark::kMillisecond)->MinTime(1.0);

}  // namespace
