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

#include <nlohmann/json.hpp>

#include "mcn/net.hpp"

namespace mcn {

struct LatencyStats {
  std::vector<double> samples_ms;  // in measurement order
  double median_ms = 0;
  double q1_ms = 0, q3_ms = 0, iqr_ms = 0;
  double fps = 0;  // 1000 / median_ms
};

// Median and quartiles (linear interpolation between order statistics).
LatencyStats summarize_latency(std::vector<double> samples_ms);

struct BenchParams {
  int warmup = 3;
  int repeats = 30;
  int threads = 1;
  std::uint64_t seed = 0;

  void validate() const;  // repeats >= 5, warmup >= 1, threads >= 1
};

// Times eval-mode forward passes on a fixed random input of `input_shape`
// ([N,3,H,W]); warmup passes are not recorded.
template <typename T>
LatencyStats measure_forward(MCNModel<T>& model, const Shape& input_shape, const BenchParams& params);

struct BenchEntry {
  std::string name;
  TaskSet tasks;
  LatencyStats latency;
  std::int64_t params = 0;
};

struct BenchReport {
  BackboneConfig backbone;
  HeadConfig heads;
  Shape input;
  BenchEntry mcn;
  std::vector<BenchEntry> stns;
  double stn_latency_ms = 0;  // sum of STN medians
  std::int64_t stn_params = 0;
  double latency_ratio = 0;  // mcn / stn composite
  double param_ratio = 0;
  int threads = 1;
  std::string precision = "float32";
};

// One MCN with every task in `heads.tasks` against one single-task network
// per task, all on `backbone`. For a single task the STN is the MCN itself
// and is measured once, so both ratios are exactly 1.
BenchReport compare_mcn_vs_stn(const BackboneConfig& backbone, const HeadConfig& heads,
                               const Shape& input, const BenchParams& params);

nlohmann::json bench_to_json(const BenchReport& r);

// Columns: configuration, ms, fps, params; then the two ratio lines.
std::string format_bench_table(const BenchReport& r);

}  // namespace mcn
