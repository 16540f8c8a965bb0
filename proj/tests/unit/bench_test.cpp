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

#include <gtest/gtest.h>

#include "mcn/bench.hpp"

namespace mcn {
namespace {

TEST(Latency, QuartilesInterpolate) {
  const auto s = summarize_latency({4, 1, 3, 2, 5});
  EXPECT_DOUBLE_EQ(s.median_ms, 3);
  EXPECT_DOUBLE_EQ(s.q1_ms, 2);
  EXPECT_DOUBLE_EQ(s.q3_ms, 4);
  EXPECT_DOUBLE_EQ(s.iqr_ms, 2);
  EXPECT_DOUBLE_EQ(s.fps, 1000.0 / 3);
  EXPECT_EQ(s.samples_ms.front(), 4);
  EXPECT_DOUBLE_EQ(summarize_latency({1, 2}).median_ms, 1.5);
  EXPECT_THROW(summarize_latency({}), InvalidArgument);
}

TEST(BenchParams, RepeatsBelowFiveRejected) {
  BenchParams p;
  p.repeats = 4;
  EXPECT_THROW(p.validate(), ConfigError);
}

BackboneConfig tiny() {
  BackboneConfig b;
  b.stage_widths = {4, 4, 8, 8};
  return b;
}

TEST(Compare, SingleTaskRatiosAreOne) {
  HeadConfig h;
  h.tasks = {Task::kDetection};
  h.head_width = 4;
  BenchParams p;
  p.repeats = 5;
  p.warmup = 1;
  const auto r = compare_mcn_vs_stn(tiny(), h, {1, 3, 32, 32}, p);
  EXPECT_EQ(r.latency_ratio, 1.0);
  EXPECT_EQ(r.param_ratio, 1.0);
  EXPECT_NE(format_bench_table(r).find("1.000"), std::string::npos);
}

TEST(Compare, CompositeSumsSingleTaskNetworks) {
  HeadConfig h;
  h.head_width = 4;
  h.seg_resolution = 32;
  BenchParams p;
  p.repeats = 5;
  p.warmup = 1;
  const auto r = compare_mcn_vs_stn(tiny(), h, {1, 3, 32, 32}, p);
  ASSERT_EQ(r.stns.size(), 3u);
  std::int64_t params = 0;
  double ms = 0;
  for (const auto& e : r.stns) {
    params += e.params;
    ms += e.latency.median_ms;
  }
  EXPECT_EQ(params, r.stn_params);
  EXPECT_DOUBLE_EQ(ms, r.stn_latency_ms);
  EXPECT_LT(r.param_ratio, 1.0);

  const auto j = bench_to_json(r);
  EXPECT_NEAR(j["mcn"]["fps"].get<double>(), 1000.0 / j["mcn"]["median_ms"].get<double>(), 1e-9);
  const std::string table = format_bench_table(r);
  EXPECT_LT(table.find("configuration"), table.find("ms"));
  EXPECT_LT(table.find("fps"), table.find("params"));
}

}  // namespace
}  // namespace mcn
