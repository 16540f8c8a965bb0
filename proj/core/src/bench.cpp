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

#include "mcn/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <random>

#include "mcn/hash.hpp"

namespace mcn {

namespace {

double quantile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

LatencyStats summarize_latency(std::vector<double> samples_ms) {
  if (samples_ms.empty()) throw InvalidArgument("summarize_latency: no samples");
  LatencyStats s;
  s.samples_ms = samples_ms;
  std::sort(samples_ms.begin(), samples_ms.end());
  s.median_ms = quantile(samples_ms, 0.5);
  s.q1_ms = quantile(samples_ms, 0.25);
  s.q3_ms = quantile(samples_ms, 0.75);
  s.iqr_ms = s.q3_ms - s.q1_ms;
  s.fps = s.median_ms > 0 ? 1000.0 / s.median_ms : 0.0;
  return s;
}

void BenchParams::validate() const {
  if (repeats < 5) throw ConfigError("repeats must be at least 5");
  if (warmup < 1) throw ConfigError("warmup must be at least 1");
  if (threads < 1) throw ConfigError("threads must be at least 1");
}

template <typename T>
LatencyStats measure_forward(MCNModel<T>& model, const Shape& input_shape, const BenchParams& params) {
  params.validate();
  std::mt19937_64 rng(mix_seed(params.seed, 0xbe9c4ULL));
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  std::vector<T> data(static_cast<std::size_t>(shape_numel(input_shape)));
  for (auto& v : data) v = T(dist(rng));
  const Tensor<T> input(input_shape, std::move(data));

  const int previous_threads = num_threads();
  set_num_threads(params.threads);
  NoGradGuard no_grad;
  for (int i = 0; i < params.warmup; ++i) model.forward(input, Mode::kEval);
  std::vector<double> samples;
  samples.reserve(static_cast<std::size_t>(params.repeats));
  for (int i = 0; i < params.repeats; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto out = model.forward(input, Mode::kEval);
    const auto t1 = std::chrono::steady_clock::now();
    samples.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  set_num_threads(previous_threads);
  return summarize_latency(std::move(samples));
}

BenchReport compare_mcn_vs_stn(const BackboneConfig& backbone, const HeadConfig& heads,
                               const Shape& input, const BenchParams& params) {
  params.validate();
  heads.validate();
  if (heads.tasks.empty()) throw InvalidArgument("compare_mcn_vs_stn: empty task set");
  BenchReport r;
  r.backbone = backbone;
  r.heads = heads;
  r.input = input;
  r.threads = params.threads;

  auto mcn = build_model<float>(backbone, heads, params.seed);
  r.mcn.name = "MCN " + heads.tasks.to_string();
  r.mcn.tasks = heads.tasks;
  r.mcn.params = count_params(mcn).total;
  r.mcn.latency = measure_forward(mcn, input, params);

  const auto tasks = heads.tasks.tasks();
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    BenchEntry e;
    e.name = "STN " + std::string(task_name(tasks[i]));
    e.tasks = {tasks[i]};
    if (tasks.size() == 1) {
      e.latency = r.mcn.latency;
      e.params = r.mcn.params;
    } else {
      auto stn = build_single_task_network<float>(backbone, heads, tasks[i],
                                                  mix_seed(params.seed, i + 1));
      e.params = count_params(stn).total;
      e.latency = measure_forward(stn, input, params);
    }
    r.stn_latency_ms += e.latency.median_ms;
    r.stn_params += e.params;
    r.stns.push_back(std::move(e));
  }
  r.latency_ratio = r.mcn.latency.median_ms / r.stn_latency_ms;
  r.param_ratio = static_cast<double>(r.mcn.params) / static_cast<double>(r.stn_params);
  return r;
}

namespace {

nlohmann::json entry_json(const BenchEntry& e) {
  return {{"name", e.name},
          {"tasks", e.tasks.to_string()},
          {"median_ms", e.latency.median_ms},
          {"iqr_ms", e.latency.iqr_ms},
          {"q1_ms", e.latency.q1_ms},
          {"q3_ms", e.latency.q3_ms},
          {"fps", e.latency.fps},
          {"params", e.params},
          {"samples_ms", e.latency.samples_ms}};
}

}  // namespace

nlohmann::json bench_to_json(const BenchReport& r) {
  nlohmann::json j;
  j["backbone"] = r.backbone;
  j["heads"] = r.heads;
  j["input"] = r.input;
  j["mcn"] = entry_json(r.mcn);
  auto stns = nlohmann::json::array();
  for (const auto& e : r.stns) stns.push_back(entry_json(e));
  j["stns"] = stns;
  j["stn_latency_ms"] = r.stn_latency_ms;
  j["stn_params"] = r.stn_params;
  j["latency_ratio"] = r.latency_ratio;
  j["param_ratio"] = r.param_ratio;
  j["environment"] = {{"threads", r.threads}, {"precision", r.precision}};
  return j;
}

std::string format_bench_table(const BenchReport& r) {
  std::string out;
  char line[128];
  std::snprintf(line, sizeof line, "%-22s %10s %10s %12s\n", "configuration", "ms", "fps", "params");
  out += line;
  auto row = [&](const std::string& name, double ms, double fps, std::int64_t params) {
    std::snprintf(line, sizeof line, "%-22s %10.3f %10.1f %12lld\n", name.c_str(), ms, fps,
                  static_cast<long long>(params));
    out += line;
  };
  for (const auto& e : r.stns) row(e.name, e.latency.median_ms, e.latency.fps, e.params);
  row("STN composite", r.stn_latency_ms, r.stn_latency_ms > 0 ? 1000.0 / r.stn_latency_ms : 0.0,
      r.stn_params);
  row(r.mcn.name, r.mcn.latency.median_ms, r.mcn.latency.fps, r.mcn.params);
  std::snprintf(line, sizeof line, "latency ratio (MCN / STN composite): %.3f\n", r.latency_ratio);
  out += line;
  std::snprintf(line, sizeof line, "param ratio   (MCN / STN composite): %.3f\n", r.param_ratio);
  out += line;
  return out;
}

template LatencyStats measure_forward(MCNModel<float>&, const Shape&, const BenchParams&);
template LatencyStats measure_forward(MCNModel<double>&, const Shape&, const BenchParams&);

}  // namespace mcn
