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
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mcn/codec.hpp"
#include "mcn/losses.hpp"
#include "mcn/metrics.hpp"
#include "mcn/net.hpp"
#include "mcn/synth.hpp"

namespace mcn {

enum class OptimizerKind { kSgd, kAdam };

struct TrainConfig {
  int steps = 200;
  int batch_size = 4;
  double learning_rate = 1e-3;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  LossWeights weights;
  int eval_interval = 0;  // 0 disables periodic evaluation
  std::uint64_t seed = 0;
  TaskSet active = TaskSet::all();
  bool flip = false;  // random horizontal flips

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

// Images with annotations adapted to one HeadConfig (single-class mode
// drops every non-person object).
struct TrainingData {
  std::vector<Tensor<float>> images;  // [3,H,W]
  std::vector<SceneAnnotation> annotations;
};

TrainingData make_training_data(const std::vector<Scene>& scenes, const HeadConfig& heads);
TrainingData make_training_data(const LoadedDataset& data, const HeadConfig& heads);

struct StepRecord {
  int step = 0;  // 1-based
  LossBreakdown loss;
  double lr = 0;
};

// {"step", "loss": {...}, "lr"}
nlohmann::json step_to_json(const StepRecord& r);

struct TrainLog {
  std::vector<StepRecord> steps;
  std::vector<std::pair<int, MetricReport>> evals;
};

struct EvalConfig {
  DecodeParams decode;
  std::vector<double> iou_thresholds = coco_iou_thresholds();
  double pck_alpha = kPckAlpha;
  int batch_size = 4;
  // Restricts evaluation to these tasks (default: every model task).
  std::optional<TaskSet> tasks;
};

struct TrainCallbacks {
  std::function<void(const StepRecord&)> on_step;
  std::function<void(int step, const MetricReport&)> on_eval;
};

// Throws TrainingError naming the step and loss term on a non-finite loss.
template <typename T>
TrainLog train(MCNModel<T>& model, const TrainingData& data, const TrainConfig& cfg,
               const TrainCallbacks& callbacks = {}, const EvalConfig& eval = {});

// Eval mode, no tape, no parameter or buffer mutation.
template <typename T>
MetricReport evaluate(MCNModel<T>& model, const TrainingData& data, const EvalConfig& cfg = {});

// Decoded outputs of one image.
struct ImageResult {
  std::vector<Detection> detections;
  std::vector<PoseInstance> poses;
  std::vector<std::uint16_t> seg;  // seg_resolution^2 ids, empty without seg
  int seg_resolution = 0;
};

template <typename T>
std::vector<ImageResult> predict(MCNModel<T>& model, const std::vector<Tensor<float>>& images,
                                 const DecodeParams& params = {}, int batch_size = 4);

}  // namespace mcn
