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

#include "mcn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "mcn/hash.hpp"
#include "mcn/image.hpp"

namespace mcn {

void TrainConfig::validate() const {
  if (steps < 1) throw ConfigError("steps must be at least 1");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (!(learning_rate >= 0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning_rate must be a finite non-negative number");
  }
  if (eval_interval < 0) throw ConfigError("eval_interval must be non-negative");
  if (active.empty()) throw ConfigError("at least one task must be active");
  weights.validate();
}

namespace {

const char* optimizer_name(OptimizerKind k) { return k == OptimizerKind::kAdam ? "adam" : "sgd"; }

OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "adam") return OptimizerKind::kAdam;
  if (s == "sgd") return OptimizerKind::kSgd;
  throw ConfigError("unknown optimizer '" + s + "' (expected adam or sgd)");
}

}  // namespace

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"steps", c.steps},
       {"batch_size", c.batch_size},
       {"learning_rate", c.learning_rate},
       {"optimizer", optimizer_name(c.optimizer)},
       {"adam_beta1", c.adam_beta1},
       {"adam_beta2", c.adam_beta2},
       {"adam_eps", c.adam_eps},
       {"weights", c.weights},
       {"eval_interval", c.eval_interval},
       {"seed", c.seed},
       {"active", c.active.to_string()},
       {"flip", c.flip}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  c = TrainConfig{};
  auto opt = [&](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  opt("steps", c.steps);
  opt("batch_size", c.batch_size);
  opt("learning_rate", c.learning_rate);
  if (j.contains("optimizer")) c.optimizer = parse_optimizer(j.at("optimizer").get<std::string>());
  opt("adam_beta1", c.adam_beta1);
  opt("adam_beta2", c.adam_beta2);
  opt("adam_eps", c.adam_eps);
  opt("weights", c.weights);
  opt("eval_interval", c.eval_interval);
  opt("seed", c.seed);
  if (j.contains("active")) c.active = TaskSet::parse(j.at("active").get<std::string>());
  opt("flip", c.flip);
  c.validate();
}

namespace {

SceneAnnotation adapt(const SceneAnnotation& ann, const HeadConfig& heads) {
  SceneAnnotation out = heads.class_mode == ClassMode::kSingle ? restrict_to_person(ann) : ann;
  for (const auto& b : out.boxes) {
    if (b.cls >= heads.num_classes) {
      throw ConfigError("annotation class " + std::to_string(b.cls) + " does not fit a model with " +
                        std::to_string(heads.num_classes) + " classes");
    }
  }
  if (heads.tasks.has(Task::kPose)) {
    for (const auto& p : out.persons) {
      if (static_cast<int>(p.keypoints.size()) != heads.num_keypoints) {
        throw ConfigError("annotation has " + std::to_string(p.keypoints.size()) +
                          " keypoints per person, the model expects " +
                          std::to_string(heads.num_keypoints));
      }
    }
  }
  return out;
}

}  // namespace

TrainingData make_training_data(const std::vector<Scene>& scenes, const HeadConfig& heads) {
  TrainingData d;
  for (const auto& s : scenes) {
    d.images.push_back(s.tensor());
    d.annotations.push_back(adapt(s.annotation, heads));
  }
  return d;
}

TrainingData make_training_data(const LoadedDataset& data, const HeadConfig& heads) {
  TrainingData d;
  for (std::size_t i = 0; i < data.images.size(); ++i) {
    d.images.push_back(image_to_tensor(data.images[i]));
    d.annotations.push_back(adapt(data.dataset.entries[i].annotation, heads));
  }
  return d;
}

nlohmann::json step_to_json(const StepRecord& r) {
  return {{"step", r.step}, {"loss", breakdown_to_json(r.loss)}, {"lr", r.lr}};
}

namespace {

Tensor<float> flip_tensor(const Tensor<float>& chw) {
  const int c = chw.dim(0), h = chw.dim(1), w = chw.dim(2);
  std::vector<float> out(chw.data().size());
  const auto in = chw.data();
  for (int ch = 0; ch < c; ++ch) {
    for (int y = 0; y < h; ++y) {
      const std::size_t row = (static_cast<std::size_t>(ch) * h + y) * w;
      for (int x = 0; x < w; ++x) out[row + x] = in[row + (w - 1 - x)];
    }
  }
  return Tensor<float>(chw.shape(), std::move(out));
}

template <typename T>
class Optimizer {
 public:
  Optimizer(const TrainConfig& cfg, std::size_t count) : cfg_(cfg), state_(count) {}

  void step(std::vector<typename MCNModel<T>::Param>& params) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& p = params[i].value;
      if (!p.has_grad()) continue;
      const auto g = p.grad();
      auto w = p.mutable_data();
      const T lr = T(cfg_.learning_rate);
      if (cfg_.optimizer == OptimizerKind::kSgd) {
        for (std::size_t k = 0; k < w.size(); ++k) w[k] -= lr * g[k];
        continue;
      }
      auto& s = state_[i];
      if (s.m.empty()) {
        s.m.assign(w.size(), T(0));
        s.v.assign(w.size(), T(0));
      }
      ++s.t;
      const T b1 = T(cfg_.adam_beta1), b2 = T(cfg_.adam_beta2), eps = T(cfg_.adam_eps);
      const T c1 = T(1) - std::pow(b1, T(s.t));
      const T c2 = T(1) - std::pow(b2, T(s.t));
      for (std::size_t k = 0; k < w.size(); ++k) {
        s.m[k] = b1 * s.m[k] + (1 - b1) * g[k];
        s.v[k] = b2 * s.v[k] + (1 - b2) * g[k] * g[k];
        const T mhat = s.m[k] / c1, vhat = s.v[k] / c2;
        w[k] -= lr * mhat / (std::sqrt(vhat) + eps);
      }
    }
  }

 private:
  struct State {
    std::vector<T> m, v;
    std::int64_t t = 0;
  };
  TrainConfig cfg_;
  std::vector<State> state_;
};

std::string first_non_finite(const LossBreakdown& b) {
  const std::pair<const char*, double> terms[] = {{"center", b.center}, {"size", b.size},
                                                  {"off", b.off},       {"keyp", b.keyp},
                                                  {"keyp_off", b.keyp_off}, {"seg", b.seg}};
  for (const auto& [name, v] : terms) {
    if (!std::isfinite(v)) return name;
  }
  return "total";
}

}  // namespace

template <typename T>
TrainLog train(MCNModel<T>& model, const TrainingData& data, const TrainConfig& cfg,
               const TrainCallbacks& callbacks, const EvalConfig& eval) {
  cfg.validate();
  if (data.images.empty()) throw InvalidArgument("train: empty dataset");
  const HeadConfig& heads = model.head_config();
  const TaskSet active = cfg.active.intersect(heads.tasks);
  if (active.empty()) throw ConfigError("train: none of the active tasks exist in the model");
  if (active.has(Task::kPose) && !active.has(Task::kDetection)) {
    throw ConfigError("pose requires detection: pose heads are always paired with detection");
  }

  // Targets are encoded once per (scene, flip) pair.
  const int n = static_cast<int>(data.images.size());
  std::vector<EncodedTargets> encoded[2];
  std::vector<Tensor<float>> flipped;
  for (int i = 0; i < n; ++i) {
    encoded[0].push_back(encode_targets(data.annotations[static_cast<std::size_t>(i)], heads));
    if (cfg.flip) {
      encoded[1].push_back(
          encode_targets(flip_horizontal(data.annotations[static_cast<std::size_t>(i)]), heads));
      flipped.push_back(flip_tensor(data.images[static_cast<std::size_t>(i)]));
    }
  }

  Optimizer<T> optimizer(cfg, model.parameters().size());
  TrainLog log;
  std::vector<int> order(static_cast<std::size_t>(n));
  std::int64_t epoch = -1;
  for (int step = 1; step <= cfg.steps; ++step) {
    std::vector<const Tensor<float>*> batch_images;
    std::vector<EncodedTargets> batch_targets;
    for (int b = 0; b < cfg.batch_size; ++b) {
      const std::int64_t pos = static_cast<std::int64_t>(step - 1) * cfg.batch_size + b;
      if (pos / n != epoch) {
        epoch = pos / n;
        std::iota(order.begin(), order.end(), 0);
        std::mt19937_64 rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
        std::shuffle(order.begin(), order.end(), rng);
      }
      const auto idx = static_cast<std::size_t>(order[static_cast<std::size_t>(pos % n)]);
      const bool flip = cfg.flip && (mix_seed(cfg.seed ^ 0xf11fULL, static_cast<std::uint64_t>(pos)) & 1);
      batch_images.push_back(flip ? &flipped[idx] : &data.images[idx]);
      batch_targets.push_back(encoded[flip ? 1 : 0][idx]);
    }
    const Tensor<T> images = stack_images<T>(batch_images);
    const EncodedTargets targets = stack_targets(batch_targets);

    auto out = model.forward(images, Mode::kTrain, active);
    auto loss = total_loss(out, targets, cfg.weights, active);
    if (!std::isfinite(loss.breakdown.total)) {
      const std::string term = first_non_finite(loss.breakdown);
      throw TrainingError("non-finite loss at step " + std::to_string(step) + " (term " + term + ")",
                          step, term);
    }
    model.zero_grad();
    loss.total.backward();
    optimizer.step(model.parameters());
    model.zero_grad();

    StepRecord rec{step, loss.breakdown, cfg.learning_rate};
    if (callbacks.on_step) callbacks.on_step(rec);
    log.steps.push_back(rec);

    if (cfg.eval_interval > 0 && (step % cfg.eval_interval == 0 || step == cfg.steps)) {
      EvalConfig ec = eval;
      if (!ec.tasks) ec.tasks = active;
      auto report = evaluate(model, data, ec);
      if (callbacks.on_eval) callbacks.on_eval(step, report);
      log.evals.emplace_back(step, std::move(report));
    }
  }
  return log;
}

template <typename T>
std::vector<ImageResult> predict(MCNModel<T>& model, const std::vector<Tensor<float>>& images,
                                 const DecodeParams& params, int batch_size) {
  NoGradGuard no_grad;
  const HeadConfig& heads = model.head_config();
  const int stride = model.backbone_config().output_stride();
  std::vector<ImageResult> results;
  for (std::size_t start = 0; start < images.size(); start += static_cast<std::size_t>(batch_size)) {
    std::vector<const Tensor<float>*> batch;
    for (std::size_t i = start; i < std::min(images.size(), start + static_cast<std::size_t>(batch_size)); ++i) {
      batch.push_back(&images[i]);
    }
    const auto out = model.forward(stack_images<T>(batch), Mode::kEval);
    for (int b = 0; b < static_cast<int>(batch.size()); ++b) {
      const ImagePrediction pred = extract_image(out, b, stride);
      ImageResult r;
      if (heads.tasks.has(Task::kDetection)) r.detections = decode_detections(pred, params);
      if (heads.tasks.has(Task::kPose)) r.poses = decode_poses(pred, r.detections, params);
      if (heads.tasks.has(Task::kSegmentation)) {
        r.seg_resolution = pred.seg_resolution;
        r.seg = decode_segmentation(pred.seg, heads.num_classes + 1, pred.seg_resolution);
      }
      results.push_back(std::move(r));
    }
  }
  return results;
}

template <typename T>
MetricReport evaluate(MCNModel<T>& model, const TrainingData& data, const EvalConfig& cfg) {
  const HeadConfig& heads = model.head_config();
  const TaskSet tasks = cfg.tasks ? cfg.tasks->intersect(heads.tasks) : heads.tasks;
  const auto results = predict(model, data.images, cfg.decode, cfg.batch_size);

  HeadConfig seg_only = heads;
  seg_only.tasks = {Task::kSegmentation};
  std::vector<ImageDetections> det_images;
  SegConfusion confusion(heads.num_classes + 1);
  PoseAccumulator poses(cfg.pck_alpha);
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& ann = data.annotations[i];
    const auto& r = results[i];
    if (tasks.has(Task::kDetection)) det_images.push_back({r.detections, ann.boxes});
    if (tasks.has(Task::kPose)) poses.add(r.poses, persons_of(ann));
    if (tasks.has(Task::kSegmentation)) confusion.add(r.seg, encode_targets(ann, seg_only).seg_gt);
  }

  MetricReport report;
  report.images = static_cast<int>(results.size());
  if (tasks.has(Task::kDetection)) {
    const auto m = mean_ap(det_images, heads.num_classes, cfg.iou_thresholds);
    report.det_map = m.map;
    report.det_map50 = m.map50;
    report.per_class_ap = m.per_class_ap;
    report.det_counts = m.counts;
  }
  if (tasks.has(Task::kSegmentation)) {
    report.seg_miou = confusion.miou();
    report.per_label_iou = confusion.per_label_iou();
  }
  if (tasks.has(Task::kPose)) {
    report.pose_pck = poses.pck();
    report.pose_oks = poses.oks();
  }
  return report;
}

#define MCN_INSTANTIATE_TRAINER(T)                                                            \
  template TrainLog train(MCNModel<T>&, const TrainingData&, const TrainConfig&,              \
                          const TrainCallbacks&, const EvalConfig&);                          \
  template MetricReport evaluate(MCNModel<T>&, const TrainingData&, const EvalConfig&);       \
  template std::vector<ImageResult> predict(MCNModel<T>&, const std::vector<Tensor<float>>&,  \
                                            const DecodeParams&, int);

MCN_INSTANTIATE_TRAINER(float)
MCN_INSTANTIATE_TRAINER(double)

#undef MCN_INSTANTIATE_TRAINER

}  // namespace mcn
