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

#include "commands.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "mcn/bench.hpp"
#include "mcn/image.hpp"
#include "mcn/synth.hpp"
#include "mcn/trainer.hpp"
#include "overlay.hpp"
#include "selftest.hpp"

namespace mcn::cli {

namespace fs = std::filesystem;
using nlohmann::json;

bool strict_from_env() {
  const char* v = std::getenv("MCN_STRICT");
  return v != nullptr && std::string(v) == "1";
}

namespace {

json decode_to_json(const DecodeParams& p) {
  return {{"top_k", p.top_k},
          {"score_threshold", p.score_threshold},
          {"keypoint_threshold", p.keypoint_threshold},
          {"fallback_confidence", p.fallback_confidence},
          {"box_expansion", p.box_expansion}};
}

DecodeParams decode_from_json(const json& j) {
  DecodeParams p;
  p.top_k = j.at("top_k").get<int>();
  p.score_threshold = j.at("score_threshold").get<double>();
  p.keypoint_threshold = j.at("keypoint_threshold").get<double>();
  p.fallback_confidence = j.at("fallback_confidence").get<double>();
  p.box_expansion = j.at("box_expansion").get<double>();
  return p;
}

void write_json(const json& j, const fs::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f << j.dump(2) << '\n';
  if (!f) throw IoError("write failed: " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  try {
    return json::parse(f);
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::string absolute(const std::string& p) { return fs::absolute(p).lexically_normal().string(); }

TaskSet parse_tasks(const std::string& list) {
  try {
    TaskSet t = TaskSet::parse(list);
    if (t.empty()) throw UsageError("--tasks: at least one task is required");
    return t;
  } catch (const Error& e) {
    throw UsageError(std::string("--tasks: ") + e.what());
  }
}

// "16,32,64,64" -> {16, 32, 64, 64}
std::vector<int> parse_widths(const std::string& list) {
  std::vector<int> out;
  std::size_t start = 0;
  while (start <= list.size()) {
    const std::size_t comma = list.find(',', start);
    const std::string item = list.substr(start, comma == std::string::npos ? comma : comma - start);
    try {
      std::size_t used = 0;
      const int v = std::stoi(item, &used);
      if (used != item.size() || v < 1) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw UsageError("--widths: expected comma-separated positive integers, got '" + list + "'");
    }
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

// Configuration errors found while resolving flags are usage errors.
template <typename F>
auto resolve(F&& f) {
  try {
    return f();
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
}

void print_report(const MetricReport& r) { std::fputs(format_report(r).c_str(), stdout); }

MCNModel<float> load_model(const fs::path& weights) {
  if (!fs::exists(weights)) throw IoError("model not found: " + weights.string());
  const auto [backbone, heads] = load_model_config(config_path_for(weights));
  auto model = build_model<float>(backbone, heads, 0);
  load_weights(weights, model);
  return model;
}

// ---- gen

int run_gen(const RunManifest& m) {
  const auto cfg = m.config.at("dataset").get<DatasetConfig>();
  const auto scenes = generate_dataset(cfg);
  write_dataset(cfg, scenes, m.out);
  std::printf("wrote %zu scenes to %s\n", scenes.size(), m.out.c_str());
  return kExitOk;
}

// ---- train

int run_train(const RunManifest& m) {
  const json& c = m.config;
  const auto backbone = c.at("backbone").get<BackboneConfig>();
  const auto heads = c.at("heads").get<HeadConfig>();
  const auto tc = c.at("train").get<TrainConfig>();
  const int checkpoint_interval = c.at("checkpoint_interval").get<int>();
  EvalConfig ec;
  ec.decode = decode_from_json(c.at("decode"));

  const fs::path out = m.out;
  fs::create_directories(out / "checkpoints");
  const LoadedDataset loaded = read_dataset(c.at("data").get<std::string>());
  const TrainingData data = make_training_data(loaded, heads);
  auto model = build_model<float>(backbone, heads, tc.seed);

  std::ofstream log(out / "train_log.jsonl", std::ios::binary);
  if (!log) throw IoError("cannot write " + (out / "train_log.jsonl").string());
  TrainCallbacks cb;
  cb.on_step = [&](const StepRecord& r) {
    log << step_to_json(r).dump() << '\n';
    if (checkpoint_interval > 0 && r.step % checkpoint_interval == 0 && r.step != tc.steps) {
      char name[32];
      std::snprintf(name, sizeof name, "step_%06d.mcnw", r.step);
      const fs::path path = out / "checkpoints" / name;
      save_weights(model, path);
      save_model_config(backbone, heads, config_path_for(path));
    }
  };
  cb.on_eval = [&](int step, const MetricReport& r) {
    log << json{{"step", step}, {"eval", report_to_json(r)}}.dump() << '\n';
  };
  train(model, data, tc, cb, ec);
  log.flush();

  const fs::path weights = out / "model.mcnw";
  save_weights(model, weights);
  save_model_config(backbone, heads, config_path_for(weights));
  const MetricReport report = evaluate(model, data, ec);
  json metrics = report_to_json(report);
  metrics["checkpoint_hash"] = file_hash(weights);
  write_json(metrics, out / "metrics.json");
  print_report(report);
  std::printf("checkpoint %s (hash %s)\n", weights.string().c_str(), file_hash(weights).c_str());
  return kExitOk;
}

// ---- eval

int run_eval(const RunManifest& m) {
  const json& c = m.config;
  auto model = load_model(c.at("model").get<std::string>());
  EvalConfig ec;
  ec.decode = decode_from_json(c.at("decode"));
  if (c.contains("tasks") && !c.at("tasks").is_null()) {
    ec.tasks = parse_tasks(c.at("tasks").get<std::string>());
  }
  const LoadedDataset loaded = read_dataset(c.at("data").get<std::string>());
  const TrainingData data = make_training_data(loaded, model.head_config());
  const MetricReport report = evaluate(model, data, ec);
  write_json(report_to_json(report), fs::path(m.out) / "metrics.json");
  print_report(report);
  return kExitOk;
}

// ---- infer / render

int run_infer(const RunManifest& m) {
  const json& c = m.config;
  auto model = load_model(c.at("model").get<std::string>());
  const RgbImage image = read_ppm(c.at("input").get<std::string>());
  const int stride = model.backbone_config().output_stride();
  if (image.width % stride != 0 || image.height % stride != 0) {
    throw InvalidArgument("image size " + std::to_string(image.width) + "x" +
                          std::to_string(image.height) + " is not divisible by the model stride " +
                          std::to_string(stride));
  }
  const auto results =
      predict(model, {image_to_tensor(image)}, decode_from_json(c.at("decode")), 1);
  const json pred = predictions_to_json(results.front(), model.head_config(), image.width,
                                        image.height);
  write_json(pred, fs::path(m.out) / "prediction.json");
  write_ppm(render_overlay(image, pred), fs::path(m.out) / "overlay.ppm");
  std::printf("%zu detections, %zu poses; wrote %s\n", results.front().detections.size(),
              results.front().poses.size(), m.out.c_str());
  return kExitOk;
}

int run_render(const RunManifest& m) {
  const json& c = m.config;
  const RgbImage image = read_ppm(c.at("input").get<std::string>());
  const json pred = read_json(c.at("predictions").get<std::string>());
  write_ppm(render_overlay(image, pred), fs::path(m.out) / "overlay.ppm");
  std::printf("wrote %s\n", (fs::path(m.out) / "overlay.ppm").string().c_str());
  return kExitOk;
}

// ---- bench

int run_bench(const RunManifest& m) {
  const json& c = m.config;
  BenchParams params;
  params.warmup = c.at("warmup").get<int>();
  params.repeats = c.at("repeats").get<int>();
  params.threads = strict_deterministic() ? 1 : c.at("threads").get<int>();
  params.seed = m.seed;
  const BenchReport report =
      compare_mcn_vs_stn(c.at("backbone").get<BackboneConfig>(), c.at("heads").get<HeadConfig>(),
                         c.at("input").get<Shape>(), params);
  std::fputs(format_bench_table(report).c_str(), stdout);
  const json j = bench_to_json(report);
  if (!m.out.empty()) write_json(j, fs::path(m.out) / "bench.json");
  if (c.contains("json") && !c.at("json").get<std::string>().empty()) {
    write_json(j, c.at("json").get<std::string>());
  }
  return kExitOk;
}

// ---- selftest

int run_selftest_command(std::uint64_t seed) {
  int failed = 0;
  const auto results = cli::run_selftest(seed);
  for (const auto& r : results) {
    std::printf("%-28s %s  %s\n", r.name.c_str(), r.passed ? "PASS" : "FAIL", r.detail.c_str());
    if (!r.passed) ++failed;
  }
  if (failed > 0) {
    std::printf("%d of %zu checks failed:", failed, results.size());
    for (const auto& r : results) {
      if (!r.passed) std::printf(" %s", r.name.c_str());
    }
    std::printf("\n");
    return kExitFailure;
  }
  std::printf("all %zu checks passed\n", results.size());
  return kExitOk;
}

// ---- flag definitions

struct GenFlags {
  DatasetConfig dataset;
  std::string out;
};

struct TrainFlags {
  std::string tasks = "det,seg,pose";
  std::string classes = "multi";
  std::string data, out;
  int steps = 200, batch = 4, eval_interval = 0, checkpoint_interval = 0;
  double lr = 1e-3, lambda_size = 0.1, lambda_seg = 5.0, lambda_joint = 1.0;
  std::string optimizer = "adam";
  std::string widths = "16,32,64,64";
  int head_width = 32, seg_res = 0, threads = 1;
  std::uint64_t seed = 0;
  bool flip = false;
};

struct DecodeFlags {
  int top_k = 100;
  double threshold = 0.3;
};

void add_decode_flags(CLI::App* app, DecodeFlags& d) {
  app->add_option("--top-k", d.top_k, "Peaks kept before thresholding")
      ->check(CLI::Range(1, 1 << 30))
      ->capture_default_str();
  app->add_option("--threshold", d.threshold, "Detection score threshold")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
}

json decode_json(const DecodeFlags& d) {
  DecodeParams p;
  p.top_k = d.top_k;
  p.score_threshold = d.threshold;
  return decode_to_json(p);
}

struct BenchFlags {
  std::string tasks = "det,seg,pose";
  int repeats = 30, warmup = 3, seg_res = 128, size = 256, threads = 1, classes = 4;
  int head_width = 32;
  std::string widths = "16,32,64,64";
  std::uint64_t seed = 0;
  std::string json, out;
};

RunManifest make_manifest(const std::string& command, std::uint64_t seed, const std::string& out,
                          bool strict, json config) {
  RunManifest m;
  m.version = tool_version();
  m.command = command;
  m.seed = seed;
  m.out = out.empty() ? std::string() : absolute(out);
  m.strict = strict;
  m.config = std::move(config);
  return m;
}

RunManifest resolve_train(const TrainFlags& f, bool strict) {
  if (f.classes != "single" && f.classes != "multi") {
    throw UsageError("--classes must be 'single' or 'multi'");
  }
  const TaskSet tasks = parse_tasks(f.tasks);
  if (tasks.has(Task::kPose) && !tasks.has(Task::kDetection)) {
    throw UsageError("--tasks " + f.tasks + ": pose requires detection");
  }
  const Dataset ds = load_annotations(fs::path(f.data) / "annotations.json");
  if (ds.entries.empty()) throw UsageError("--data " + f.data + " holds no images");

  return resolve([&] {
    BackboneConfig backbone;
    backbone.stage_widths = parse_widths(f.widths);
    if (backbone.stage_widths.size() != backbone.stage_strides.size()) {
      throw UsageError("--widths needs " + std::to_string(backbone.stage_strides.size()) +
                       " entries");
    }
    backbone.norm = norm_for_batch_size(f.batch);
    backbone.validate();

    HeadConfig heads;
    heads.tasks = tasks;
    heads.class_mode = f.classes == "single" ? ClassMode::kSingle : ClassMode::kMulti;
    heads.num_classes = f.classes == "single" ? 1 : ds.num_classes;
    heads.num_keypoints = ds.num_keypoints;
    heads.seg_resolution =
        f.seg_res > 0 ? f.seg_res : std::max(ds.entries.front().annotation.height,
                                             ds.entries.front().annotation.width);
    heads.output_stride = backbone.output_stride();
    heads.head_width = f.head_width;
    heads.validate();

    TrainConfig tc;
    tc.steps = f.steps;
    tc.batch_size = f.batch;
    tc.learning_rate = f.lr;
    tc.optimizer = f.optimizer == "sgd" ? OptimizerKind::kSgd : OptimizerKind::kAdam;
    tc.weights = {f.lambda_size, f.lambda_seg, f.lambda_joint};
    tc.eval_interval = f.eval_interval;
    tc.seed = f.seed;
    tc.active = tasks;
    tc.flip = f.flip;
    tc.validate();

    DecodeParams decode;
    json config = {{"data", absolute(f.data)},
                   {"backbone", backbone},
                   {"heads", heads},
                   {"train", tc},
                   {"decode", decode_to_json(decode)},
                   {"checkpoint_interval", f.checkpoint_interval},
                   {"threads", f.threads}};
    return make_manifest("train", f.seed, f.out, strict, std::move(config));
  });
}

RunManifest resolve_bench(const BenchFlags& f, bool strict) {
  const TaskSet tasks = parse_tasks(f.tasks);
  return resolve([&] {
    BackboneConfig backbone;
    backbone.stage_widths = parse_widths(f.widths);
    if (backbone.stage_widths.size() != backbone.stage_strides.size()) {
      throw UsageError("--widths needs " + std::to_string(backbone.stage_strides.size()) +
                       " entries");
    }
    backbone.validate();
    HeadConfig heads;
    heads.tasks = tasks;
    heads.num_classes = f.classes;
    heads.seg_resolution = f.seg_res;
    heads.head_width = f.head_width;
    heads.output_stride = backbone.output_stride();
    heads.validate();
    if (f.size % backbone.output_stride() != 0) {
      throw UsageError("--size must be a multiple of " + std::to_string(backbone.output_stride()));
    }
    json config = {{"backbone", backbone},
                   {"heads", heads},
                   {"input", Shape{1, 3, f.size, f.size}},
                   {"warmup", f.warmup},
                   {"repeats", f.repeats},
                   {"threads", f.threads},
                   {"json", f.json.empty() ? std::string() : absolute(f.json)}};
    return make_manifest("bench", f.seed, f.out, strict, std::move(config));
  });
}

}  // namespace

int execute(const RunManifest& manifest) {
  set_strict_deterministic(manifest.strict);
  if (!manifest.strict && manifest.config.contains("threads")) {
    set_num_threads(manifest.config.at("threads").get<int>());
  }
  if (!manifest.out.empty()) write_manifest(manifest, manifest.out);

  const std::string& cmd = manifest.command;
  if (cmd == "gen") return run_gen(manifest);
  if (cmd == "train") return run_train(manifest);
  if (cmd == "eval") return run_eval(manifest);
  if (cmd == "infer") return run_infer(manifest);
  if (cmd == "render") return run_render(manifest);
  if (cmd == "bench") return run_bench(manifest);
  throw UsageError("manifest names unknown command '" + cmd + "'");
}

int run(int argc, const char* const* argv) {
  CLI::App app{"Multitask detection, segmentation and pose networks on the CPU", "mcn"};
  app.require_subcommand(1);
  app.set_version_flag("--version", tool_version());
  bool strict = false;
  app.add_flag("--strict", strict, "Strict-deterministic mode (also MCN_STRICT=1)");

  GenFlags gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a synthetic dataset");
  gen_cmd->add_option("--seed", gen.dataset.seed, "Dataset seed")->capture_default_str();
  gen_cmd->add_option("--scenes", gen.dataset.scenes, "Number of images")
      ->check(CLI::Range(1, 1 << 30))
      ->capture_default_str();
  gen_cmd->add_option("--classes", gen.dataset.num_classes, "Object classes; 1 = person only")
      ->check(CLI::Range(1, 1 << 30))
      ->capture_default_str();
  gen_cmd->add_option("--size", gen.dataset.image_size, "Image side in pixels")
      ->check(CLI::Range(8, 4096))
      ->capture_default_str();
  gen_cmd->add_option("--max-objects", gen.dataset.max_objects, "Objects per image")
      ->check(CLI::Range(1, 1 << 30))
      ->capture_default_str();
  gen_cmd->add_option("--keypoints", gen.dataset.num_keypoints, "Joints per person")
      ->check(CLI::Range(1, kMaxStickJoints))
      ->capture_default_str();
  gen_cmd->add_option("--min-object-size", gen.dataset.min_object_size, "0 = size/5")
      ->capture_default_str();
  gen_cmd->add_option("--max-object-size", gen.dataset.max_object_size, "0 = 2*size/5")
      ->capture_default_str();
  gen_cmd->add_option("--pose-fraction", gen.dataset.pose_fraction,
                      "Share of persons with keypoints")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  gen_cmd->add_flag("--no-collision", gen.dataset.no_collision,
                    "Keep object centers and keypoints on distinct cells");
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();

  TrainFlags tf;
  auto* train_cmd = app.add_subcommand("train", "Train a model on a dataset directory");
  train_cmd->add_option("--tasks", tf.tasks, "Comma-separated subset of det,seg,pose")
      ->capture_default_str();
  train_cmd->add_option("--classes", tf.classes, "single (person only) or multi")
      ->check(CLI::IsMember({"single", "multi"}))
      ->capture_default_str();
  train_cmd->add_option("--data", tf.data, "Dataset directory")->required()->check(
      CLI::ExistingDirectory);
  train_cmd->add_option("--steps", tf.steps)->check(CLI::Range(1, 1 << 30))->capture_default_str();
  train_cmd->add_option("--batch", tf.batch)->check(CLI::Range(1, 1 << 30))->capture_default_str();
  train_cmd->add_option("--lr", tf.lr)->check(CLI::NonNegativeNumber)->capture_default_str();
  train_cmd->add_option("--optimizer", tf.optimizer)
      ->check(CLI::IsMember({"adam", "sgd"}))
      ->capture_default_str();
  train_cmd->add_option("--lambda-size", tf.lambda_size)->capture_default_str();
  train_cmd->add_option("--lambda-seg", tf.lambda_seg)->capture_default_str();
  train_cmd->add_option("--lambda-joint", tf.lambda_joint)->capture_default_str();
  train_cmd->add_option("--eval-interval", tf.eval_interval, "0 = only at the end")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  train_cmd->add_option("--checkpoint-interval", tf.checkpoint_interval, "0 = final only")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  train_cmd->add_option("--widths", tf.widths, "Backbone stage widths")->capture_default_str();
  train_cmd->add_option("--head-width", tf.head_width)
      ->check(CLI::Range(1, 1 << 30))
      ->capture_default_str();
  train_cmd->add_option("--seg-res", tf.seg_res, "Segmentation resolution; 0 = image size")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  train_cmd->add_option("--seed", tf.seed)->capture_default_str();
  train_cmd->add_flag("--flip", tf.flip, "Random horizontal flips");
  train_cmd->add_option("--threads", tf.threads)->check(CLI::Range(1, 1 << 30))->capture_default_str();
  train_cmd->add_option("--out", tf.out, "Output directory")->required();

  std::string eval_model, eval_data, eval_out, eval_tasks;
  DecodeFlags eval_decode;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset directory");
  eval_cmd->add_option("--model", eval_model, "Weight file (model.mcnw)")->required();
  eval_cmd->add_option("--data", eval_data, "Dataset directory")->required()->check(
      CLI::ExistingDirectory);
  eval_cmd->add_option("--tasks", eval_tasks, "Restrict evaluation to these tasks");
  add_decode_flags(eval_cmd, eval_decode);
  eval_cmd->add_option("--out", eval_out, "Output directory")->required();

  std::string infer_model, infer_input, infer_out;
  DecodeFlags infer_decode;
  auto* infer_cmd = app.add_subcommand("infer", "Predict one image and draw an overlay");
  infer_cmd->add_option("--model", infer_model, "Weight file (model.mcnw)")->required();
  infer_cmd->add_option("--input", infer_input, "P6 PPM image")->required();
  add_decode_flags(infer_cmd, infer_decode);
  infer_cmd->add_option("--out", infer_out, "Output directory")->required();

  std::string render_input, render_pred, render_out;
  auto* render_cmd = app.add_subcommand("render", "Draw an overlay from a prediction file");
  render_cmd->add_option("--input", render_input, "P6 PPM image")->required();
  render_cmd->add_option("--predictions", render_pred, "prediction.json from infer")->required();
  render_cmd->add_option("--out", render_out, "Output directory")->required();

  BenchFlags bf;
  auto* bench_cmd = app.add_subcommand("bench", "Compare one multitask network with single-task ones");
  bench_cmd->add_option("--tasks", bf.tasks)->capture_default_str();
  bench_cmd->add_option("--repeats", bf.repeats)
      ->check(CLI::Range(5, 1000000))
      ->capture_default_str();
  bench_cmd->add_option("--warmup", bf.warmup)->check(CLI::Range(1, 1 << 30))->capture_default_str();
  bench_cmd->add_option("--seg-res", bf.seg_res)->check(CLI::Range(1, 1 << 30))->capture_default_str();
  bench_cmd->add_option("--size", bf.size, "Input side")->check(CLI::Range(1, 1 << 30))->capture_default_str();
  bench_cmd->add_option("--classes", bf.classes)->check(CLI::Range(1, 1 << 30))->capture_default_str();
  bench_cmd->add_option("--widths", bf.widths)->capture_default_str();
  bench_cmd->add_option("--head-width", bf.head_width)
      ->check(CLI::Range(1, 1 << 30))
      ->capture_default_str();
  bench_cmd->add_option("--threads", bf.threads)->check(CLI::Range(1, 1 << 30))->capture_default_str();
  bench_cmd->add_option("--seed", bf.seed)->capture_default_str();
  bench_cmd->add_option("--json", bf.json, "Also write the report to this file");
  bench_cmd->add_option("--out", bf.out, "Output directory for manifest and bench.json");

  std::uint64_t selftest_seed = 0;
  auto* selftest_cmd = app.add_subcommand("selftest", "Gradient checks, codec roundtrip, oracles");
  selftest_cmd->add_option("--seed", selftest_seed)->capture_default_str();

  std::string rerun_manifest, rerun_out;
  auto* rerun_cmd = app.add_subcommand("rerun", "Repeat a run from its manifest");
  rerun_cmd->add_option("--manifest", rerun_manifest, "manifest.json of an earlier run")
      ->required()
      ->check(CLI::ExistingFile);
  rerun_cmd->add_option("--out", rerun_out, "Output directory (default: the manifest's)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  strict = strict || strict_from_env();
  try {
    std::optional<RunManifest> manifest;
    if (gen_cmd->parsed()) {
      resolve([&] { gen.dataset.validate(); });
      manifest = make_manifest("gen", gen.dataset.seed, gen.out, strict,
                               json{{"dataset", gen.dataset}});
    } else if (train_cmd->parsed()) {
      manifest = resolve_train(tf, strict);
    } else if (eval_cmd->parsed()) {
      json config = {{"model", absolute(eval_model)},
                     {"data", absolute(eval_data)},
                     {"decode", decode_json(eval_decode)},
                     {"tasks", nullptr}};
      if (!eval_tasks.empty()) config["tasks"] = parse_tasks(eval_tasks).to_string();
      manifest = make_manifest("eval", 0, eval_out, strict, std::move(config));
    } else if (infer_cmd->parsed()) {
      manifest = make_manifest("infer", 0, infer_out, strict,
                               json{{"model", absolute(infer_model)},
                                    {"input", absolute(infer_input)},
                                    {"decode", decode_json(infer_decode)}});
    } else if (render_cmd->parsed()) {
      manifest = make_manifest("render", 0, render_out, strict,
                               json{{"input", absolute(render_input)},
                                    {"predictions", absolute(render_pred)}});
    } else if (bench_cmd->parsed()) {
      manifest = resolve_bench(bf, strict);
    } else if (selftest_cmd->parsed()) {
      set_strict_deterministic(strict);
      return run_selftest_command(selftest_seed);
    } else if (rerun_cmd->parsed()) {
      RunManifest m = read_manifest(rerun_manifest);
      if (!rerun_out.empty()) m.out = absolute(rerun_out);
      m.strict = m.strict || strict;
      manifest = m;
    }
    return execute(*manifest);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitFailure;
  }
}

}  // namespace mcn::cli
