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
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "mcn/ops.hpp"
#include "mcn/tensor.hpp"

namespace mcn {

enum class Task { kDetection = 0, kSegmentation = 1, kPose = 2 };

std::string_view task_name(Task task);  // "det", "seg", "pose"
Task parse_task(std::string_view name);

// Small ordered set of tasks; iteration order is det, seg, pose.
class TaskSet {
 public:
  TaskSet() = default;
  TaskSet(std::initializer_list<Task> tasks) {
    for (Task t : tasks) insert(t);
  }
  static TaskSet all() { return {Task::kDetection, Task::kSegmentation, Task::kPose}; }
  // Comma-separated names, e.g. "det,seg".
  static TaskSet parse(std::string_view list);

  bool has(Task t) const { return (bits_ >> static_cast<int>(t)) & 1u; }
  void insert(Task t) { bits_ |= 1u << static_cast<int>(t); }
  void erase(Task t) { bits_ &= ~(1u << static_cast<int>(t)); }
  bool empty() const { return bits_ == 0; }
  int size() const;
  std::vector<Task> tasks() const;
  std::string to_string() const;

  TaskSet intersect(TaskSet other) const {
    TaskSet out;
    out.bits_ = bits_ & other.bits_;
    return out;
  }
  bool operator==(const TaskSet&) const = default;

 private:
  unsigned bits_ = 0;
};

enum class ClassMode { kSingle, kMulti };
enum class NormKind { kBatch, kAffine };

struct BackboneConfig {
  std::vector<int> stage_widths{16, 32, 64, 64};
  std::vector<int> stage_strides{1, 2, 1, 1};
  int block_depth = 2;
  int stem_stride = 2;
  NormKind norm = NormKind::kBatch;

  int output_stride() const;
  int trunk_width() const { return stage_widths.back(); }
  void validate() const;
  bool operator==(const BackboneConfig&) const = default;
};

// Batch norm needs more than one sample per step; batch 1 gets affine norm.
NormKind norm_for_batch_size(int batch_size);

struct HeadConfig {
  TaskSet tasks = TaskSet::all();
  ClassMode class_mode = ClassMode::kMulti;
  int num_classes = 4;
  int num_keypoints = 5;
  int seg_resolution = 128;
  int output_stride = 4;
  int head_width = 32;

  // Pose requires detection; single-class mode requires one class.
  void validate() const;
  void validate_against(const BackboneConfig& backbone) const;

  int det_channels() const { return num_classes + 4; }
  int pose_channels() const { return 3 * num_keypoints + 2; }
  int seg_channels() const { return num_classes + 1; }
  bool operator==(const HeadConfig&) const = default;
};

void to_json(nlohmann::json& j, const BackboneConfig& c);
void from_json(const nlohmann::json& j, BackboneConfig& c);
void to_json(nlohmann::json& j, const HeadConfig& c);
void from_json(const nlohmann::json& j, HeadConfig& c);

// Each tensor is present iff its task ran. Heatmaps are post-sigmoid,
// seg_softmax is post-softmax at seg_resolution.
template <typename T>
struct HeadOutputs {
  Tensor<T> center_heatmap;    // [N,C,h,w]
  Tensor<T> size_map;          // [N,2,h,w] (w, h) in feature pixels
  Tensor<T> offset_map;        // [N,2,h,w] (x, y) sub-cell offset
  Tensor<T> keypoint_heatmap;  // [N,K,h,w]
  Tensor<T> keypoint_offset;   // [N,2,h,w]
  Tensor<T> joint_regression;  // [N,2K,h,w] (x, y) per joint, feature pixels
  Tensor<T> seg_softmax;       // [N,C+1,S,S]

  bool has(Task t) const;
};

template <typename T>
class MCNModel {
 public:
  struct Param {
    std::string name;
    std::string group;  // "backbone", "det", "seg" or "pose"
    Tensor<T> value;
  };

  // One conv (+ optional norm and ReLU) in the layer graph.
  struct ConvUnit {
    std::string name;
    int in_channels, out_channels, kernel, stride;
    bool bias, norm, relu;
  };

  MCNModel(BackboneConfig backbone, HeadConfig heads, bool allow_standalone_pose = false);

  const BackboneConfig& backbone_config() const { return backbone_; }
  const HeadConfig& head_config() const { return heads_; }

  const std::vector<ConvUnit>& backbone_layers() const { return backbone_layers_; }
  const std::vector<ConvUnit>& head_layers(Task task) const;

  const std::vector<Param>& parameters() const { return params_; }
  std::vector<Param>& parameters() { return params_; }
  Tensor<T> parameter(std::string_view name) const;

  // Batch-norm running statistics, keyed by norm layer name.
  const std::map<std::string, RunningStats<T>>& buffers() const { return buffers_; }
  std::map<std::string, RunningStats<T>>& buffers() { return buffers_; }

  // Runs the backbone once and every configured head in `active` (all
  // configured heads when omitted). Train mode updates running stats.
  HeadOutputs<T> forward(const Tensor<T>& images, Mode mode,
                         std::optional<TaskSet> active = std::nullopt);

  void zero_grad();

 private:
  void add_unit(std::vector<ConvUnit>& layers, const std::string& group, ConvUnit unit);
  Tensor<T> run_units(const std::vector<ConvUnit>& layers, Tensor<T> x, Mode mode);

  BackboneConfig backbone_;
  HeadConfig heads_;
  std::vector<ConvUnit> backbone_layers_;
  std::map<Task, std::vector<ConvUnit>> head_layers_;
  std::vector<Param> params_;
  std::map<std::string, std::size_t> param_index_;
  std::map<std::string, RunningStats<T>> buffers_;
};

// Deterministic initialization: He-normal conv weights, zero biases,
// heatmap logits biased to logit(0.01). Each tensor draws from a stream
// keyed by (seed, name), so the backbone does not depend on the heads.
template <typename T>
MCNModel<T> build_model(const BackboneConfig& backbone, const HeadConfig& heads,
                        std::uint64_t seed);

// Single-task network for efficiency comparisons. Unlike build_model this
// accepts a pose head without detection.
template <typename T>
MCNModel<T> build_single_task_network(const BackboneConfig& backbone, const HeadConfig& heads,
                                      Task task, std::uint64_t seed);

struct ParamCount {
  std::int64_t backbone = 0;
  std::map<std::string, std::int64_t> heads;  // by task name
  std::int64_t total = 0;
};

template <typename T>
ParamCount count_params(const MCNModel<T>& model);

// Binary weight file (little endian): "MCNW" | u32 version | u32 count |
// per tensor: u16 name length, name, u8 rank, u32 dims[rank], f32 values.
inline constexpr std::uint32_t kWeightFormatVersion = 1;

template <typename T>
void save_weights(const MCNModel<T>& model, const std::filesystem::path& path);

// Validates the whole file before touching the model; throws FormatError,
// ShapeMismatchError or TruncatedFileError.
template <typename T>
void load_weights(const std::filesystem::path& path, MCNModel<T>& model);

// Config JSON written next to a weight file ("model.mcnw" -> "model.json").
std::filesystem::path config_path_for(const std::filesystem::path& weights_path);
void save_model_config(const BackboneConfig& backbone, const HeadConfig& heads,
                       const std::filesystem::path& path);
std::pair<BackboneConfig, HeadConfig> load_model_config(const std::filesystem::path& path);

// FNV-1a 64 of a file's bytes, as 16 lowercase hex digits.
std::string file_hash(const std::filesystem::path& path);

extern template class MCNModel<float>;
extern template class MCNModel<double>;

}  // namespace mcn
