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

#include "mcn/net.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

#include "mcn/hash.hpp"

namespace mcn {

std::string_view task_name(Task task) {
  switch (task) {
    case Task::kDetection:
      return "det";
    case Task::kSegmentation:
      return "seg";
    case Task::kPose:
      return "pose";
  }
  return "?";
}

Task parse_task(std::string_view name) {
  if (name == "det" || name == "detection") return Task::kDetection;
  if (name == "seg" || name == "segmentation") return Task::kSegmentation;
  if (name == "pose") return Task::kPose;
  throw InvalidArgument("unknown task '" + std::string(name) + "' (expected det, seg or pose)");
}

TaskSet TaskSet::parse(std::string_view list) {
  TaskSet out;
  std::size_t start = 0;
  while (start <= list.size()) {
    const std::size_t comma = list.find(',', start);
    const std::string_view item =
        list.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    if (!item.empty()) out.insert(parse_task(item));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

int TaskSet::size() const { return std::popcount(bits_); }

std::vector<Task> TaskSet::tasks() const {
  std::vector<Task> out;
  for (Task t : {Task::kDetection, Task::kSegmentation, Task::kPose}) {
    if (has(t)) out.push_back(t);
  }
  return out;
}

std::string TaskSet::to_string() const {
  std::string out;
  for (Task t : tasks()) {
    if (!out.empty()) out += ',';
    out += task_name(t);
  }
  return out;
}

int BackboneConfig::output_stride() const {
  int s = stem_stride;
  for (int v : stage_strides) s *= v;
  return s;
}

void BackboneConfig::validate() const {
  if (stage_widths.empty()) throw ConfigError("backbone needs at least one stage");
  if (stage_widths.size() != stage_strides.size()) {
    throw ConfigError("backbone stage_widths and stage_strides differ in length");
  }
  for (int w : stage_widths) {
    if (w < 1) throw ConfigError("backbone stage widths must be >= 1");
  }
  for (int s : stage_strides) {
    if (s < 1) throw ConfigError("backbone stage strides must be >= 1");
  }
  if (block_depth < 1) throw ConfigError("backbone block_depth must be >= 1");
  if (stem_stride < 1) throw ConfigError("backbone stem_stride must be >= 1");
}

NormKind norm_for_batch_size(int batch_size) {
  return batch_size > 1 ? NormKind::kBatch : NormKind::kAffine;
}

void HeadConfig::validate() const {
  if (tasks.empty()) throw ConfigError("at least one task is required");
  if (tasks.has(Task::kPose) && !tasks.has(Task::kDetection)) {
    throw ConfigError("pose requires detection: pose heads are always paired with detection");
  }
  if (num_classes < 1) throw ConfigError("num_classes must be >= 1");
  if (class_mode == ClassMode::kSingle && num_classes != 1) {
    throw ConfigError("single-class mode requires num_classes == 1");
  }
  if (num_keypoints < 1) throw ConfigError("num_keypoints must be >= 1");
  if (seg_resolution < 1) throw ConfigError("seg_resolution must be >= 1");
  if (output_stride < 1) throw ConfigError("output_stride must be >= 1");
  if (head_width < 1) throw ConfigError("head_width must be >= 1");
}

void HeadConfig::validate_against(const BackboneConfig& backbone) const {
  if (backbone.output_stride() != output_stride) {
    throw ConfigError("backbone stride product " + std::to_string(backbone.output_stride()) +
                      " != head output_stride " + std::to_string(output_stride));
  }
}

void to_json(nlohmann::json& j, const BackboneConfig& c) {
  j = nlohmann::json{{"stage_widths", c.stage_widths},
                     {"stage_strides", c.stage_strides},
                     {"block_depth", c.block_depth},
                     {"stem_stride", c.stem_stride},
                     {"norm", c.norm == NormKind::kBatch ? "batch" : "affine"}};
}

void from_json(const nlohmann::json& j, BackboneConfig& c) {
  c = BackboneConfig{};
  j.at("stage_widths").get_to(c.stage_widths);
  j.at("stage_strides").get_to(c.stage_strides);
  j.at("block_depth").get_to(c.block_depth);
  c.stem_stride = j.value("stem_stride", 2);
  const std::string norm = j.value("norm", "batch");
  if (norm != "batch" && norm != "affine") throw ConfigError("unknown norm '" + norm + "'");
  c.norm = norm == "batch" ? NormKind::kBatch : NormKind::kAffine;
}

void to_json(nlohmann::json& j, const HeadConfig& c) {
  std::vector<std::string> tasks;
  for (Task t : c.tasks.tasks()) tasks.emplace_back(task_name(t));
  j = nlohmann::json{{"tasks", tasks},
                     {"class_mode", c.class_mode == ClassMode::kSingle ? "single" : "multi"},
                     {"num_classes", c.num_classes},
                     {"num_keypoints", c.num_keypoints},
                     {"seg_resolution", c.seg_resolution},
                     {"output_stride", c.output_stride},
                     {"head_width", c.head_width}};
}

void from_json(const nlohmann::json& j, HeadConfig& c) {
  c = HeadConfig{};
  c.tasks = TaskSet{};
  for (const auto& t : j.at("tasks")) c.tasks.insert(parse_task(t.get<std::string>()));
  const std::string mode = j.at("class_mode").get<std::string>();
  if (mode != "single" && mode != "multi") throw ConfigError("unknown class_mode '" + mode + "'");
  c.class_mode = mode == "single" ? ClassMode::kSingle : ClassMode::kMulti;
  j.at("num_classes").get_to(c.num_classes);
  j.at("num_keypoints").get_to(c.num_keypoints);
  j.at("seg_resolution").get_to(c.seg_resolution);
  j.at("output_stride").get_to(c.output_stride);
  c.head_width = j.value("head_width", 32);
}

template <typename T>
bool HeadOutputs<T>::has(Task t) const {
  switch (t) {
    case Task::kDetection:
      return center_heatmap.defined();
    case Task::kSegmentation:
      return seg_softmax.defined();
    case Task::kPose:
      return keypoint_heatmap.defined();
  }
  return false;
}

template <typename T>
MCNModel<T>::MCNModel(BackboneConfig backbone, HeadConfig heads, bool allow_standalone_pose)
    : backbone_(std::move(backbone)), heads_(std::move(heads)) {
  backbone_.validate();
  if (allow_standalone_pose && heads_.tasks == TaskSet{Task::kPose}) {
    HeadConfig probe = heads_;
    probe.tasks = {Task::kDetection, Task::kPose};
    probe.validate();
  } else {
    heads_.validate();
  }
  heads_.validate_against(backbone_);

  int channels = 3;
  add_unit(backbone_layers_, "backbone",
           {"backbone.stem", channels, backbone_.stage_widths[0], 3, backbone_.stem_stride, false,
            true, true});
  channels = backbone_.stage_widths[0];
  for (std::size_t s = 0; s < backbone_.stage_widths.size(); ++s) {
    for (int d = 0; d < backbone_.block_depth; ++d) {
      const int stride = d == 0 ? backbone_.stage_strides[s] : 1;
      add_unit(backbone_layers_, "backbone",
               {"backbone.stage" + std::to_string(s + 1) + "." + std::to_string(d), channels,
                backbone_.stage_widths[s], 3, stride, false, true, true});
      channels = backbone_.stage_widths[s];
    }
  }
  for (Task t : heads_.tasks.tasks()) {
    const std::string group(task_name(t));
    const int out = t == Task::kDetection      ? heads_.det_channels()
                    : t == Task::kSegmentation ? heads_.seg_channels()
                                               : heads_.pose_channels();
    auto& layers = head_layers_[t];
    add_unit(layers, group,
             {"head." + group + ".hidden", channels, heads_.head_width, 3, 1, false, true, true});
    add_unit(layers, group,
             {"head." + group + ".out", heads_.head_width, out, 1, 1, true, false, false});
  }
}

template <typename T>
void MCNModel<T>::add_unit(std::vector<ConvUnit>& layers, const std::string& group, ConvUnit unit) {
  auto add_param = [&](const std::string& name, Shape shape, T fill) {
    param_index_[name] = params_.size();
    params_.push_back({name, group, Tensor<T>(std::move(shape), fill, true)});
  };
  add_param(unit.name + ".weight", {unit.out_channels, unit.in_channels, unit.kernel, unit.kernel},
            T(0));
  if (unit.bias) add_param(unit.name + ".bias", {unit.out_channels}, T(0));
  if (unit.norm) {
    add_param(unit.name + ".norm.gamma", {unit.out_channels}, T(1));
    add_param(unit.name + ".norm.beta", {unit.out_channels}, T(0));
    buffers_[unit.name + ".norm"] = {Tensor<T>({unit.out_channels}, T(0)),
                                     Tensor<T>({unit.out_channels}, T(1))};
  }
  layers.push_back(std::move(unit));
}

template <typename T>
const std::vector<typename MCNModel<T>::ConvUnit>& MCNModel<T>::head_layers(Task task) const {
  auto it = head_layers_.find(task);
  if (it == head_layers_.end()) {
    throw InvalidArgument("model has no " + std::string(task_name(task)) + " head");
  }
  return it->second;
}

template <typename T>
Tensor<T> MCNModel<T>::parameter(std::string_view name) const {
  auto it = param_index_.find(std::string(name));
  if (it == param_index_.end()) throw InvalidArgument("no parameter named " + std::string(name));
  return params_[it->second].value;
}

template <typename T>
Tensor<T> MCNModel<T>::run_units(const std::vector<ConvUnit>& layers, Tensor<T> x, Mode mode) {
  for (const auto& unit : layers) {
    const Tensor<T> bias = unit.bias ? parameter(unit.name + ".bias") : Tensor<T>();
    x = ops::conv2d(x, parameter(unit.name + ".weight"), bias, unit.stride, unit.kernel / 2);
    if (unit.norm) {
      const auto gamma = parameter(unit.name + ".norm.gamma");
      const auto beta = parameter(unit.name + ".norm.beta");
      if (backbone_.norm == NormKind::kBatch) {
        x = ops::batch_norm2d(x, gamma, beta, buffers_.at(unit.name + ".norm"), mode);
      } else {
        x = ops::channel_affine(x, gamma, beta);
      }
    }
    if (unit.relu) x = ops::relu(x);
  }
  return x;
}

template <typename T>
HeadOutputs<T> MCNModel<T>::forward(const Tensor<T>& images, Mode mode,
                                    std::optional<TaskSet> active) {
  if (images.rank() != 4 || images.dim(1) != 3) {
    throw InvalidArgument("forward expects images of shape [N,3,H,W], got " +
                          shape_to_string(images.shape()));
  }
  const int stride = heads_.output_stride;
  if (images.dim(2) % stride != 0 || images.dim(3) % stride != 0) {
    throw InvalidArgument("input size " + std::to_string(images.dim(2)) + "x" +
                          std::to_string(images.dim(3)) + " is not divisible by output stride " +
                          std::to_string(stride));
  }
  const TaskSet run = active ? heads_.tasks.intersect(*active) : heads_.tasks;
  const Tensor<T> trunk = run_units(backbone_layers_, images, mode);

  HeadOutputs<T> out;
  for (Task t : run.tasks()) {
    const Tensor<T> raw = run_units(head_layers_.at(t), trunk, mode);
    if (t == Task::kDetection) {
      const int c = heads_.num_classes;
      out.center_heatmap = ops::sigmoid(ops::slice_channels(raw, 0, c));
      out.size_map = ops::slice_channels(raw, c, 2);
      out.offset_map = ops::slice_channels(raw, c + 2, 2);
    } else if (t == Task::kPose) {
      const int k = heads_.num_keypoints;
      out.keypoint_heatmap = ops::sigmoid(ops::slice_channels(raw, 0, k));
      out.keypoint_offset = ops::slice_channels(raw, k, 2);
      out.joint_regression = ops::slice_channels(raw, k + 2, 2 * k);
    } else {
      const int s = heads_.seg_resolution;
      if (s < raw.dim(2) || s < raw.dim(3)) {
        throw InvalidArgument("seg_resolution " + std::to_string(s) +
                              " is below the feature map size");
      }
      out.seg_softmax = ops::softmax_channels(ops::bilinear_upsample(raw, s, s));
    }
  }
  return out;
}

template <typename T>
void MCNModel<T>::zero_grad() {
  for (auto& p : params_) p.value.zero_grad();
}

namespace {

template <typename T>
void initialize(MCNModel<T>& model, std::uint64_t seed) {
  const double heatmap_bias = std::log(0.01 / 0.99);
  const auto& heads = model.head_config();
  for (auto& p : model.parameters()) {
    auto data = p.value.mutable_data();
    const auto& shape = p.value.shape();
    const bool is_weight = p.name.ends_with(".weight");
    if (is_weight) {
      std::mt19937_64 rng(mix_seed(seed, fnv1a64(p.name)));
      const double fan_in = static_cast<double>(shape[1]) * shape[2] * shape[3];
      std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / fan_in));
      for (auto& v : data) v = static_cast<T>(normal(rng));
    } else if (p.name.ends_with(".norm.gamma")) {
      std::fill(data.begin(), data.end(), T(1));
    } else {
      std::fill(data.begin(), data.end(), T(0));
    }
    if (p.name == "head.det.out.bias") {
      for (int c = 0; c < heads.num_classes; ++c) data[c] = static_cast<T>(heatmap_bias);
    } else if (p.name == "head.pose.out.bias") {
      for (int k = 0; k < heads.num_keypoints; ++k) data[k] = static_cast<T>(heatmap_bias);
    }
  }
}

}  // namespace

template <typename T>
MCNModel<T> build_model(const BackboneConfig& backbone, const HeadConfig& heads,
                        std::uint64_t seed) {
  MCNModel<T> model(backbone, heads);
  initialize(model, seed);
  return model;
}

template <typename T>
MCNModel<T> build_single_task_network(const BackboneConfig& backbone, const HeadConfig& heads,
                                      Task task, std::uint64_t seed) {
  HeadConfig single = heads;
  single.tasks = {task};
  MCNModel<T> model(backbone, single, /*allow_standalone_pose=*/true);
  initialize(model, seed);
  return model;
}

template <typename T>
ParamCount count_params(const MCNModel<T>& model) {
  ParamCount count;
  for (Task t : model.head_config().tasks.tasks()) count.heads[std::string(task_name(t))] = 0;
  for (const auto& p : model.parameters()) {
    if (p.group == "backbone") {
      count.backbone += p.value.numel();
    } else {
      count.heads[p.group] += p.value.numel();
    }
  }
  count.total = count.backbone;
  for (const auto& [name, n] : count.heads) count.total += n;
  return count;
}

namespace {

struct WeightEntry {
  std::string name;
  Shape shape;
  std::vector<float> values;
};

template <typename T>
std::vector<std::pair<std::string, Tensor<T>>> stored_tensors(const MCNModel<T>& model) {
  std::vector<std::pair<std::string, Tensor<T>>> out;
  for (const auto& p : model.parameters()) out.emplace_back(p.name, p.value);
  for (const auto& [name, stats] : model.buffers()) {
    out.emplace_back(name + ".running_mean", stats.mean);
    out.emplace_back(name + ".running_var", stats.var);
  }
  return out;
}

void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  std::uint32_t u(int width) {
    need(static_cast<std::size_t>(width));
    std::uint32_t v = 0;
    for (int i = 0; i < width; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += static_cast<std::size_t>(width);
    return v;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) {
      throw TruncatedFileError("weight file truncated at byte " + std::to_string(pos_));
    }
  }
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::vector<WeightEntry> parse_weights(const std::string& bytes) {
  Reader r(bytes);
  if (bytes.size() < 4 || bytes.compare(0, 4, "MCNW") != 0) {
    throw FormatError("not an MCNW weight file (bad magic)");
  }
  r.str(4);
  const std::uint32_t version = r.u(4);
  if (version != kWeightFormatVersion) {
    throw FormatError("unsupported weight format version " + std::to_string(version));
  }
  const std::uint32_t count = r.u(4);
  std::vector<WeightEntry> entries;
  for (std::uint32_t e = 0; e < count; ++e) {
    WeightEntry entry;
    entry.name = r.str(r.u(2));
    const std::uint32_t rank = r.u(1);
    std::size_t n = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      entry.shape.push_back(static_cast<int>(r.u(4)));
      n *= static_cast<std::size_t>(entry.shape.back());
    }
    entry.values.resize(n);
    for (auto& v : entry.values) v = std::bit_cast<float>(r.u(4));
    entries.push_back(std::move(entry));
  }
  if (!r.done()) throw FormatError("trailing bytes after the last weight entry");
  return entries;
}

}  // namespace

template <typename T>
void save_weights(const MCNModel<T>& model, const std::filesystem::path& path) {
  const auto tensors = stored_tensors(model);
  std::string buf = "MCNW";
  put_u32(buf, kWeightFormatVersion);
  put_u32(buf, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    buf.push_back(static_cast<char>(name.size() & 0xff));
    buf.push_back(static_cast<char>((name.size() >> 8) & 0xff));
    buf += name;
    buf.push_back(static_cast<char>(t.rank()));
    for (int d : t.shape()) put_u32(buf, static_cast<std::uint32_t>(d));
    for (T v : t.data()) put_u32(buf, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

template <typename T>
void load_weights(const std::filesystem::path& path, MCNModel<T>& model) {
  const auto entries = parse_weights(read_file(path));
  auto tensors = stored_tensors(model);
  if (entries.size() != tensors.size()) {
    throw ShapeMismatchError("weight file has " + std::to_string(entries.size()) +
                             " tensors, model expects " + std::to_string(tensors.size()));
  }
  std::map<std::string, const WeightEntry*> by_name;
  for (const auto& e : entries) by_name[e.name] = &e;
  for (const auto& [name, t] : tensors) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw ShapeMismatchError("weight file lacks tensor " + name);
    if (it->second->shape != t.shape()) {
      throw ShapeMismatchError("tensor " + name + " has shape " +
                               shape_to_string(it->second->shape) + ", model expects " +
                               shape_to_string(t.shape()));
    }
  }
  for (auto& [name, t] : tensors) {
    const auto& values = by_name.at(name)->values;
    auto data = t.mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) data[i] = static_cast<T>(values[i]);
  }
}

std::filesystem::path config_path_for(const std::filesystem::path& weights_path) {
  auto p = weights_path;
  p.replace_extension(".json");
  return p;
}

void save_model_config(const BackboneConfig& backbone, const HeadConfig& heads,
                       const std::filesystem::path& path) {
  const nlohmann::json j{{"backbone", backbone}, {"heads", heads}};
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

std::pair<BackboneConfig, HeadConfig> load_model_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open model config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
    return {j.at("backbone").get<BackboneConfig>(), j.at("heads").get<HeadConfig>()};
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("model config " + path.string() + ": " + e.what());
  }
}

std::string file_hash(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  const auto h = fnv1a64(std::string_view(bytes));
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

template struct HeadOutputs<float>;
template struct HeadOutputs<double>;
template class MCNModel<float>;
template class MCNModel<double>;
template MCNModel<float> build_model(const BackboneConfig&, const HeadConfig&, std::uint64_t);
template MCNModel<double> build_model(const BackboneConfig&, const HeadConfig&, std::uint64_t);
template MCNModel<float> build_single_task_network(const BackboneConfig&, const HeadConfig&, Task,
                                                   std::uint64_t);
template MCNModel<double> build_single_task_network(const BackboneConfig&, const HeadConfig&, Task,
                                                    std::uint64_t);
template ParamCount count_params(const MCNModel<float>&);
template ParamCount count_params(const MCNModel<double>&);
template void save_weights(const MCNModel<float>&, const std::filesystem::path&);
template void save_weights(const MCNModel<double>&, const std::filesystem::path&);
template void load_weights(const std::filesystem::path&, MCNModel<float>&);
template void load_weights(const std::filesystem::path&, MCNModel<double>&);

}  // namespace mcn
