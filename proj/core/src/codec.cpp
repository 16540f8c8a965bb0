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

#include "mcn/codec.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mcn {

namespace {

std::size_t plane_index(int channel, int row, int col, int h, int w) {
  return (static_cast<std::size_t>(channel) * h + row) * w + col;
}

int clamp_cell(double v, int size) {
  return std::clamp(static_cast<int>(std::floor(v)), 0, size - 1);
}

template <typename V>
void append(V& dst, const V& src) {
  dst.insert(dst.end(), src.begin(), src.end());
}

}  // namespace

int gaussian_radius(double box_h, double box_w, double min_overlap) {
  if (!(box_h > 0) || !(box_w > 0)) {
    throw InvalidArgument("gaussian_radius: box dimensions must be positive");
  }
  if (!(min_overlap > 0 && min_overlap < 1)) {
    throw InvalidArgument("gaussian_radius: min_overlap must lie in (0, 1)");
  }
  const double h = box_h, w = box_w, mo = min_overlap;
  // Both corners inside / one inside one outside / both outside the box.
  const double b1 = h + w;
  const double c1 = w * h * (1 - mo) / (1 + mo);
  const double r1 = (b1 + std::sqrt(b1 * b1 - 4 * c1)) / 2;

  const double a2 = 4;
  const double b2 = 2 * (h + w);
  const double c2 = (1 - mo) * w * h;
  const double r2 = (b2 + std::sqrt(b2 * b2 - 4 * a2 * c2)) / 2;

  const double a3 = 4 * mo;
  const double b3 = -2 * mo * (h + w);
  const double c3 = (mo - 1) * w * h;
  const double r3 = (b3 + std::sqrt(b3 * b3 - 4 * a3 * c3)) / 2;

  return std::max(1, static_cast<int>(std::floor(std::min({r1, r2, r3}))));
}

void render_gaussian(std::span<float> heatmap, int h, int w, int cx, int cy, int radius) {
  if (static_cast<std::size_t>(h) * w != heatmap.size()) {
    throw InvalidArgument("render_gaussian: heatmap size does not match h*w");
  }
  if (cx < 0 || cx >= w || cy < 0 || cy >= h) {
    throw InvalidArgument("render_gaussian: center outside the map");
  }
  const double sigma = radius / 3.0;
  const double denom = 2 * sigma * sigma;
  for (int dy = -radius; dy <= radius; ++dy) {
    const int y = cy + dy;
    if (y < 0 || y >= h) continue;
    for (int dx = -radius; dx <= radius; ++dx) {
      const int x = cx + dx;
      if (x < 0 || x >= w) continue;
      const float v = static_cast<float>(std::exp(-(dx * dx + dy * dy) / denom));
      float& cell = heatmap[static_cast<std::size_t>(y) * w + x];
      cell = std::max(cell, v);
    }
  }
}

EncodedTargets encode_targets(const SceneAnnotation& ann, const HeadConfig& cfg) {
  const int stride = cfg.output_stride;
  if (ann.height % stride != 0 || ann.width % stride != 0) {
    throw InvalidArgument("encode_targets: image size is not divisible by the output stride");
  }
  EncodedTargets t;
  t.batch = 1;
  t.num_classes = cfg.num_classes;
  t.num_keypoints = cfg.num_keypoints;
  t.feat_h = ann.height / stride;
  t.feat_w = ann.width / stride;
  t.seg_resolution = cfg.seg_resolution;
  t.tasks = cfg.tasks;
  const int fh = t.feat_h, fw = t.feat_w;
  const std::size_t plane = static_cast<std::size_t>(fh) * fw;
  const int k_count = cfg.num_keypoints;

  for (const auto& obj : ann.boxes) {
    if (obj.cls < 0 || obj.cls >= cfg.num_classes) {
      throw InvalidArgument("encode_targets: class id " + std::to_string(obj.cls) +
                            " outside [0, " + std::to_string(cfg.num_classes) + ")");
    }
    if (!(obj.box.w > 0) || !(obj.box.h > 0)) {
      throw InvalidArgument("encode_targets: box with non-positive size");
    }
  }
  auto radius_of = [&](const Box& b) { return gaussian_radius(b.h / stride, b.w / stride); };

  if (cfg.tasks.has(Task::kDetection)) {
    t.center_gt.assign(cfg.num_classes * plane, 0.f);
    t.size_gt.assign(2 * plane, 0.f);
    t.offset_gt.assign(2 * plane, 0.f);
    t.reg_mask.assign(plane, 0.f);
    std::vector<double> owner_area(plane, -1.0);
    for (const auto& obj : ann.boxes) {
      const double fx = obj.box.cx / stride, fy = obj.box.cy / stride;
      const int ix = clamp_cell(fx, fw), iy = clamp_cell(fy, fh);
      render_gaussian(std::span<float>(t.center_gt).subspan(obj.cls * plane, plane), fh, fw, ix,
                      iy, radius_of(obj.box));
      const std::size_t cell = static_cast<std::size_t>(iy) * fw + ix;
      const double area = obj.box.area();
      if (t.reg_mask[cell] > 0) {
        ++t.collisions;
        if (area <= owner_area[cell]) continue;
      }
      owner_area[cell] = area;
      t.reg_mask[cell] = 1.f;
      t.size_gt[cell] = static_cast<float>(obj.box.w / stride);
      t.size_gt[plane + cell] = static_cast<float>(obj.box.h / stride);
      t.offset_gt[cell] = static_cast<float>(fx - ix);
      t.offset_gt[plane + cell] = static_cast<float>(fy - iy);
    }
  }

  if (cfg.tasks.has(Task::kPose)) {
    t.keypoint_gt.assign(k_count * plane, 0.f);
    t.keypoint_offset_gt.assign(2 * plane, 0.f);
    t.keypoint_offset_mask.assign(plane, 0.f);
    t.joint_regression_gt.assign(2 * k_count * plane, 0.f);
    t.joint_regression_mask.assign(2 * k_count * plane, 0.f);
    for (const auto& person : ann.persons) {
      if (person.box_index < 0 || person.box_index >= static_cast<int>(ann.boxes.size())) {
        throw InvalidArgument("encode_targets: person refers to a missing box");
      }
      const auto& obj = ann.boxes[static_cast<std::size_t>(person.box_index)];
      if (obj.cls != kPersonClass) {
        throw InvalidArgument("encode_targets: keypoints attached to a non-person box");
      }
      if (static_cast<int>(person.keypoints.size()) != k_count) {
        throw InvalidArgument("encode_targets: expected " + std::to_string(k_count) +
                              " keypoints per person");
      }
      const int radius = radius_of(obj.box);
      const int ix = clamp_cell(obj.box.cx / stride, fw), iy = clamp_cell(obj.box.cy / stride, fh);
      const std::size_t center_cell = static_cast<std::size_t>(iy) * fw + ix;
      for (int k = 0; k < k_count; ++k) {
        const auto& kp = person.keypoints[static_cast<std::size_t>(k)];
        if (!kp.visible) continue;
        const double kx = kp.x / stride, ky = kp.y / stride;
        const int cx = clamp_cell(kx, fw), cy = clamp_cell(ky, fh);
        render_gaussian(std::span<float>(t.keypoint_gt).subspan(k * plane, plane), fh, fw, cx, cy,
                        radius);
        const std::size_t cell = static_cast<std::size_t>(cy) * fw + cx;
        if (t.keypoint_offset_mask[cell] > 0) {
          ++t.collisions;
        } else {
          t.keypoint_offset_mask[cell] = 1.f;
          t.keypoint_offset_gt[cell] = static_cast<float>(kx - cx);
          t.keypoint_offset_gt[plane + cell] = static_cast<float>(ky - cy);
        }
        const std::size_t rx = (2 * static_cast<std::size_t>(k)) * plane + center_cell;
        const std::size_t ry = rx + plane;
        t.joint_regression_gt[rx] = static_cast<float>((kp.x - obj.box.cx) / stride);
        t.joint_regression_gt[ry] = static_cast<float>((kp.y - obj.box.cy) / stride);
        t.joint_regression_mask[rx] = 1.f;
        t.joint_regression_mask[ry] = 1.f;
      }
    }
  }

  if (cfg.tasks.has(Task::kSegmentation)) {
    const int s = cfg.seg_resolution;
    if (ann.seg_map.size() != static_cast<std::size_t>(ann.height) * ann.width) {
      throw InvalidArgument("encode_targets: seg_map size does not match the image");
    }
    t.seg_gt.resize(static_cast<std::size_t>(s) * s);
    for (int y = 0; y < s; ++y) {
      const int sy = std::min(ann.height - 1, static_cast<int>((y + 0.5) * ann.height / s));
      for (int x = 0; x < s; ++x) {
        const int sx = std::min(ann.width - 1, static_cast<int>((x + 0.5) * ann.width / s));
        const auto id = ann.seg_map[static_cast<std::size_t>(sy) * ann.width + sx];
        if (id > cfg.num_classes) {
          throw InvalidArgument("encode_targets: seg id " + std::to_string(id) + " out of range");
        }
        t.seg_gt[static_cast<std::size_t>(y) * s + x] = id;
      }
    }
  }
  return t;
}

EncodedTargets stack_targets(std::span<const EncodedTargets> items) {
  if (items.empty()) throw InvalidArgument("stack_targets: no items");
  EncodedTargets out = items[0];
  for (std::size_t i = 1; i < items.size(); ++i) {
    const auto& t = items[i];
    if (t.feat_h != out.feat_h || t.feat_w != out.feat_w || t.num_classes != out.num_classes ||
        t.num_keypoints != out.num_keypoints || t.seg_resolution != out.seg_resolution ||
        !(t.tasks == out.tasks)) {
      throw InvalidArgument("stack_targets: items have different layouts");
    }
    out.batch += t.batch;
    out.collisions += t.collisions;
    append(out.center_gt, t.center_gt);
    append(out.size_gt, t.size_gt);
    append(out.offset_gt, t.offset_gt);
    append(out.reg_mask, t.reg_mask);
    append(out.keypoint_gt, t.keypoint_gt);
    append(out.keypoint_offset_gt, t.keypoint_offset_gt);
    append(out.keypoint_offset_mask, t.keypoint_offset_mask);
    append(out.joint_regression_gt, t.joint_regression_gt);
    append(out.joint_regression_mask, t.joint_regression_mask);
    append(out.seg_gt, t.seg_gt);
  }
  return out;
}

namespace {

template <typename T>
std::vector<float> image_slice(const Tensor<T>& t, int index) {
  if (!t.defined()) return {};
  const std::size_t per = static_cast<std::size_t>(t.numel() / t.dim(0));
  const auto src = t.data().subspan(static_cast<std::size_t>(index) * per, per);
  return std::vector<float>(src.begin(), src.end());
}

template <typename V>
V batch_slice(const V& v, int index, int batch) {
  if (v.empty()) return {};
  const std::size_t per = v.size() / static_cast<std::size_t>(batch);
  return V(v.begin() + static_cast<std::ptrdiff_t>(per * index),
           v.begin() + static_cast<std::ptrdiff_t>(per * (index + 1)));
}

}  // namespace

template <typename T>
ImagePrediction extract_image(const HeadOutputs<T>& out, int index, int stride) {
  ImagePrediction p;
  p.stride = stride;
  if (out.center_heatmap.defined()) {
    p.num_classes = out.center_heatmap.dim(1);
    p.feat_h = out.center_heatmap.dim(2);
    p.feat_w = out.center_heatmap.dim(3);
  }
  if (out.keypoint_heatmap.defined()) {
    p.num_keypoints = out.keypoint_heatmap.dim(1);
    p.feat_h = out.keypoint_heatmap.dim(2);
    p.feat_w = out.keypoint_heatmap.dim(3);
  }
  if (out.seg_softmax.defined()) {
    p.seg_resolution = out.seg_softmax.dim(2);
    if (p.num_classes == 0) p.num_classes = out.seg_softmax.dim(1) - 1;
  }
  p.center = image_slice(out.center_heatmap, index);
  p.size = image_slice(out.size_map, index);
  p.offset = image_slice(out.offset_map, index);
  p.keypoint = image_slice(out.keypoint_heatmap, index);
  p.keypoint_offset = image_slice(out.keypoint_offset, index);
  p.joint_regression = image_slice(out.joint_regression, index);
  p.seg = image_slice(out.seg_softmax, index);
  return p;
}

ImagePrediction targets_as_prediction(const EncodedTargets& t, int index, int stride) {
  ImagePrediction p;
  p.stride = stride;
  p.feat_h = t.feat_h;
  p.feat_w = t.feat_w;
  p.num_classes = t.num_classes;
  p.num_keypoints = t.num_keypoints;
  p.center = batch_slice(t.center_gt, index, t.batch);
  p.size = batch_slice(t.size_gt, index, t.batch);
  p.offset = batch_slice(t.offset_gt, index, t.batch);
  p.keypoint = batch_slice(t.keypoint_gt, index, t.batch);
  p.keypoint_offset = batch_slice(t.keypoint_offset_gt, index, t.batch);
  p.joint_regression = batch_slice(t.joint_regression_gt, index, t.batch);
  if (!t.seg_gt.empty()) {
    const int s = t.seg_resolution;
    const std::size_t plane = static_cast<std::size_t>(s) * s;
    p.seg_resolution = s;
    p.seg.assign((t.num_classes + 1) * plane, 0.f);
    const auto ids = batch_slice(t.seg_gt, index, t.batch);
    for (std::size_t i = 0; i < plane; ++i) p.seg[ids[i] * plane + i] = 1.f;
  }
  return p;
}

std::vector<Peak> find_peaks(std::span<const float> maps, int channels, int h, int w) {
  if (maps.size() != static_cast<std::size_t>(channels) * h * w) {
    throw InvalidArgument("find_peaks: map size does not match channels*h*w");
  }
  NoGradGuard no_grad;
  const Tensor<float> input(Shape{1, channels, h, w}, std::vector<float>(maps.begin(), maps.end()));
  const Tensor<float> pooled = ops::max_pool2d_3x3_same(input);
  std::vector<Peak> peaks;
  for (int c = 0; c < channels; ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t i = plane_index(c, y, x, h, w);
        if (maps[i] == pooled.data()[i]) peaks.push_back({c, y, x, maps[i]});
      }
    }
  }
  return peaks;
}

std::vector<Detection> decode_detections(const ImagePrediction& pred, const DecodeParams& params) {
  if (pred.center.empty()) throw InvalidArgument("decode_detections: no detection outputs");
  const int h = pred.feat_h, w = pred.feat_w;
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  auto peaks = find_peaks(pred.center, pred.num_classes, h, w);
  std::stable_sort(peaks.begin(), peaks.end(),
                   [](const Peak& a, const Peak& b) { return a.score > b.score; });
  if (static_cast<int>(peaks.size()) > params.top_k) {
    peaks.resize(static_cast<std::size_t>(std::max(0, params.top_k)));
  }
  std::vector<Detection> out;
  for (const auto& pk : peaks) {
    if (pk.score < params.score_threshold) continue;
    const std::size_t cell = static_cast<std::size_t>(pk.row) * w + pk.col;
    Detection d;
    d.cls = pk.channel;
    d.score = pk.score;
    d.cell_x = pk.col;
    d.cell_y = pk.row;
    d.box.cx = (pk.col + static_cast<double>(pred.offset[cell])) * pred.stride;
    d.box.cy = (pk.row + static_cast<double>(pred.offset[plane + cell])) * pred.stride;
    d.box.w = std::max(1e-3, static_cast<double>(pred.size[cell]) * pred.stride);
    d.box.h = std::max(1e-3, static_cast<double>(pred.size[plane + cell]) * pred.stride);
    out.push_back(d);
  }
  return out;
}

std::vector<PoseInstance> decode_poses(const ImagePrediction& pred,
                                       const std::vector<Detection>& detections,
                                       const DecodeParams& params) {
  if (pred.keypoint.empty()) throw InvalidArgument("decode_poses: no pose outputs");
  const int h = pred.feat_h, w = pred.feat_w, k_count = pred.num_keypoints;
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  const double stride = pred.stride;

  struct Candidate {
    double x, y, score;
  };
  std::vector<std::vector<Candidate>> candidates(static_cast<std::size_t>(k_count));
  for (const auto& pk : find_peaks(pred.keypoint, k_count, h, w)) {
    if (pk.score < params.keypoint_threshold) continue;
    const std::size_t cell = static_cast<std::size_t>(pk.row) * w + pk.col;
    candidates[static_cast<std::size_t>(pk.channel)].push_back(
        {(pk.col + static_cast<double>(pred.keypoint_offset[cell])) * stride,
         (pk.row + static_cast<double>(pred.keypoint_offset[plane + cell])) * stride, pk.score});
  }

  std::vector<PoseInstance> out;
  for (const auto& det : detections) {
    if (det.cls != kPersonClass) continue;
    PoseInstance inst;
    inst.person = det;
    const double half_w = det.box.w * params.box_expansion / 2;
    const double half_h = det.box.h * params.box_expansion / 2;
    const double x0 = det.box.cx - half_w, x1 = det.box.cx + half_w;
    const double y0 = det.box.cy - half_h, y1 = det.box.cy + half_h;
    const std::size_t center_cell = static_cast<std::size_t>(det.cell_y) * w + det.cell_x;
    for (int k = 0; k < k_count; ++k) {
      const double rx =
          det.box.cx + pred.joint_regression[(2 * static_cast<std::size_t>(k)) * plane + center_cell] * stride;
      const double ry =
          det.box.cy + pred.joint_regression[(2 * static_cast<std::size_t>(k) + 1) * plane + center_cell] * stride;
      const Candidate* best = nullptr;
      double best_d2 = std::numeric_limits<double>::infinity();
      for (const auto& c : candidates[static_cast<std::size_t>(k)]) {
        if (c.x < x0 || c.x > x1 || c.y < y0 || c.y > y1) continue;
        const double d2 = (c.x - rx) * (c.x - rx) + (c.y - ry) * (c.y - ry);
        if (d2 < best_d2) {
          best_d2 = d2;
          best = &c;
        }
      }
      if (best) {
        inst.joints.push_back({best->x, best->y, best->score});
      } else {
        inst.joints.push_back(
            {std::clamp(rx, x0, x1), std::clamp(ry, y0, y1), params.fallback_confidence});
      }
    }
    out.push_back(std::move(inst));
  }
  return out;
}

std::vector<std::uint16_t> decode_segmentation(std::span<const float> seg_softmax, int channels,
                                               int side) {
  const std::size_t plane = static_cast<std::size_t>(side) * side;
  if (seg_softmax.size() != channels * plane) {
    throw InvalidArgument("decode_segmentation: map size does not match channels*side^2");
  }
  std::vector<std::uint16_t> ids(plane, 0);
  for (std::size_t i = 0; i < plane; ++i) {
    float best = seg_softmax[i];
    for (int c = 1; c < channels; ++c) {
      const float v = seg_softmax[c * plane + i];
      if (v > best) {
        best = v;
        ids[i] = static_cast<std::uint16_t>(c);
      }
    }
  }
  return ids;
}

template ImagePrediction extract_image(const HeadOutputs<float>&, int, int);
template ImagePrediction extract_image(const HeadOutputs<double>&, int, int);

}  // namespace mcn
