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

#include "mcn/synth.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "mcn/hash.hpp"

namespace mcn {

namespace {

constexpr std::array<const char*, kMaxStickJoints> kJointNames = {
    "head",      "left_hand", "right_hand", "left_foot",  "right_foot", "neck",
    "hip",       "left_elbow", "right_elbow", "left_knee", "right_knee"};
constexpr std::array<int, kMaxStickJoints> kJointMirror = {0, 2, 1, 4, 3, 5, 6, 8, 7, 10, 9};

constexpr std::array<std::array<int, 3>, 8> kClassColors = {{{230, 70, 70},
                                                             {70, 200, 80},
                                                             {70, 110, 230},
                                                             {235, 205, 60},
                                                             {200, 80, 220},
                                                             {60, 210, 210},
                                                             {240, 140, 40},
                                                             {250, 250, 250}}};

constexpr double kMinVisibleFraction = 0.6;
constexpr int kPlacementAttempts = 30;

struct Point {
  double x, y;
};

struct Placed {
  int cls;
  std::vector<std::uint8_t> mask;
  int x0, y0, x1, y1;  // inclusive pixel bounds
  std::int64_t pixels;
  std::vector<std::pair<int, int>> joint_pixels;
  bool has_pose;
};

class Canvas {
 public:
  Canvas(int w, int h) : w_(w), h_(h), mask_(static_cast<std::size_t>(w) * h, 0) {}

  void set(int x, int y) {
    if (x >= 0 && x < w_ && y >= 0 && y < h_) mask_[static_cast<std::size_t>(y) * w_ + x] = 1;
  }

  // Pixels whose centers satisfy `inside`, scanned over a bounding rect.
  template <typename Fn>
  void fill(double bx0, double by0, double bx1, double by1, Fn&& inside) {
    const int xa = std::max(0, static_cast<int>(std::floor(bx0)));
    const int ya = std::max(0, static_cast<int>(std::floor(by0)));
    const int xb = std::min(w_ - 1, static_cast<int>(std::ceil(bx1)));
    const int yb = std::min(h_ - 1, static_cast<int>(std::ceil(by1)));
    for (int y = ya; y <= yb; ++y) {
      for (int x = xa; x <= xb; ++x) {
        if (inside(x + 0.5, y + 0.5)) set(x, y);
      }
    }
  }

  void disc(Point c, double r) {
    fill(c.x - r, c.y - r, c.x + r, c.y + r, [&](double x, double y) {
      return (x - c.x) * (x - c.x) + (y - c.y) * (y - c.y) <= r * r;
    });
  }

  void segment(Point a, Point b, double thickness) {
    const double r = thickness / 2;
    const double dx = b.x - a.x, dy = b.y - a.y;
    const double len2 = dx * dx + dy * dy;
    fill(std::min(a.x, b.x) - r, std::min(a.y, b.y) - r, std::max(a.x, b.x) + r,
         std::max(a.y, b.y) + r, [&](double x, double y) {
           double t = len2 > 0 ? ((x - a.x) * dx + (y - a.y) * dy) / len2 : 0.0;
           t = std::clamp(t, 0.0, 1.0);
           const double px = a.x + t * dx - x, py = a.y + t * dy - y;
           return px * px + py * py <= r * r;
         });
  }

  std::vector<std::uint8_t>& mask() { return mask_; }

 private:
  int w_, h_;
  std::vector<std::uint8_t> mask_;
};

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

// Draws one object of class `cls` at a random spot.
Placed draw_object(const DatasetConfig& cfg, int cls, std::mt19937_64& rng) {
  const int size = cfg.image_size;
  Canvas canvas(size, size);
  Placed obj;
  obj.cls = cls;
  obj.has_pose = false;
  const int lo = cfg.min_extent(), hi = cfg.max_extent();

  if (cls == kPersonClass) {
    const int sh = uniform_int(rng, lo, hi);
    const int sw = std::max(5, static_cast<int>(std::lround(sh * uniform(rng, 0.55, 0.75))));
    const double ox = uniform_int(rng, 0, size - sw), oy = uniform_int(rng, 0, size - sh);
    const double t = std::max(2.0, sw / 4.0);
    const double r = std::max(1.6, sh * 0.13);
    const double mid = ox + sw / 2.0;
    const Point head{mid, oy + r};
    const Point neck{mid, oy + 2 * r};
    const Point hip{mid, oy + sh * 0.6};
    const Point shoulder{mid, oy + 2 * r + sh * 0.08};
    const Point lhand{ox + uniform(rng, 0.5, 0.5 + sw * 0.1), oy + sh * uniform(rng, 0.3, 0.55)};
    const Point rhand{ox + sw - uniform(rng, 0.5, 0.5 + sw * 0.1), oy + sh * uniform(rng, 0.3, 0.55)};
    const Point lfoot{ox + sw * uniform(rng, 0.05, 0.3) + 0.5, oy + sh - 0.5};
    const Point rfoot{ox + sw - sw * uniform(rng, 0.05, 0.3) - 0.5, oy + sh - 0.5};
    const Point lelbow{(shoulder.x + lhand.x) / 2, (shoulder.y + lhand.y) / 2 + sh * 0.05};
    const Point relbow{(shoulder.x + rhand.x) / 2, (shoulder.y + rhand.y) / 2 + sh * 0.05};
    const Point lknee{(hip.x + lfoot.x) / 2, (hip.y + lfoot.y) / 2};
    const Point rknee{(hip.x + rfoot.x) / 2, (hip.y + rfoot.y) / 2};
    canvas.disc(head, r);
    canvas.segment(neck, hip, t + 1);
    canvas.segment(shoulder, lelbow, t);
    canvas.segment(lelbow, lhand, t);
    canvas.segment(shoulder, relbow, t);
    canvas.segment(relbow, rhand, t);
    canvas.segment(hip, lknee, t);
    canvas.segment(lknee, lfoot, t);
    canvas.segment(hip, rknee, t);
    canvas.segment(rknee, rfoot, t);
    const std::array<Point, kMaxStickJoints> joints = {head,  lhand,  rhand,  lfoot, rfoot, neck,
                                                       hip,   lelbow, relbow, lknee, rknee};
    for (int k = 0; k < cfg.num_keypoints; ++k) {
      const int px = std::clamp(static_cast<int>(std::floor(joints[static_cast<std::size_t>(k)].x)), 0, size - 1);
      const int py = std::clamp(static_cast<int>(std::floor(joints[static_cast<std::size_t>(k)].y)), 0, size - 1);
      canvas.set(px, py);
      obj.joint_pixels.emplace_back(px, py);
    }
    obj.has_pose = uniform(rng, 0.0, 1.0) < cfg.pose_fraction;
  } else {
    const int sw = uniform_int(rng, lo, hi), sh = uniform_int(rng, lo, hi);
    const double ox = uniform_int(rng, 0, size - sw), oy = uniform_int(rng, 0, size - sh);
    switch ((cls - 1) % 3) {
      case 0:
        canvas.fill(ox, oy, ox + sw - 1, oy + sh - 1, [&](double x, double y) {
          return x > ox && x < ox + sw && y > oy && y < oy + sh;
        });
        break;
      case 1: {
        const double cx = ox + sw / 2.0, cy = oy + sh / 2.0, a = sw / 2.0, b = sh / 2.0;
        canvas.fill(ox, oy, ox + sw, oy + sh, [&](double x, double y) {
          return (x - cx) * (x - cx) / (a * a) + (y - cy) * (y - cy) / (b * b) <= 1.0;
        });
        break;
      }
      default: {
        const Point p0{ox, oy + sh}, p1{ox + sw, oy + sh}, p2{ox + uniform(rng, 0.2, 0.8) * sw, oy};
        auto edge = [](Point a, Point b, double x, double y) {
          return (b.x - a.x) * (y - a.y) - (b.y - a.y) * (x - a.x);
        };
        canvas.fill(ox, oy, ox + sw, oy + sh, [&](double x, double y) {
          const double e0 = edge(p0, p1, x, y), e1 = edge(p1, p2, x, y), e2 = edge(p2, p0, x, y);
          return (e0 <= 0 && e1 <= 0 && e2 <= 0) || (e0 >= 0 && e1 >= 0 && e2 >= 0);
        });
        break;
      }
    }
  }

  obj.mask = std::move(canvas.mask());
  obj.x0 = size, obj.y0 = size, obj.x1 = -1, obj.y1 = -1;
  obj.pixels = 0;
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      if (!obj.mask[static_cast<std::size_t>(y) * size + x]) continue;
      ++obj.pixels;
      obj.x0 = std::min(obj.x0, x);
      obj.x1 = std::max(obj.x1, x);
      obj.y0 = std::min(obj.y0, y);
      obj.y1 = std::max(obj.y1, y);
    }
  }
  return obj;
}

Box tight_box(const Placed& p) {
  Box b;
  b.cx = (p.x0 + p.x1 + 1) / 2.0;
  b.cy = (p.y0 + p.y1 + 1) / 2.0;
  b.w = p.x1 - p.x0 + 1;
  b.h = p.y1 - p.y0 + 1;
  return b;
}

std::pair<int, int> cell_of(double x, double y, int cell) {
  return {static_cast<int>(std::floor(x / cell)), static_cast<int>(std::floor(y / cell))};
}

}  // namespace

const char* stick_joint_name(int k) {
  if (k < 0 || k >= kMaxStickJoints) throw InvalidArgument("stick joint index out of range");
  return kJointNames[static_cast<std::size_t>(k)];
}

int stick_joint_mirror(int k) {
  if (k < 0 || k >= kMaxStickJoints) throw InvalidArgument("stick joint index out of range");
  return kJointMirror[static_cast<std::size_t>(k)];
}

void DatasetConfig::validate() const {
  if (image_size < 8) throw ConfigError("image_size must be at least 8");
  if (num_classes < 1) throw ConfigError("num_classes must be at least 1");
  if (max_objects < 1) throw ConfigError("max_objects must be at least 1");
  if (num_keypoints < 1 || num_keypoints > kMaxStickJoints) {
    throw ConfigError("num_keypoints must lie in [1, " + std::to_string(kMaxStickJoints) + "]");
  }
  if (scenes < 0) throw ConfigError("scenes must be non-negative");
  if (cell_size < 1) throw ConfigError("cell_size must be positive");
  if (!(pose_fraction >= 0 && pose_fraction <= 1)) {
    throw ConfigError("pose_fraction must lie in [0, 1]");
  }
  if (min_extent() < 5 || max_extent() < min_extent() || max_extent() > image_size) {
    throw ConfigError("object size range must satisfy 5 <= min <= max <= image_size");
  }
}

int DatasetConfig::min_extent() const {
  return min_object_size > 0 ? min_object_size : std::max(5, image_size / 5);
}

int DatasetConfig::max_extent() const {
  return max_object_size > 0 ? max_object_size : std::max(min_extent(), 2 * image_size / 5);
}

void to_json(nlohmann::json& j, const DatasetConfig& c) {
  j = {{"image_size", c.image_size},       {"num_classes", c.num_classes},
       {"max_objects", c.max_objects},     {"num_keypoints", c.num_keypoints},
       {"seed", c.seed},                   {"scenes", c.scenes},
       {"min_object_size", c.min_object_size}, {"max_object_size", c.max_object_size},
       {"no_collision", c.no_collision},   {"cell_size", c.cell_size},
       {"pose_fraction", c.pose_fraction}};
}

void from_json(const nlohmann::json& j, DatasetConfig& c) {
  c = DatasetConfig{};
  auto opt = [&](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  opt("image_size", c.image_size);
  opt("num_classes", c.num_classes);
  opt("max_objects", c.max_objects);
  opt("num_keypoints", c.num_keypoints);
  opt("seed", c.seed);
  opt("scenes", c.scenes);
  opt("min_object_size", c.min_object_size);
  opt("max_object_size", c.max_object_size);
  opt("no_collision", c.no_collision);
  opt("cell_size", c.cell_size);
  opt("pose_fraction", c.pose_fraction);
  c.validate();
}

Scene generate_scene(const DatasetConfig& cfg, int index) {
  cfg.validate();
  if (index < 0 || index >= cfg.scenes) {
    throw InvalidArgument("generate_scene: index " + std::to_string(index) + " outside [0, " +
                          std::to_string(cfg.scenes) + ")");
  }
  const int size = cfg.image_size;
  const std::size_t npix = static_cast<std::size_t>(size) * size;
  std::mt19937_64 rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(index)));

  // Background: bilinear value noise on a 5x5 grid per channel.
  constexpr int kGrid = 5;
  std::array<std::array<double, kGrid * kGrid>, 3> grid{};
  for (auto& g : grid) {
    for (auto& v : g) v = uniform(rng, 70, 150);
  }
  Scene scene;
  scene.image = RgbImage(size, size);
  for (int y = 0; y < size; ++y) {
    const double gy = y * (kGrid - 1.0) / std::max(1, size - 1);
    const int iy = std::min(kGrid - 2, static_cast<int>(gy));
    const double fy = gy - iy;
    for (int x = 0; x < size; ++x) {
      const double gx = x * (kGrid - 1.0) / std::max(1, size - 1);
      const int ix = std::min(kGrid - 2, static_cast<int>(gx));
      const double fx = gx - ix;
      for (int c = 0; c < 3; ++c) {
        const auto& g = grid[static_cast<std::size_t>(c)];
        auto at = [&](int gx_, int gy_) { return g[static_cast<std::size_t>(gy_ * kGrid + gx_)]; };
        const double v = (1 - fy) * ((1 - fx) * at(ix, iy) + fx * at(ix + 1, iy)) +
                         fy * ((1 - fx) * at(ix, iy + 1) + fx * at(ix + 1, iy + 1));
        scene.image.at(x, y)[c] = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
      }
    }
  }

  std::vector<int> owner(npix, -1);
  std::vector<Placed> placed;
  std::set<std::pair<int, int>> center_cells, joint_cells;
  const int count = uniform_int(rng, 1, cfg.max_objects);
  for (int i = 0; i < count; ++i) {
    const int cls = uniform_int(rng, 0, cfg.num_classes - 1);
    for (int attempt = 0; attempt < kPlacementAttempts; ++attempt) {
      Placed obj = draw_object(cfg, cls, rng);
      if (obj.pixels == 0) continue;
      const Box box = tight_box(obj);
      const auto center = cell_of(box.cx, box.cy, cfg.cell_size);
      std::vector<std::pair<int, int>> cells;
      if (cfg.no_collision) {
        if (center_cells.count(center)) continue;
        bool clash = false;
        for (const auto& [px, py] : obj.joint_pixels) {
          const auto c = cell_of(px + 0.5, py + 0.5, cfg.cell_size);
          if (joint_cells.count(c) ||
              std::find(cells.begin(), cells.end(), c) != cells.end()) {
            clash = true;
            break;
          }
          cells.push_back(c);
        }
        if (clash) continue;
      }
      std::vector<std::int64_t> covered(placed.size(), 0);
      for (std::size_t p = 0; p < npix; ++p) {
        if (obj.mask[p] && owner[p] >= 0) ++covered[static_cast<std::size_t>(owner[p])];
      }
      bool ok = true;
      for (std::size_t j = 0; j < placed.size() && ok; ++j) {
        std::int64_t visible = 0;
        for (std::size_t p = 0; p < npix; ++p) visible += (owner[p] == static_cast<int>(j));
        ok = visible - covered[j] >= kMinVisibleFraction * static_cast<double>(placed[j].pixels);
      }
      if (!ok) continue;
      for (std::size_t p = 0; p < npix; ++p) {
        if (obj.mask[p]) owner[p] = static_cast<int>(placed.size());
      }
      if (cfg.no_collision) {
        center_cells.insert(center);
        joint_cells.insert(cells.begin(), cells.end());
      }
      placed.push_back(std::move(obj));
      break;
    }
  }

  // Paint objects (top-most owner wins) and finish with pixel noise.
  std::vector<std::array<int, 3>> colors;
  for (const auto& obj : placed) {
    auto base = kClassColors[static_cast<std::size_t>(obj.cls) % kClassColors.size()];
    for (auto& v : base) v = std::clamp(v + uniform_int(rng, -15, 15), 0, 255);
    colors.push_back(base);
  }
  auto& ann = scene.annotation;
  ann.height = ann.width = size;
  ann.seg_map.assign(npix, 0);
  for (std::size_t p = 0; p < npix; ++p) {
    if (owner[p] >= 0) {
      const auto& col = colors[static_cast<std::size_t>(owner[p])];
      for (int c = 0; c < 3; ++c) scene.image.pixels[p * 3 + c] = static_cast<std::uint8_t>(col[c]);
      ann.seg_map[p] = static_cast<std::uint16_t>(placed[static_cast<std::size_t>(owner[p])].cls + 1);
    }
  }
  for (auto& v : scene.image.pixels) {
    v = static_cast<std::uint8_t>(std::clamp(v + uniform_int(rng, -8, 8), 0, 255));
  }

  for (std::size_t j = 0; j < placed.size(); ++j) {
    const auto& obj = placed[j];
    ann.boxes.push_back({obj.cls, tight_box(obj)});
    if (obj.cls != kPersonClass || !obj.has_pose) continue;
    PersonAnnotation person;
    person.box_index = static_cast<int>(j);
    for (const auto& [px, py] : obj.joint_pixels) {
      const bool visible = owner[static_cast<std::size_t>(py) * size + px] == static_cast<int>(j);
      person.keypoints.push_back({px + 0.5, py + 0.5, visible});
    }
    ann.persons.push_back(std::move(person));
  }
  return scene;
}

std::vector<Scene> generate_dataset(const DatasetConfig& cfg) {
  cfg.validate();
  std::vector<Scene> scenes;
  scenes.reserve(static_cast<std::size_t>(cfg.scenes));
  for (int i = 0; i < cfg.scenes; ++i) scenes.push_back(generate_scene(cfg, i));
  return scenes;
}

SceneAnnotation flip_horizontal(const SceneAnnotation& ann) {
  SceneAnnotation out = ann;
  const double w = ann.width;
  for (auto& b : out.boxes) b.box.cx = w - b.box.cx;
  for (auto& p : out.persons) {
    const auto src = p.keypoints;
    for (std::size_t k = 0; k < src.size(); ++k) {
      const std::size_t m = static_cast<std::size_t>(
          k < static_cast<std::size_t>(kMaxStickJoints) ? stick_joint_mirror(static_cast<int>(k)) : static_cast<int>(k));
      const std::size_t from = m < src.size() ? m : k;
      p.keypoints[k] = src[from];
      p.keypoints[k].x = w - src[from].x;
    }
  }
  for (int y = 0; y < ann.height; ++y) {
    auto row = out.seg_map.begin() + static_cast<std::ptrdiff_t>(y) * ann.width;
    std::reverse(row, row + ann.width);
  }
  return out;
}

Scene flip_horizontal(const Scene& scene) {
  Scene out;
  out.annotation = flip_horizontal(scene.annotation);
  out.image = RgbImage(scene.image.width, scene.image.height);
  for (int y = 0; y < scene.image.height; ++y) {
    for (int x = 0; x < scene.image.width; ++x) {
      std::copy_n(scene.image.at(scene.image.width - 1 - x, y), 3, out.image.at(x, y));
    }
  }
  return out;
}

SceneAnnotation restrict_to_person(const SceneAnnotation& ann) {
  SceneAnnotation out;
  out.height = ann.height;
  out.width = ann.width;
  std::vector<int> remap(ann.boxes.size(), -1);
  for (std::size_t i = 0; i < ann.boxes.size(); ++i) {
    if (ann.boxes[i].cls != kPersonClass) continue;
    remap[i] = static_cast<int>(out.boxes.size());
    out.boxes.push_back(ann.boxes[i]);
  }
  for (const auto& p : ann.persons) {
    const int idx = remap.at(static_cast<std::size_t>(p.box_index));
    if (idx < 0) continue;
    out.persons.push_back({idx, p.keypoints});
  }
  out.seg_map = ann.seg_map;
  for (auto& v : out.seg_map) {
    if (v != kPersonClass + 1) v = 0;
  }
  return out;
}

std::vector<std::pair<std::uint16_t, std::uint32_t>> rle_encode(
    const std::vector<std::uint16_t>& labels) {
  std::vector<std::pair<std::uint16_t, std::uint32_t>> runs;
  for (auto v : labels) {
    if (!runs.empty() && runs.back().first == v) {
      ++runs.back().second;
    } else {
      runs.emplace_back(v, 1);
    }
  }
  return runs;
}

std::vector<std::uint16_t> rle_decode(
    const std::vector<std::pair<std::uint16_t, std::uint32_t>>& runs, std::size_t expected) {
  std::vector<std::uint16_t> out;
  out.reserve(expected);
  for (const auto& [id, n] : runs) {
    if (out.size() + n > expected) throw ValidationError("seg_rle covers more pixels than the image");
    out.insert(out.end(), n, id);
  }
  if (out.size() != expected) throw ValidationError("seg_rle covers fewer pixels than the image");
  return out;
}

std::string format_coordinate(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_coordinate(const nlohmann::json& v) {
  if (v.is_number()) return v.get<double>();
  if (!v.is_string()) throw ParseError("coordinate must be a decimal string or number");
  const auto& s = v.get_ref<const std::string&>();
  double out = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ParseError("bad coordinate '" + s + "'");
  }
  return out;
}

nlohmann::json dataset_to_json(const Dataset& ds) {
  nlohmann::json j;
  j["version"] = kAnnotationVersion;
  j["num_classes"] = ds.num_classes;
  j["num_keypoints"] = ds.num_keypoints;
  auto images = nlohmann::json::array();
  for (const auto& e : ds.entries) {
    const auto& a = e.annotation;
    nlohmann::json img;
    img["id"] = e.id;
    img["width"] = a.width;
    img["height"] = a.height;
    if (!e.file.empty()) img["file"] = e.file;
    auto boxes = nlohmann::json::array();
    for (const auto& b : a.boxes) {
      boxes.push_back({{"class", b.cls},
                       {"cx", format_coordinate(b.box.cx)},
                       {"cy", format_coordinate(b.box.cy)},
                       {"w", format_coordinate(b.box.w)},
                       {"h", format_coordinate(b.box.h)}});
    }
    img["boxes"] = boxes;
    auto persons = nlohmann::json::array();
    for (const auto& p : a.persons) {
      auto kps = nlohmann::json::array();
      for (const auto& k : p.keypoints) {
        kps.push_back({{"x", format_coordinate(k.x)},
                       {"y", format_coordinate(k.y)},
                       {"visible", k.visible}});
      }
      persons.push_back({{"box_index", p.box_index}, {"keypoints", kps}});
    }
    img["persons"] = persons;
    auto rle = nlohmann::json::array();
    for (const auto& [id, n] : rle_encode(a.seg_map)) rle.push_back({id, n});
    img["seg_rle"] = rle;
    images.push_back(std::move(img));
  }
  j["images"] = std::move(images);
  return j;
}

Dataset dataset_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("version")) throw ParseError("annotation file has no version");
  const auto& ver = j.at("version");
  const std::string version = ver.is_string() ? ver.get<std::string>() : ver.dump();
  if (version != kAnnotationVersion) {
    throw VersionError("unsupported annotation version " + version + " (supported: " +
                       kAnnotationVersion + ")");
  }
  Dataset ds;
  try {
    ds.num_classes = j.value("num_classes", 0);
    ds.num_keypoints = j.value("num_keypoints", 0);
    int max_cls = -1, max_k = 0;
    for (const auto& img : j.at("images")) {
      DatasetEntry e;
      e.id = img.at("id").get<int>();
      e.file = img.value("file", std::string());
      auto& a = e.annotation;
      a.width = img.at("width").get<int>();
      a.height = img.at("height").get<int>();
      const std::string where = "image " + std::to_string(e.id);
      if (a.width <= 0 || a.height <= 0) throw ValidationError(where + ": non-positive size");
      for (const auto& b : img.at("boxes")) {
        ObjectAnnotation o;
        o.cls = b.at("class").get<int>();
        o.box = {parse_coordinate(b.at("cx")), parse_coordinate(b.at("cy")),
                 parse_coordinate(b.at("w")), parse_coordinate(b.at("h"))};
        const std::string bw = where + ", box " + std::to_string(a.boxes.size());
        if (o.cls < 0 || (ds.num_classes > 0 && o.cls >= ds.num_classes)) {
          throw ValidationError(bw + ": class " + std::to_string(o.cls) + " out of range");
        }
        if (!(o.box.w > 0 && o.box.h > 0)) throw ValidationError(bw + ": non-positive size");
        if (o.box.cx < 0 || o.box.cx > a.width || o.box.cy < 0 || o.box.cy > a.height) {
          throw ValidationError(bw + ": center outside the image");
        }
        max_cls = std::max(max_cls, o.cls);
        a.boxes.push_back(o);
      }
      for (const auto& p : img.at("persons")) {
        PersonAnnotation pa;
        pa.box_index = p.at("box_index").get<int>();
        const std::string pw = where + ", person " + std::to_string(a.persons.size());
        if (pa.box_index < 0 || pa.box_index >= static_cast<int>(a.boxes.size())) {
          throw ValidationError(pw + ": box_index " + std::to_string(pa.box_index) +
                                " does not name a box");
        }
        for (const auto& k : p.at("keypoints")) {
          Keypoint kp{parse_coordinate(k.at("x")), parse_coordinate(k.at("y")),
                      k.at("visible").get<bool>()};
          if (kp.x < 0 || kp.x > a.width || kp.y < 0 || kp.y > a.height) {
            throw ValidationError(pw + ": keypoint " + std::to_string(pa.keypoints.size()) +
                                  " outside the image");
          }
          pa.keypoints.push_back(kp);
        }
        max_k = std::max(max_k, static_cast<int>(pa.keypoints.size()));
        a.persons.push_back(std::move(pa));
      }
      std::vector<std::pair<std::uint16_t, std::uint32_t>> runs;
      for (const auto& r : img.at("seg_rle")) {
        runs.emplace_back(r.at(0).get<std::uint16_t>(), r.at(1).get<std::uint32_t>());
      }
      try {
        a.seg_map = rle_decode(runs, static_cast<std::size_t>(a.width) * a.height);
      } catch (const ValidationError& err) {
        throw ValidationError(where + ": " + err.what());
      }
      ds.entries.push_back(std::move(e));
    }
    if (ds.num_classes == 0) ds.num_classes = max_cls + 1;
    if (ds.num_keypoints == 0) ds.num_keypoints = max_k;
  } catch (const nlohmann::json::exception& err) {
    throw ParseError(std::string("malformed annotation file: ") + err.what());
  }
  return ds;
}

void save_annotations(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << dataset_to_json(ds).dump(1) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

Dataset load_annotations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& err) {
    throw ParseError(path.string() + ": " + err.what());
  }
  return dataset_from_json(j);
}

void write_dataset(const DatasetConfig& cfg, const std::vector<Scene>& scenes,
                   const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir / "images", ec);
  if (ec) throw IoError("cannot create " + (dir / "images").string() + ": " + ec.message());
  Dataset ds;
  ds.num_classes = cfg.num_classes;
  ds.num_keypoints = cfg.num_keypoints;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "images/%06zu.ppm", i);
    write_ppm(scenes[i].image, dir / name);
    ds.entries.push_back({static_cast<int>(i), scenes[i].annotation, name});
  }
  save_annotations(ds, dir / "annotations.json");
}

LoadedDataset read_dataset(const std::filesystem::path& dir) {
  LoadedDataset out;
  out.dataset = load_annotations(dir / "annotations.json");
  for (const auto& e : out.dataset.entries) {
    if (e.file.empty()) throw ValidationError("image " + std::to_string(e.id) + " has no file");
    RgbImage img = read_ppm(dir / e.file);
    if (img.width != e.annotation.width || img.height != e.annotation.height) {
      throw ValidationError("image " + std::to_string(e.id) + ": file size does not match");
    }
    out.images.push_back(std::move(img));
  }
  return out;
}

std::vector<std::uint8_t> coco_rle_decode(const std::vector<std::uint32_t>& counts, int h, int w) {
  const std::size_t n = static_cast<std::size_t>(h) * w;
  std::vector<std::uint8_t> col_major;
  col_major.reserve(n);
  std::uint8_t v = 0;
  for (auto c : counts) {
    if (col_major.size() + c > n) throw InvalidArgument("RLE counts exceed the mask size");
    col_major.insert(col_major.end(), c, v);
    v ^= 1;
  }
  if (col_major.size() != n) throw InvalidArgument("RLE counts do not cover the mask");
  std::vector<std::uint8_t> out(n);
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) {
      out[static_cast<std::size_t>(y) * w + x] = col_major[static_cast<std::size_t>(x) * h + y];
    }
  }
  return out;
}

std::vector<std::uint32_t> coco_rle_counts_from_string(const std::string& s) {
  std::vector<std::int64_t> counts;
  std::size_t p = 0;
  while (p < s.size()) {
    std::int64_t x = 0;
    int k = 0;
    bool more = true;
    while (more) {
      if (p >= s.size()) throw InvalidArgument("truncated compressed RLE string");
      const std::int64_t c = static_cast<std::int64_t>(s[p]) - 48;
      x |= (c & 0x1f) << (5 * k);
      more = (c & 0x20) != 0;
      ++p;
      ++k;
      if (!more && (c & 0x10)) x |= -1LL << (5 * k);
    }
    if (counts.size() > 2) x += counts[counts.size() - 2];
    counts.push_back(x);
  }
  std::vector<std::uint32_t> out;
  for (auto c : counts) {
    if (c < 0) throw InvalidArgument("negative run in compressed RLE string");
    out.push_back(static_cast<std::uint32_t>(c));
  }
  return out;
}

std::vector<std::uint8_t> rasterize_polygon(const std::vector<double>& xy, int h, int w) {
  if (xy.size() < 6 || xy.size() % 2) {
    throw InvalidArgument("polygon needs at least three (x, y) vertices");
  }
  for (double v : xy) {
    if (!std::isfinite(v)) throw InvalidArgument("polygon has a non-finite vertex");
  }
  const std::size_t n = xy.size() / 2;
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(h) * w, 0);
  // Even-odd rule evaluated at pixel centers.
  for (int y = 0; y < h; ++y) {
    const double py = y + 0.5;
    std::vector<double> xs;
    for (std::size_t i = 0; i < n; ++i) {
      const double x0 = xy[2 * i], y0 = xy[2 * i + 1];
      const double x1 = xy[2 * ((i + 1) % n)], y1 = xy[2 * ((i + 1) % n) + 1];
      if ((y0 <= py) != (y1 <= py)) xs.push_back(x0 + (py - y0) * (x1 - x0) / (y1 - y0));
    }
    std::sort(xs.begin(), xs.end());
    for (std::size_t i = 0; i + 1 < xs.size(); i += 2) {
      const int xa = std::max(0, static_cast<int>(std::ceil(xs[i] - 0.5)));
      const int xb = std::min(w - 1, static_cast<int>(std::ceil(xs[i + 1] - 0.5)) - 1);
      for (int x = xa; x <= xb; ++x) mask[static_cast<std::size_t>(y) * w + x] = 1;
    }
  }
  return mask;
}

namespace {

std::vector<std::filesystem::path> coco_files(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& sub : {dir, dir / "annotations"}) {
    std::error_code ec;
    if (!std::filesystem::is_directory(sub, ec)) continue;
    for (const auto& entry : std::filesystem::directory_iterator(sub)) {
      if (entry.is_regular_file() && entry.path().extension() == ".json") {
        files.push_back(entry.path());
      }
    }
  }
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace

CocoImport coco_subset_import(const std::filesystem::path& dir) {
  const auto files = coco_files(dir);
  if (files.empty()) throw IoError("no COCO annotation file under " + dir.string());
  CocoImport out;
  struct ImageInfo {
    int width = 0, height = 0;
    std::string file;
  };
  std::map<std::int64_t, ImageInfo> images;
  std::map<std::int64_t, std::string> categories;
  std::map<std::int64_t, int> category_keypoints;
  std::vector<nlohmann::json> annotations;
  for (const auto& f : files) {
    nlohmann::json j;
    try {
      std::ifstream in(f);
      j = nlohmann::json::parse(in);
    } catch (const std::exception& err) {
      out.warnings.push_back(f.filename().string() + ": unreadable JSON (" + err.what() + ")");
      continue;
    }
    if (!j.is_object()) {
      out.warnings.push_back(f.filename().string() + ": not a COCO object");
      continue;
    }
    for (const auto& im : j.value("images", nlohmann::json::array())) {
      try {
        images[im.at("id").get<std::int64_t>()] = {im.at("width").get<int>(),
                                                   im.at("height").get<int>(),
                                                   im.value("file_name", std::string())};
      } catch (const std::exception&) {
        out.warnings.push_back(f.filename().string() + ": image entry without id/size skipped");
      }
    }
    for (const auto& c : j.value("categories", nlohmann::json::array())) {
      try {
        const auto id = c.at("id").get<std::int64_t>();
        categories[id] = c.at("name").get<std::string>();
        if (c.contains("keypoints")) category_keypoints[id] = static_cast<int>(c["keypoints"].size());
      } catch (const std::exception&) {
        out.warnings.push_back(f.filename().string() + ": category without id/name skipped");
      }
    }
    for (const auto& a : j.value("annotations", nlohmann::json::array())) annotations.push_back(a);
  }

  // Dense class ids: person first, then the rest by category id.
  std::map<std::int64_t, int> class_of;
  for (const auto& [id, name] : categories) {
    if (name == "person") {
      class_of[id] = kPersonClass;
      break;
    }
  }
  out.category_names.push_back("person");
  for (const auto& [id, name] : categories) {
    if (class_of.count(id)) continue;
    class_of[id] = static_cast<int>(out.category_names.size());
    out.category_names.push_back(name);
  }
  int num_keypoints = 0;
  for (const auto& [id, k] : category_keypoints) {
    if (class_of.count(id) && class_of[id] == kPersonClass) num_keypoints = k;
  }

  std::map<std::int64_t, std::size_t> entry_of;
  Dataset& ds = out.dataset;
  for (const auto& [id, info] : images) {
    entry_of[id] = ds.entries.size();
    DatasetEntry e;
    e.id = static_cast<int>(id);
    e.file = info.file;
    e.annotation.width = info.width;
    e.annotation.height = info.height;
    e.annotation.seg_map.assign(static_cast<std::size_t>(info.width) * info.height, 0);
    ds.entries.push_back(std::move(e));
  }

  for (std::size_t ai = 0; ai < annotations.size(); ++ai) {
    const auto& a = annotations[ai];
    const std::string where = "annotation " + std::to_string(ai);
    try {
      const auto image_id = a.at("image_id").get<std::int64_t>();
      const auto category_id = a.at("category_id").get<std::int64_t>();
      if (!entry_of.count(image_id)) {
        out.warnings.push_back(where + ": unknown image " + std::to_string(image_id));
        continue;
      }
      if (!class_of.count(category_id)) {
        out.warnings.push_back(where + ": unknown category " + std::to_string(category_id));
        continue;
      }
      auto& ann = ds.entries[entry_of[image_id]].annotation;
      const int cls = class_of[category_id];
      const auto& bbox = a.at("bbox");
      if (bbox.size() != 4) {
        out.warnings.push_back(where + ": bbox must have four values");
        continue;
      }
      const double bx = bbox[0].get<double>(), by = bbox[1].get<double>();
      const double bw = bbox[2].get<double>(), bh = bbox[3].get<double>();
      if (!(bw > 0 && bh > 0)) {
        out.warnings.push_back(where + ": degenerate bbox skipped");
        continue;
      }

      std::vector<std::uint8_t> mask;
      if (a.contains("segmentation")) {
        const auto& seg = a["segmentation"];
        try {
          if (seg.is_array()) {
            mask.assign(ann.seg_map.size(), 0);
            for (const auto& poly : seg) {
              const auto m = rasterize_polygon(poly.get<std::vector<double>>(), ann.height, ann.width);
              for (std::size_t i = 0; i < m.size(); ++i) mask[i] |= m[i];
            }
          } else if (seg.is_object()) {
            const auto size = seg.at("size").get<std::vector<int>>();
            if (size.size() != 2 || size[0] != ann.height || size[1] != ann.width) {
              throw InvalidArgument("RLE size does not match the image");
            }
            const auto& counts = seg.at("counts");
            mask = coco_rle_decode(counts.is_string()
                                       ? coco_rle_counts_from_string(counts.get<std::string>())
                                       : counts.get<std::vector<std::uint32_t>>(),
                                   ann.height, ann.width);
          }
        } catch (const std::exception& err) {
          out.warnings.push_back(where + ": mask not rasterized (" + err.what() + ")");
          mask.clear();
        }
      }
      for (std::size_t i = 0; i < mask.size(); ++i) {
        if (mask[i]) ann.seg_map[i] = static_cast<std::uint16_t>(cls + 1);
      }

      const int box_index = static_cast<int>(ann.boxes.size());
      ann.boxes.push_back({cls, {bx + bw / 2, by + bh / 2, bw, bh}});

      if (a.contains("keypoints")) {
        const auto kp = a["keypoints"].get<std::vector<double>>();
        const bool any = std::any_of(kp.begin(), kp.end(), [](double v) { return v != 0; });
        if (cls != kPersonClass) {
          if (any) out.warnings.push_back(where + ": keypoints on a non-person box ignored");
        } else if (any) {
          if (static_cast<int>(kp.size()) != 3 * num_keypoints) {
            out.warnings.push_back(where + ": keypoint count does not match the category");
          } else {
            PersonAnnotation person;
            person.box_index = box_index;
            for (int k = 0; k < num_keypoints; ++k) {
              const double x = std::clamp(kp[3 * k], 0.0, static_cast<double>(ann.width));
              const double y = std::clamp(kp[3 * k + 1], 0.0, static_cast<double>(ann.height));
              person.keypoints.push_back({x, y, kp[3 * k + 2] > 0});
            }
            ann.persons.push_back(std::move(person));
          }
        }
      }
    } catch (const std::exception& err) {
      out.warnings.push_back(where + ": skipped (" + err.what() + ")");
    }
  }
  ds.num_classes = static_cast<int>(out.category_names.size());
  ds.num_keypoints = num_keypoints;
  return out;
}

}  // namespace mcn
