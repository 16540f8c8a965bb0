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

#include "overlay.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "mcn/synth.hpp"

namespace mcn::cli {

const std::array<std::array<std::uint8_t, 3>, 16> kPalette = {{{0, 0, 0},
                                                               {230, 25, 75},
                                                               {60, 180, 75},
                                                               {0, 130, 200},
                                                               {255, 225, 25},
                                                               {145, 30, 180},
                                                               {70, 240, 240},
                                                               {245, 130, 48},
                                                               {240, 50, 230},
                                                               {210, 245, 60},
                                                               {250, 190, 212},
                                                               {0, 128, 128},
                                                               {170, 110, 40},
                                                               {128, 0, 0},
                                                               {128, 128, 0},
                                                               {255, 255, 255}}};

nlohmann::json predictions_to_json(const ImageResult& result, const HeadConfig& heads, int width,
                                   int height) {
  nlohmann::json j;
  j["width"] = width;
  j["height"] = height;
  j["tasks"] = heads.tasks.to_string();
  j["num_classes"] = heads.num_classes;
  auto dets = nlohmann::json::array();
  for (const auto& d : result.detections) {
    dets.push_back({{"class", d.cls},
                    {"score", d.score},
                    {"cx", d.box.cx},
                    {"cy", d.box.cy},
                    {"w", d.box.w},
                    {"h", d.box.h}});
  }
  j["detections"] = dets;
  auto poses = nlohmann::json::array();
  for (const auto& p : result.poses) {
    auto joints = nlohmann::json::array();
    for (const auto& jt : p.joints) {
      joints.push_back({{"x", jt.x}, {"y", jt.y}, {"confidence", jt.confidence}});
    }
    poses.push_back({{"cx", p.person.box.cx},
                     {"cy", p.person.box.cy},
                     {"score", p.person.score},
                     {"joints", joints}});
  }
  j["poses"] = poses;
  if (!result.seg.empty()) {
    auto rle = nlohmann::json::array();
    for (const auto& [id, n] : rle_encode(result.seg)) rle.push_back({id, n});
    j["seg"] = {{"resolution", result.seg_resolution}, {"rle", rle}};
  } else {
    j["seg"] = nullptr;
  }
  return j;
}

namespace {

using Color = std::array<std::uint8_t, 3>;

void put(RgbImage& img, int x, int y, const Color& c) {
  if (x < 0 || y < 0 || x >= img.width || y >= img.height) return;
  std::copy(c.begin(), c.end(), img.at(x, y));
}

void line(RgbImage& img, int x0, int y0, int x1, int y1, const Color& c) {
  const int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
  const int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  for (;;) {
    put(img, x0, y0, c);
    if (x0 == x1 && y0 == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

int pixel(double v) { return static_cast<int>(std::floor(v)); }

}  // namespace

RgbImage render_overlay(const RgbImage& image, const nlohmann::json& predictions) {
  RgbImage out = image;
  const auto& seg = predictions.at("seg");
  if (!seg.is_null()) {
    const int s = seg.at("resolution").get<int>();
    std::vector<std::pair<std::uint16_t, std::uint32_t>> runs;
    for (const auto& r : seg.at("rle")) {
      runs.emplace_back(r.at(0).get<std::uint16_t>(), r.at(1).get<std::uint32_t>());
    }
    const auto labels = rle_decode(runs, static_cast<std::size_t>(s) * s);
    for (int y = 0; y < out.height; ++y) {
      const int sy = std::min(s - 1, y * s / out.height);
      for (int x = 0; x < out.width; ++x) {
        const int sx = std::min(s - 1, x * s / out.width);
        const auto& c = kPalette[labels[static_cast<std::size_t>(sy) * s + sx] % 16];
        auto* px = out.at(x, y);
        for (int k = 0; k < 3; ++k) px[k] = static_cast<std::uint8_t>((px[k] + c[k] + 1) / 2);
      }
    }
  }
  for (const auto& d : predictions.at("detections")) {
    const auto& c = kPalette[static_cast<std::size_t>(d.at("class").get<int>() + 1) % 16];
    const double cx = d.at("cx").get<double>(), cy = d.at("cy").get<double>();
    const double w = d.at("w").get<double>(), h = d.at("h").get<double>();
    const int x0 = pixel(cx - w / 2), x1 = std::max(x0, pixel(cx + w / 2 - 1e-9));
    const int y0 = pixel(cy - h / 2), y1 = std::max(y0, pixel(cy + h / 2 - 1e-9));
    line(out, x0, y0, x1, y0, c);
    line(out, x0, y1, x1, y1, c);
    line(out, x0, y0, x0, y1, c);
    line(out, x1, y0, x1, y1, c);
  }
  const Color white{255, 255, 255};
  for (const auto& p : predictions.at("poses")) {
    const auto& c = kPalette[static_cast<std::size_t>(kPersonClass + 1) % 16];
    const int cx = pixel(p.at("cx").get<double>()), cy = pixel(p.at("cy").get<double>());
    for (const auto& jt : p.at("joints")) {
      line(out, cx, cy, pixel(jt.at("x").get<double>()), pixel(jt.at("y").get<double>()), c);
    }
    for (const auto& jt : p.at("joints")) {
      const int jx = pixel(jt.at("x").get<double>()), jy = pixel(jt.at("y").get<double>());
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) put(out, jx + dx, jy + dy, white);
      }
    }
  }
  return out;
}

}  // namespace mcn::cli
