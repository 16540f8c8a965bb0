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
#include <vector>

#include "mcn/tensor.hpp"

namespace mcn {

// 8-bit interleaved RGB raster.
struct RgbImage {
  int width = 0, height = 0;
  std::vector<std::uint8_t> pixels;  // height * width * 3

  RgbImage() = default;
  RgbImage(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, 0) {}

  std::uint8_t* at(int x, int y) {
    return pixels.data() + (static_cast<std::size_t>(y) * width + x) * 3;
  }
  const std::uint8_t* at(int x, int y) const {
    return pixels.data() + (static_cast<std::size_t>(y) * width + x) * 3;
  }
  bool operator==(const RgbImage&) const = default;
};

// Binary P6 with maxval 255.
void write_ppm(const RgbImage& image, const std::filesystem::path& path);
RgbImage read_ppm(const std::filesystem::path& path);

// [3,H,W] in [0,1] and back (round to nearest, clamped).
Tensor<float> image_to_tensor(const RgbImage& image);
RgbImage tensor_to_image(const Tensor<float>& chw);

// Stacks [3,H,W] images into [N,3,H,W].
template <typename T>
Tensor<T> stack_images(const std::vector<const Tensor<float>*>& images);

}  // namespace mcn
