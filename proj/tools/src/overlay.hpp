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

#include <array>
#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "mcn/codec.hpp"
#include "mcn/image.hpp"
#include "mcn/net.hpp"
#include "mcn/trainer.hpp"

namespace mcn::cli {

// Colour of seg label l (0 = background) is kPalette[l % 16]; a box of
// class c uses the colour of its label c + 1.
extern const std::array<std::array<std::uint8_t, 3>, 16> kPalette;

// Prediction file: image size, detections, poses and the RLE seg map.
nlohmann::json predictions_to_json(const ImageResult& result, const HeadConfig& heads, int width,
                                   int height);

// Pure function of the image and the prediction JSON.
RgbImage render_overlay(const RgbImage& image, const nlohmann::json& predictions);

}  // namespace mcn::cli
