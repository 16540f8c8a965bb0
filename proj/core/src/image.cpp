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

#include "mcn/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

namespace mcn {

void write_ppm(const RgbImage& image, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()),
            static_cast<std::streamsize>(image.pixels.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

namespace {

// Next whitespace-delimited header token, skipping '#' comments.
std::string header_token(std::istream& in) {
  std::string tok;
  while (in) {
    const int c = in.get();
    if (c == EOF) break;
    if (c == '#') {
      std::string ignored;
      std::getline(in, ignored);
      if (!tok.empty()) break;
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  return tok;
}

int header_int(std::istream& in, const std::filesystem::path& path) {
  const std::string tok = header_token(in);
  try {
    std::size_t used = 0;
    const int v = std::stoi(tok, &used);
    if (used != tok.size() || v <= 0) throw FormatError("");
    return v;
  } catch (const std::exception&) {
    throw FormatError(path.string() + ": bad PPM header field '" + tok + "'");
  }
}

}  // namespace

RgbImage read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  if (header_token(in) != "P6") throw FormatError(path.string() + ": not a binary PPM (P6)");
  const int w = header_int(in, path);
  const int h = header_int(in, path);
  const int maxval = header_int(in, path);
  if (maxval != 255) throw FormatError(path.string() + ": only maxval 255 is supported");
  RgbImage img(w, h);
  in.read(reinterpret_cast<char*>(img.pixels.data()),
          static_cast<std::streamsize>(img.pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.pixels.size())) {
    throw TruncatedFileError(path.string() + ": pixel data is truncated");
  }
  return img;
}

Tensor<float> image_to_tensor(const RgbImage& image) {
  const std::size_t plane = static_cast<std::size_t>(image.width) * image.height;
  std::vector<float> data(3 * plane);
  for (std::size_t i = 0; i < plane; ++i) {
    for (std::size_t c = 0; c < 3; ++c) data[c * plane + i] = image.pixels[i * 3 + c] / 255.0f;
  }
  return Tensor<float>(Shape{3, image.height, image.width}, std::move(data));
}

RgbImage tensor_to_image(const Tensor<float>& chw) {
  if (chw.rank() != 3 || chw.dim(0) != 3) {
    throw InvalidArgument("tensor_to_image: expected [3,H,W], got " + shape_to_string(chw.shape()));
  }
  RgbImage img(chw.dim(2), chw.dim(1));
  const std::size_t plane = static_cast<std::size_t>(img.width) * img.height;
  const auto d = chw.data();
  for (std::size_t i = 0; i < plane; ++i) {
    for (std::size_t c = 0; c < 3; ++c) {
      const float v = std::clamp(d[c * plane + i], 0.f, 1.f);
      img.pixels[i * 3 + c] = static_cast<std::uint8_t>(std::lround(v * 255.f));
    }
  }
  return img;
}

template <typename T>
Tensor<T> stack_images(const std::vector<const Tensor<float>*>& images) {
  if (images.empty()) throw InvalidArgument("stack_images: no images");
  const Shape& s = images[0]->shape();
  std::vector<T> data;
  data.reserve(images.size() * static_cast<std::size_t>(images[0]->numel()));
  for (const auto* img : images) {
    if (img->shape() != s) throw InvalidArgument("stack_images: images differ in shape");
    data.insert(data.end(), img->data().begin(), img->data().end());
  }
  return Tensor<T>(Shape{static_cast<int>(images.size()), s[0], s[1], s[2]}, std::move(data));
}

template Tensor<float> stack_images(const std::vector<const Tensor<float>*>&);
template Tensor<double> stack_images(const std::vector<const Tensor<float>*>&);

}  // namespace mcn
