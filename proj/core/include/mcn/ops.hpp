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

#include <vector>

#include "mcn/tensor.hpp"

namespace mcn {

// Batch-norm running statistics (buffers, not trainable).
template <typename T>
struct RunningStats {
  Tensor<T> mean;
  Tensor<T> var;
};

inline constexpr double kBatchNormMomentum = 0.1;
inline constexpr double kBatchNormEps = 1e-5;
// Probabilities produced by sigmoid/softmax are kept inside [eps, 1 - eps].
inline constexpr double kProbEps = 1e-6;

// Intra-op parallelism for data-parallel loops. Strict mode pins it to 1.
void set_num_threads(int threads);
int num_threads();
void set_strict_deterministic(bool strict);
bool strict_deterministic();

namespace ops {

// input [N,Cin,H,W], weight [Cout,Cin,k,k] with k odd, bias [Cout] or
// undefined. Output [N,Cout,(H+2p-k)/s+1,(W+2p-k)/s+1].
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                 int stride, int pad);

// Gradient at exactly 0 is 0.
template <typename T>
Tensor<T> relu(const Tensor<T>& input);

// 1 / (1 + exp(-x)) clamped to [kProbEps, 1 - kProbEps]; zero gradient where
// the clamp is active.
template <typename T>
Tensor<T> sigmoid(const Tensor<T>& input);

// Per-channel normalization over (N, H, W). Train mode uses batch statistics
// and updates `stats` by EMA (unbiased variance); eval mode uses `stats`.
template <typename T>
Tensor<T> batch_norm2d(const Tensor<T>& input, const Tensor<T>& gamma, const Tensor<T>& beta,
                       RunningStats<T>& stats, Mode mode, double momentum = kBatchNormMomentum,
                       double eps = kBatchNormEps);

// gamma[c] * x + beta[c]; the batch-size-1 substitute for batch_norm2d.
template <typename T>
Tensor<T> channel_affine(const Tensor<T>& input, const Tensor<T>& gamma, const Tensor<T>& beta);

// 3x3 max over each neighbourhood, padded with -inf; shape preserved.
template <typename T>
Tensor<T> max_pool2d_3x3_same(const Tensor<T>& input);

// Half-pixel (align_corners = false) bilinear resize to a size >= input.
template <typename T>
Tensor<T> bilinear_upsample(const Tensor<T>& input, int out_h, int out_w);

// Softmax over the channel axis of [N,C,H,W] with max subtraction. Not
// clamped, so channel sums stay at 1; consumers clamp before taking logs.
template <typename T>
Tensor<T> softmax_channels(const Tensor<T>& input);

// Channels [begin, begin + count) of an [N,C,H,W] tensor.
template <typename T>
Tensor<T> slice_channels(const Tensor<T>& input, int begin, int count);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor);

// Sum of all elements as a scalar.
template <typename T>
Tensor<T> sum(const Tensor<T>& a);

// Sum of weights[i] * terms[i] over scalar terms, accumulated left to right.
template <typename T>
Tensor<T> weighted_sum(const std::vector<Tensor<T>>& terms, const std::vector<T>& weights);

}  // namespace ops
}  // namespace mcn
