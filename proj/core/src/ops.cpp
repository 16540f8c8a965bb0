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

#include "mcn/ops.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <memory>
#include <thread>

#include "kernels.hpp"

namespace mcn {

namespace {

std::atomic<int> g_threads{1};
std::atomic<bool> g_strict{false};

// Runs fn(i) for i in [0, count). Work items must write disjoint memory.
template <typename Fn>
void parallel_for(int count, Fn&& fn) {
  const int threads = std::min(num_threads(), count);
  if (threads <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      for (int i = t; i < count; i += threads) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

void require_rank(const char* op, const Shape& shape, std::size_t rank) {
  if (shape.size() != rank) {
    throw InvalidArgument(std::string(op) + ": expected rank " + std::to_string(rank) +
                          ", got shape " + shape_to_string(shape));
  }
}

template <typename T>
bool wants_grad(const std::shared_ptr<detail::TensorImpl<T>>& impl) {
  return impl && impl->requires_grad;
}

}  // namespace

void set_num_threads(int threads) { g_threads = std::max(1, threads); }
int num_threads() { return g_strict ? 1 : g_threads.load(); }
void set_strict_deterministic(bool strict) { g_strict = strict; }
bool strict_deterministic() { return g_strict; }

namespace ops {

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                 int stride, int pad) {
  require_rank("conv2d input", input.shape(), 4);
  require_rank("conv2d weight", weight.shape(), 4);
  const int n = input.dim(0), cin = input.dim(1), h = input.dim(2), w = input.dim(3);
  const int cout = weight.dim(0), k = weight.dim(2);
  if (weight.dim(1) != cin) {
    throw InvalidArgument("conv2d: input has " + std::to_string(cin) +
                          " channels but weight expects " + std::to_string(weight.dim(1)));
  }
  if (weight.dim(3) != k || k % 2 == 0) throw InvalidArgument("conv2d: kernel must be square and odd");
  if (stride < 1 || pad < 0) throw InvalidArgument("conv2d: stride >= 1 and pad >= 0 required");
  if (h + 2 * pad < k || w + 2 * pad < k) throw InvalidArgument("conv2d: input smaller than kernel");
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != cout)) {
    throw InvalidArgument("conv2d: bias shape " + shape_to_string(bias.shape()));
  }

  const kernels::ConvGeometry g{cin, h, w, k, stride, pad, (h + 2 * pad - k) / stride + 1,
                                (w + 2 * pad - k) / stride + 1};
  const int plane = g.out_h * g.out_w;
  const int patch = cin * k * k;
  const bool pointwise = k == 1 && stride == 1 && pad == 0;
  const bool recording = grad_enabled() && (input.requires_grad() || weight.requires_grad() ||
                         (bias.defined() && bias.requires_grad()));
  const std::size_t in_image = static_cast<std::size_t>(cin) * h * w;
  const std::size_t out_image = static_cast<std::size_t>(cout) * plane;
  const std::size_t cols_image = static_cast<std::size_t>(patch) * plane;

  std::vector<T> out(static_cast<std::size_t>(n) * out_image, T(0));
  // Unrolled patches are kept for the backward pass when recording.
  auto saved_cols = std::make_shared<std::vector<T>>();
  if (recording && !pointwise) saved_cols->resize(static_cast<std::size_t>(n) * cols_image);

  const T* x = input.data().data();
  const T* wt = weight.data().data();
  const T* b = bias.defined() ? bias.data().data() : nullptr;
  parallel_for(n, [&](int i) {
    const T* image = x + i * in_image;
    const T* cols = image;
    std::vector<T> scratch;
    if (!pointwise) {
      T* dst;
      if (recording) {
        dst = saved_cols->data() + i * cols_image;
      } else {
        scratch.resize(cols_image);
        dst = scratch.data();
      }
      kernels::im2col(g, image, dst);
      cols = dst;
    }
    T* y = out.data() + i * out_image;
    kernels::gemm_nn(cout, plane, patch, wt, cols, y);
    if (b) {
      for (int c = 0; c < cout; ++c) {
        T* row = y + static_cast<std::size_t>(c) * plane;
        for (int p = 0; p < plane; ++p) row[p] += b[c];
      }
    }
  });

  auto in_impl = input.impl();
  auto w_impl = weight.impl();
  auto b_impl = bias.defined() ? bias.impl() : nullptr;
  std::vector<Tensor<T>> inputs{input, weight};
  if (bias.defined()) inputs.push_back(bias);
  return detail::record<T>(
      Shape{n, cout, g.out_h, g.out_w}, std::move(out), "conv2d", std::move(inputs),
      [=](const detail::TensorImpl<T>& o) {
        const T* dy = o.grad.data();
        auto cols_of = [&](int i) -> const T* {
          return pointwise ? in_impl->data.data() + i * in_image
                           : saved_cols->data() + i * cols_image;
        };
        if (wants_grad(w_impl)) {
          T* dw = w_impl->grad_buffer().data();
          for (int i = 0; i < n; ++i) {
            kernels::gemm_nt(cout, patch, plane, dy + i * out_image, cols_of(i), dw);
          }
        }
        if (wants_grad(b_impl)) {
          T* db = b_impl->grad_buffer().data();
          for (int i = 0; i < n; ++i) {
            for (int c = 0; c < cout; ++c) {
              const T* row = dy + i * out_image + static_cast<std::size_t>(c) * plane;
              T acc = T(0);
              for (int p = 0; p < plane; ++p) acc += row[p];
              db[c] += acc;
            }
          }
        }
        if (wants_grad(in_impl)) {
          T* dx = in_impl->grad_buffer().data();
          const T* wd = w_impl->data.data();
          std::vector<T> dcols(pointwise ? 0 : cols_image);
          for (int i = 0; i < n; ++i) {
            if (pointwise) {
              kernels::gemm_tn(patch, plane, cout, wd, dy + i * out_image, dx + i * in_image);
            } else {
              std::fill(dcols.begin(), dcols.end(), T(0));
              kernels::gemm_tn(patch, plane, cout, wd, dy + i * out_image, dcols.data());
              kernels::col2im(g, dcols.data(), dx + i * in_image);
            }
          }
        }
      });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& input) {
  std::vector<T> out(input.data().begin(), input.data().end());
  for (T& v : out) v = v < T(0) ? T(0) : v;  // NaN passes through
  auto in_impl = input.impl();
  return detail::record<T>(input.shape(), std::move(out), "relu", {input},
                           [in_impl](const detail::TensorImpl<T>& o) {
                             auto& dx = in_impl->grad_buffer();
                             for (std::size_t i = 0; i < dx.size(); ++i) {
                               if (in_impl->data[i] > T(0)) dx[i] += o.grad[i];
                             }
                           });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& input) {
  const T lo = T(kProbEps), hi = T(1) - T(kProbEps);
  std::vector<T> out(input.data().size());
  const auto x = input.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const T p = T(1) / (T(1) + std::exp(-x[i]));
    out[i] = std::clamp(p, lo, hi);
  }
  auto in_impl = input.impl();
  return detail::record<T>(input.shape(), std::move(out), "sigmoid", {input},
                           [in_impl, lo, hi](const detail::TensorImpl<T>& o) {
                             auto& dx = in_impl->grad_buffer();
                             for (std::size_t i = 0; i < dx.size(); ++i) {
                               const T p = o.data[i];
                               if (p > lo && p < hi) dx[i] += o.grad[i] * p * (T(1) - p);
                             }
                           });
}

template <typename T>
Tensor<T> batch_norm2d(const Tensor<T>& input, const Tensor<T>& gamma, const Tensor<T>& beta,
                       RunningStats<T>& stats, Mode mode, double momentum, double eps) {
  require_rank("batch_norm2d", input.shape(), 4);
  const int n = input.dim(0), c = input.dim(1), hw = input.dim(2) * input.dim(3);
  if (gamma.numel() != c || beta.numel() != c || stats.mean.numel() != c ||
      stats.var.numel() != c) {
    throw InvalidArgument("batch_norm2d: parameter size does not match channel count");
  }
  const std::int64_t count = static_cast<std::int64_t>(n) * hw;
  if (mode == Mode::kTrain && count < 2) {
    throw DegenerateVarianceError("batch_norm2d: train mode needs N*H*W >= 2 per channel");
  }
  const auto x = input.data();
  const auto g = gamma.data();
  const auto bt = beta.data();
  auto xhat = std::make_shared<std::vector<T>>(x.size());
  auto inv_std = std::make_shared<std::vector<T>>(static_cast<std::size_t>(c));
  std::vector<T> out(x.size());
  auto rm = stats.mean.mutable_data();
  auto rv = stats.var.mutable_data();
  for (int ch = 0; ch < c; ++ch) {
    T mean, var;
    if (mode == Mode::kTrain) {
      double acc = 0;
      for (int i = 0; i < n; ++i) {
        const T* p = x.data() + (static_cast<std::size_t>(i) * c + ch) * hw;
        for (int j = 0; j < hw; ++j) acc += p[j];
      }
      mean = static_cast<T>(acc / static_cast<double>(count));
      double sq = 0;
      for (int i = 0; i < n; ++i) {
        const T* p = x.data() + (static_cast<std::size_t>(i) * c + ch) * hw;
        for (int j = 0; j < hw; ++j) {
          const double d = static_cast<double>(p[j]) - static_cast<double>(mean);
          sq += d * d;
        }
      }
      var = static_cast<T>(sq / static_cast<double>(count));
      const double unbiased = sq / static_cast<double>(count - 1);
      rm[ch] = static_cast<T>((1.0 - momentum) * rm[ch] + momentum * mean);
      rv[ch] = static_cast<T>((1.0 - momentum) * rv[ch] + momentum * unbiased);
    } else {
      mean = rm[ch];
      var = rv[ch];
    }
    const T istd = T(1) / std::sqrt(var + static_cast<T>(eps));
    (*inv_std)[ch] = istd;
    for (int i = 0; i < n; ++i) {
      const std::size_t base = (static_cast<std::size_t>(i) * c + ch) * hw;
      for (int j = 0; j < hw; ++j) {
        const T xh = (x[base + j] - mean) * istd;
        (*xhat)[base + j] = xh;
        out[base + j] = g[ch] * xh + bt[ch];
      }
    }
  }
  auto in_impl = input.impl();
  auto g_impl = gamma.impl();
  auto b_impl = beta.impl();
  const bool train = mode == Mode::kTrain;
  return detail::record<T>(
      input.shape(), std::move(out), "batch_norm2d", {input, gamma, beta},
      [=](const detail::TensorImpl<T>& o) {
        const auto& dy = o.grad;
        for (int ch = 0; ch < c; ++ch) {
          T sum_dy = T(0), sum_dy_xhat = T(0);
          for (int i = 0; i < n; ++i) {
            const std::size_t base = (static_cast<std::size_t>(i) * c + ch) * hw;
            for (int j = 0; j < hw; ++j) {
              sum_dy += dy[base + j];
              sum_dy_xhat += dy[base + j] * (*xhat)[base + j];
            }
          }
          if (wants_grad(g_impl)) g_impl->grad_buffer()[ch] += sum_dy_xhat;
          if (wants_grad(b_impl)) b_impl->grad_buffer()[ch] += sum_dy;
          if (!wants_grad(in_impl)) continue;
          auto& dx = in_impl->grad_buffer();
          const T gm = g_impl->data[ch];
          const T istd = (*inv_std)[ch];
          const T m = static_cast<T>(count);
          for (int i = 0; i < n; ++i) {
            const std::size_t base = (static_cast<std::size_t>(i) * c + ch) * hw;
            for (int j = 0; j < hw; ++j) {
              if (train) {
                dx[base + j] += gm * istd / m *
                                (m * dy[base + j] - sum_dy - (*xhat)[base + j] * sum_dy_xhat);
              } else {
                dx[base + j] += gm * istd * dy[base + j];
              }
            }
          }
        }
      });
}

template <typename T>
Tensor<T> channel_affine(const Tensor<T>& input, const Tensor<T>& gamma, const Tensor<T>& beta) {
  require_rank("channel_affine", input.shape(), 4);
  const int n = input.dim(0), c = input.dim(1), hw = input.dim(2) * input.dim(3);
  if (gamma.numel() != c || beta.numel() != c) {
    throw InvalidArgument("channel_affine: parameter size does not match channel count");
  }
  const auto x = input.data();
  std::vector<T> out(x.size());
  for (int i = 0; i < n; ++i) {
    for (int ch = 0; ch < c; ++ch) {
      const std::size_t base = (static_cast<std::size_t>(i) * c + ch) * hw;
      for (int j = 0; j < hw; ++j) out[base + j] = gamma.data()[ch] * x[base + j] + beta.data()[ch];
    }
  }
  auto in_impl = input.impl();
  auto g_impl = gamma.impl();
  auto b_impl = beta.impl();
  return detail::record<T>(input.shape(), std::move(out), "channel_affine", {input, gamma, beta},
                           [=](const detail::TensorImpl<T>& o) {
                             for (int i = 0; i < n; ++i) {
                               for (int ch = 0; ch < c; ++ch) {
                                 const std::size_t base = (static_cast<std::size_t>(i) * c + ch) * hw;
                                 for (int j = 0; j < hw; ++j) {
                                   const T d = o.grad[base + j];
                                   if (wants_grad(g_impl)) g_impl->grad_buffer()[ch] += d * in_impl->data[base + j];
                                   if (wants_grad(b_impl)) b_impl->grad_buffer()[ch] += d;
                                   if (wants_grad(in_impl)) in_impl->grad_buffer()[base + j] += d * g_impl->data[ch];
                                 }
                               }
                             }
                           });
}

template <typename T>
Tensor<T> max_pool2d_3x3_same(const Tensor<T>& input) {
  require_rank("max_pool2d_3x3_same", input.shape(), 4);
  const int planes = input.dim(0) * input.dim(1), h = input.dim(2), w = input.dim(3);
  const auto x = input.data();
  std::vector<T> out(x.size());
  auto argmax = std::make_shared<std::vector<std::size_t>>(x.size());
  for (int p = 0; p < planes; ++p) {
    const std::size_t base = static_cast<std::size_t>(p) * h * w;
    for (int y = 0; y < h; ++y) {
      for (int xx = 0; xx < w; ++xx) {
        T best = -std::numeric_limits<T>::infinity();
        std::size_t best_idx = base + static_cast<std::size_t>(y) * w + xx;
        for (int dy = -1; dy <= 1; ++dy) {
          const int yy = y + dy;
          if (yy < 0 || yy >= h) continue;
          for (int dx = -1; dx <= 1; ++dx) {
            const int xs = xx + dx;
            if (xs < 0 || xs >= w) continue;
            const std::size_t idx = base + static_cast<std::size_t>(yy) * w + xs;
            if (x[idx] > best) {
              best = x[idx];
              best_idx = idx;
            }
          }
        }
        out[base + static_cast<std::size_t>(y) * w + xx] = best;
        (*argmax)[base + static_cast<std::size_t>(y) * w + xx] = best_idx;
      }
    }
  }
  auto in_impl = input.impl();
  return detail::record<T>(input.shape(), std::move(out), "max_pool2d_3x3_same", {input},
                           [in_impl, argmax](const detail::TensorImpl<T>& o) {
                             auto& dx = in_impl->grad_buffer();
                             for (std::size_t i = 0; i < o.grad.size(); ++i) dx[(*argmax)[i]] += o.grad[i];
                           });
}

namespace {

// Source index pair and weight of the upper neighbour for one output line.
struct LerpTap {
  int lo, hi;
  double frac;
};

std::vector<LerpTap> half_pixel_taps(int in, int out) {
  std::vector<LerpTap> taps(static_cast<std::size_t>(out));
  const double ratio = static_cast<double>(in) / out;
  for (int o = 0; o < out; ++o) {
    double src = (o + 0.5) * ratio - 0.5;
    if (src < 0) src = 0;
    int lo = static_cast<int>(std::floor(src));
    if (lo > in - 1) lo = in - 1;
    const int hi = std::min(lo + 1, in - 1);
    taps[static_cast<std::size_t>(o)] = {lo, hi, src - lo};
  }
  return taps;
}

}  // namespace

template <typename T>
Tensor<T> bilinear_upsample(const Tensor<T>& input, int out_h, int out_w) {
  require_rank("bilinear_upsample", input.shape(), 4);
  const int planes = input.dim(0) * input.dim(1), h = input.dim(2), w = input.dim(3);
  if (out_h <= 0 || out_w <= 0) throw InvalidArgument("bilinear_upsample: zero output size");
  if (out_h < h || out_w < w) throw InvalidArgument("bilinear_upsample: output smaller than input");
  auto ty = std::make_shared<std::vector<LerpTap>>(half_pixel_taps(h, out_h));
  auto tx = std::make_shared<std::vector<LerpTap>>(half_pixel_taps(w, out_w));
  const auto x = input.data();
  std::vector<T> out(static_cast<std::size_t>(planes) * out_h * out_w);
  for (int p = 0; p < planes; ++p) {
    const T* src = x.data() + static_cast<std::size_t>(p) * h * w;
    T* dst = out.data() + static_cast<std::size_t>(p) * out_h * out_w;
    for (int oy = 0; oy < out_h; ++oy) {
      const auto& a = (*ty)[static_cast<std::size_t>(oy)];
      const T fy = static_cast<T>(a.frac);
      const T* r0 = src + static_cast<std::size_t>(a.lo) * w;
      const T* r1 = src + static_cast<std::size_t>(a.hi) * w;
      for (int ox = 0; ox < out_w; ++ox) {
        const auto& b = (*tx)[static_cast<std::size_t>(ox)];
        const T fx = static_cast<T>(b.frac);
        const T top = r0[b.lo] + fx * (r0[b.hi] - r0[b.lo]);
        const T bot = r1[b.lo] + fx * (r1[b.hi] - r1[b.lo]);
        dst[static_cast<std::size_t>(oy) * out_w + ox] = top + fy * (bot - top);
      }
    }
  }
  Shape shape = input.shape();
  shape[2] = out_h;
  shape[3] = out_w;
  auto in_impl = input.impl();
  return detail::record<T>(
      std::move(shape), std::move(out), "bilinear_upsample", {input},
      [=](const detail::TensorImpl<T>& o) {
        auto& dx = in_impl->grad_buffer();
        for (int p = 0; p < planes; ++p) {
          T* gsrc = dx.data() + static_cast<std::size_t>(p) * h * w;
          const T* gdst = o.grad.data() + static_cast<std::size_t>(p) * out_h * out_w;
          for (int oy = 0; oy < out_h; ++oy) {
            const auto& a = (*ty)[static_cast<std::size_t>(oy)];
            const T fy = static_cast<T>(a.frac);
            for (int ox = 0; ox < out_w; ++ox) {
              const auto& b = (*tx)[static_cast<std::size_t>(ox)];
              const T fx = static_cast<T>(b.frac);
              const T d = gdst[static_cast<std::size_t>(oy) * out_w + ox];
              gsrc[static_cast<std::size_t>(a.lo) * w + b.lo] += d * (T(1) - fy) * (T(1) - fx);
              gsrc[static_cast<std::size_t>(a.lo) * w + b.hi] += d * (T(1) - fy) * fx;
              gsrc[static_cast<std::size_t>(a.hi) * w + b.lo] += d * fy * (T(1) - fx);
              gsrc[static_cast<std::size_t>(a.hi) * w + b.hi] += d * fy * fx;
            }
          }
        }
      });
}

template <typename T>
Tensor<T> softmax_channels(const Tensor<T>& input) {
  require_rank("softmax_channels", input.shape(), 4);
  const int n = input.dim(0), c = input.dim(1), hw = input.dim(2) * input.dim(3);
  if (c < 1) throw InvalidArgument("softmax_channels: need at least one channel");
  const auto x = input.data();
  std::vector<T> out(x.size());
  for (int i = 0; i < n; ++i) {
    const std::size_t base = static_cast<std::size_t>(i) * c * hw;
    for (int j = 0; j < hw; ++j) {
      T mx = x[base + j];
      for (int ch = 1; ch < c; ++ch) mx = std::max(mx, x[base + static_cast<std::size_t>(ch) * hw + j]);
      T total = T(0);
      for (int ch = 0; ch < c; ++ch) {
        const std::size_t idx = base + static_cast<std::size_t>(ch) * hw + j;
        out[idx] = std::exp(x[idx] - mx);
        total += out[idx];
      }
      for (int ch = 0; ch < c; ++ch) out[base + static_cast<std::size_t>(ch) * hw + j] /= total;
    }
  }
  auto in_impl = input.impl();
  return detail::record<T>(input.shape(), std::move(out), "softmax_channels", {input},
                           [=](const detail::TensorImpl<T>& o) {
                             auto& dx = in_impl->grad_buffer();
                             for (int i = 0; i < n; ++i) {
                               const std::size_t base = static_cast<std::size_t>(i) * c * hw;
                               for (int j = 0; j < hw; ++j) {
                                 T dot = T(0);
                                 for (int ch = 0; ch < c; ++ch) {
                                   const std::size_t idx = base + static_cast<std::size_t>(ch) * hw + j;
                                   dot += o.grad[idx] * o.data[idx];
                                 }
                                 for (int ch = 0; ch < c; ++ch) {
                                   const std::size_t idx = base + static_cast<std::size_t>(ch) * hw + j;
                                   dx[idx] += o.data[idx] * (o.grad[idx] - dot);
                                 }
                               }
                             }
                           });
}

template <typename T>
Tensor<T> slice_channels(const Tensor<T>& input, int begin, int count) {
  require_rank("slice_channels", input.shape(), 4);
  const int n = input.dim(0), c = input.dim(1), hw = input.dim(2) * input.dim(3);
  if (begin < 0 || count < 1 || begin + count > c) {
    throw InvalidArgument("slice_channels: range [" + std::to_string(begin) + ", " +
                          std::to_string(begin + count) + ") outside " + std::to_string(c) +
                          " channels");
  }
  const auto x = input.data();
  std::vector<T> out(static_cast<std::size_t>(n) * count * hw);
  for (int i = 0; i < n; ++i) {
    const T* src = x.data() + (static_cast<std::size_t>(i) * c + begin) * hw;
    std::copy(src, src + static_cast<std::size_t>(count) * hw,
              out.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(i) * count * hw));
  }
  auto in_impl = input.impl();
  return detail::record<T>(Shape{n, count, input.dim(2), input.dim(3)}, std::move(out),
                           "slice_channels", {input}, [=](const detail::TensorImpl<T>& o) {
                             auto& dx = in_impl->grad_buffer();
                             for (int i = 0; i < n; ++i) {
                               T* dst = dx.data() + (static_cast<std::size_t>(i) * c + begin) * hw;
                               const T* src = o.grad.data() + static_cast<std::size_t>(i) * count * hw;
                               for (std::size_t j = 0; j < static_cast<std::size_t>(count) * hw; ++j) dst[j] += src[j];
                             }
                           });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw InvalidArgument("add: shape " + shape_to_string(a.shape()) + " vs " +
                          shape_to_string(b.shape()));
  }
  std::vector<T> out(a.data().begin(), a.data().end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.data()[i];
  auto ai = a.impl();
  auto bi = b.impl();
  return detail::record<T>(a.shape(), std::move(out), "add", {a, b},
                           [ai, bi](const detail::TensorImpl<T>& o) {
                             if (wants_grad(ai)) {
                               auto& da = ai->grad_buffer();
                               for (std::size_t i = 0; i < da.size(); ++i) da[i] += o.grad[i];
                             }
                             if (wants_grad(bi)) {
                               auto& db = bi->grad_buffer();
                               for (std::size_t i = 0; i < db.size(); ++i) db[i] += o.grad[i];
                             }
                           });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw InvalidArgument("mul: shape " + shape_to_string(a.shape()) + " vs " +
                          shape_to_string(b.shape()));
  }
  std::vector<T> out(a.data().begin(), a.data().end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.data()[i];
  auto ai = a.impl();
  auto bi = b.impl();
  return detail::record<T>(a.shape(), std::move(out), "mul", {a, b},
                           [ai, bi](const detail::TensorImpl<T>& o) {
                             if (wants_grad(ai)) {
                               auto& da = ai->grad_buffer();
                               for (std::size_t i = 0; i < da.size(); ++i) da[i] += o.grad[i] * bi->data[i];
                             }
                             if (wants_grad(bi)) {
                               auto& db = bi->grad_buffer();
                               for (std::size_t i = 0; i < db.size(); ++i) db[i] += o.grad[i] * ai->data[i];
                             }
                           });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  std::vector<T> out(a.data().begin(), a.data().end());
  for (T& v : out) v *= factor;
  auto ai = a.impl();
  return detail::record<T>(a.shape(), std::move(out), "scale", {a},
                           [ai, factor](const detail::TensorImpl<T>& o) {
                             auto& da = ai->grad_buffer();
                             for (std::size_t i = 0; i < da.size(); ++i) da[i] += o.grad[i] * factor;
                           });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  T total = T(0);
  for (T v : a.data()) total += v;
  auto ai = a.impl();
  return detail::record<T>(Shape{}, std::vector<T>{total}, "sum", {a},
                           [ai](const detail::TensorImpl<T>& o) {
                             auto& da = ai->grad_buffer();
                             for (T& d : da) d += o.grad[0];
                           });
}

template <typename T>
Tensor<T> weighted_sum(const std::vector<Tensor<T>>& terms, const std::vector<T>& weights) {
  if (terms.size() != weights.size() || terms.empty()) {
    throw InvalidArgument("weighted_sum: need one weight per term");
  }
  T total = T(0);
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (terms[i].numel() != 1) throw InvalidArgument("weighted_sum: terms must be scalars");
    total += weights[i] * terms[i].item();
  }
  std::vector<std::shared_ptr<detail::TensorImpl<T>>> impls;
  for (const auto& t : terms) impls.push_back(t.impl());
  return detail::record<T>(Shape{}, std::vector<T>{total}, "weighted_sum", terms,
                           [impls, weights](const detail::TensorImpl<T>& o) {
                             for (std::size_t i = 0; i < impls.size(); ++i) {
                               if (wants_grad(impls[i])) impls[i]->grad_buffer()[0] += o.grad[0] * weights[i];
                             }
                           });
}

#define MCN_INSTANTIATE_OPS(T)                                                                  \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, int, int);   \
  template Tensor<T> relu(const Tensor<T>&);                                                    \
  template Tensor<T> sigmoid(const Tensor<T>&);                                                 \
  template Tensor<T> batch_norm2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,         \
                                  RunningStats<T>&, Mode, double, double);                      \
  template Tensor<T> channel_affine(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);       \
  template Tensor<T> max_pool2d_3x3_same(const Tensor<T>&);                                     \
  template Tensor<T> bilinear_upsample(const Tensor<T>&, int, int);                             \
  template Tensor<T> softmax_channels(const Tensor<T>&);                                        \
  template Tensor<T> slice_channels(const Tensor<T>&, int, int);                                \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                   \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                   \
  template Tensor<T> scale(const Tensor<T>&, T);                                                \
  template Tensor<T> sum(const Tensor<T>&);                                                     \
  template Tensor<T> weighted_sum(const std::vector<Tensor<T>>&, const std::vector<T>&);

MCN_INSTANTIATE_OPS(float)
MCN_INSTANTIATE_OPS(double)

#undef MCN_INSTANTIATE_OPS

}  // namespace ops
}  // namespace mcn
