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

// Dense loops shared by conv2d forward/backward. Row-major everywhere.

#include <cstddef>

namespace mcn::kernels {

// C[M,N] += A[M,K] * B[K,N]
template <typename T>
void gemm_nn(int m, int n, int k, const T* a, const T* b, T* c) {
  for (int i = 0; i < m; ++i) {
    T* crow = c + static_cast<std::size_t>(i) * n;
    const T* arow = a + static_cast<std::size_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      const T av = arow[p];
      if (av == T(0)) continue;
      const T* brow = b + static_cast<std::size_t>(p) * n;
#pragma omp simd
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[M,N] += A[M,K] * B[N,K]^T
template <typename T>
void gemm_nt(int m, int n, int k, const T* a, const T* b, T* c) {
  for (int i = 0; i < m; ++i) {
    const T* arow = a + static_cast<std::size_t>(i) * k;
    T* crow = c + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const T* brow = b + static_cast<std::size_t>(j) * k;
      T acc = T(0);
#pragma omp simd reduction(+ : acc)
      for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
      crow[j] += acc;
    }
  }
}

// C[M,N] += A[K,M]^T * B[K,N]
template <typename T>
void gemm_tn(int m, int n, int k, const T* a, const T* b, T* c) {
  for (int p = 0; p < k; ++p) {
    const T* arow = a + static_cast<std::size_t>(p) * m;
    const T* brow = b + static_cast<std::size_t>(p) * n;
    for (int i = 0; i < m; ++i) {
      const T av = arow[i];
      if (av == T(0)) continue;
      T* crow = c + static_cast<std::size_t>(i) * n;
#pragma omp simd
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

struct ConvGeometry {
  int channels, height, width;
  int kernel, stride, pad;
  int out_h, out_w;
};

// image [C,H,W] -> cols [C*k*k, out_h*out_w]
template <typename T>
void im2col(const ConvGeometry& g, const T* image, T* cols) {
  const int plane = g.out_h * g.out_w;
  for (int c = 0; c < g.channels; ++c) {
    const T* src = image + static_cast<std::size_t>(c) * g.height * g.width;
    for (int ky = 0; ky < g.kernel; ++ky) {
      for (int kx = 0; kx < g.kernel; ++kx) {
        T* dst = cols + static_cast<std::size_t>((c * g.kernel + ky) * g.kernel + kx) * plane;
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          T* drow = dst + static_cast<std::size_t>(oy) * g.out_w;
          if (iy < 0 || iy >= g.height) {
            for (int ox = 0; ox < g.out_w; ++ox) drow[ox] = T(0);
            continue;
          }
          const T* srow = src + static_cast<std::size_t>(iy) * g.width;
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            drow[ox] = (ix >= 0 && ix < g.width) ? srow[ix] : T(0);
          }
        }
      }
    }
  }
}

// cols [C*k*k, out_h*out_w] accumulated back into image [C,H,W]
template <typename T>
void col2im(const ConvGeometry& g, const T* cols, T* image) {
  const int plane = g.out_h * g.out_w;
  for (int c = 0; c < g.channels; ++c) {
    T* dst = image + static_cast<std::size_t>(c) * g.height * g.width;
    for (int ky = 0; ky < g.kernel; ++ky) {
      for (int kx = 0; kx < g.kernel; ++kx) {
        const T* src = cols + static_cast<std::size_t>((c * g.kernel + ky) * g.kernel + kx) * plane;
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.height) continue;
          T* drow = dst + static_cast<std::size_t>(iy) * g.width;
          const T* srow = src + static_cast<std::size_t>(oy) * g.out_w;
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            if (ix >= 0 && ix < g.width) drow[ix] += srow[ox];
          }
        }
      }
    }
  }
}

}  // namespace mcn::kernels
