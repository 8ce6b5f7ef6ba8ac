/* Copyright 2026 The Sf3CNN Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License. */

// Dense matrix product kernels shared by matmul, linear and convolution.
// All matrices are row-major and contiguous. Products are summed in T over
// blocks of kBlock inner-dimension terms and each block partial sum is
// accumulated in double, so float and double builds share one code path and
// the summation order never depends on the data.

#pragma once

#include <algorithm>
#include <cstddef>
#include <cstring>
#include <vector>

namespace sf3cnn::detail {

inline constexpr std::size_t kBlock = 64;
inline constexpr std::size_t kRows = 4;
// Segment length of the vector dot kernels; each lane sums
// kLaneBlock / lanes products before folding into double.
inline constexpr std::size_t kLaneBlock = 256;

template <typename T>
struct Simd {
  typedef T type __attribute__((vector_size(32)));
  static constexpr std::size_t lanes = 32 / sizeof(T);

  static type load(const T* p) {
    type v;
    std::memcpy(&v, p, sizeof v);
    return v;
  }
  static type splat(T x) { return x - type{}; }
  static T sum(type v) {
    T s{0};
    for (std::size_t l = 0; l < lanes; ++l) s += v[l];
    return s;
  }
};

// Adds the R x (4 lanes-wide vectors) tile at (i0, j0) of A * B into acc.
// R is a template parameter so the partial sums live in registers.
template <std::size_t R, typename T, typename AAt>
inline void gemm_tile(std::size_t i0, std::size_t j0, std::size_t n, std::size_t k, AAt& a_at,
                      const T* b, double (*acc)[4 * Simd<T>::lanes]) {
  using V = Simd<T>;
  using vec = typename V::type;
  constexpr std::size_t L = V::lanes;
  for (std::size_t k0 = 0; k0 < k; k0 += kBlock) {
    const std::size_t kend = std::min(k, k0 + kBlock);
    vec part[R][4] = {};
    for (std::size_t kk = k0; kk < kend; ++kk) {
      const T* brow = b + kk * n + j0;
      const vec b0 = V::load(brow);
      const vec b1 = V::load(brow + L);
      const vec b2 = V::load(brow + 2 * L);
      const vec b3 = V::load(brow + 3 * L);
#pragma GCC unroll 4
      for (std::size_t r = 0; r < R; ++r) {
        const vec a = V::splat(a_at(i0 + r, kk));
        part[r][0] += a * b0;
        part[r][1] += a * b1;
        part[r][2] += a * b2;
        part[r][3] += a * b3;
      }
    }
    for (std::size_t r = 0; r < R; ++r) {
      for (std::size_t q = 0; q < 4; ++q) {
        for (std::size_t l = 0; l < L; ++l) acc[r][q * L + l] += part[r][q][l];
      }
    }
  }
}

// C[M x N] (+)= A * B[K x N] where A is read through a_at(i, k).
template <typename T, typename AAt>
void gemm_rows(std::size_t m, std::size_t n, std::size_t k, AAt a_at, const T* b, T* c,
               bool accumulate) {
  constexpr std::size_t kCols = 4 * Simd<T>::lanes;
  // Column panels outermost: the K x kCols panel of B stays cache resident
  // while every row block of A passes over it.
  std::size_t j0 = 0;
  for (; j0 + kCols <= n; j0 += kCols) {
    for (std::size_t i0 = 0; i0 < m; i0 += kRows) {
      const std::size_t rows = std::min(kRows, m - i0);
      double acc[kRows][kCols] = {};
      if (accumulate) {
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t j = 0; j < kCols; ++j) acc[r][j] = c[(i0 + r) * n + j0 + j];
        }
      }
      switch (rows) {
        case 4: gemm_tile<4>(i0, j0, n, k, a_at, b, acc); break;
        case 3: gemm_tile<3>(i0, j0, n, k, a_at, b, acc); break;
        case 2: gemm_tile<2>(i0, j0, n, k, a_at, b, acc); break;
        default: gemm_tile<1>(i0, j0, n, k, a_at, b, acc); break;
      }
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < kCols; ++j) {
          c[(i0 + r) * n + j0 + j] = static_cast<T>(acc[r][j]);
        }
      }
    }
  }
  for (; j0 < n; ++j0) {
    for (std::size_t i = 0; i < m; ++i) {
      T& dst = c[i * n + j0];
      double acc = accumulate ? static_cast<double>(dst) : 0.0;
      for (std::size_t k0 = 0; k0 < k; k0 += kBlock) {
        const std::size_t kend = std::min(k, k0 + kBlock);
        T s{0};
        for (std::size_t kk = k0; kk < kend; ++kk) s += a_at(i, kk) * b[kk * n + j0];
        acc += s;
      }
      dst = static_cast<T>(acc);
    }
  }
}

template <typename T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c,
             bool accumulate = false) {
  gemm_rows<T>(
      m, n, k, [a, k](std::size_t i, std::size_t kk) { return a[i * k + kk]; }, b, c,
      accumulate);
}

// C[M x N] (+)= A[K x M]^T * B[K x N]
template <typename T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c,
             bool accumulate = false) {
  gemm_rows<T>(
      m, n, k, [a, m](std::size_t i, std::size_t kk) { return a[kk * m + i]; }, b, c,
      accumulate);
}

// Block-partial inner products of `rows` rows of A against one row of B.
template <typename T>
void dot_rows(const T* a, std::size_t lda, std::size_t rows, const T* b, std::size_t len,
              double* out) {
  using V = Simd<T>;
  using vec = typename V::type;
  constexpr std::size_t L = V::lanes;
  double total[kRows] = {};
  for (std::size_t k0 = 0; k0 < len; k0 += kBlock) {
    const std::size_t kend = std::min(len, k0 + kBlock);
    vec part[kRows] = {};
    std::size_t kk = k0;
    for (; kk + L <= kend; kk += L) {
      const vec bv = V::load(b + kk);
      for (std::size_t r = 0; r < kRows; ++r) {
        if (r >= rows) break;
        part[r] += V::load(a + r * lda + kk) * bv;
      }
    }
    for (std::size_t r = 0; r < rows; ++r) {
      T s = V::sum(part[r]);
      for (std::size_t q = kk; q < kend; ++q) s += a[r * lda + q] * b[q];
      total[r] += static_cast<double>(s);
    }
  }
  for (std::size_t r = 0; r < rows; ++r) out[r] = total[r];
}

template <typename T>
double blocked_dot(const T* x, const T* y, std::size_t len) {
  double out = 0.0;
  dot_rows(x, len, 1, y, len, &out);
  return out;
}

// RA x RB inner products of rows of A and rows of B over [0, len), added
// into out (row stride ldo). Lane partials of each kLaneBlock segment are
// folded into double.
template <std::size_t RA, std::size_t RB, typename T>
inline void dot_tile(const T* a, std::size_t lda, const T* b, std::size_t ldb, std::size_t len,
                     double* out, std::size_t ldo) {
  using V = Simd<T>;
  using vec = typename V::type;
  constexpr std::size_t L = V::lanes;
  double acc[RA][RB][L] = {};
  for (std::size_t k0 = 0; k0 < len; k0 += kLaneBlock) {
    const std::size_t kend = std::min(len, k0 + kLaneBlock);
    vec part[RA][RB] = {};
    std::size_t kk = k0;
    for (; kk + L <= kend; kk += L) {
      vec bv[RB];
#pragma GCC unroll 4
      for (std::size_t q = 0; q < RB; ++q) bv[q] = V::load(b + q * ldb + kk);
#pragma GCC unroll 4
      for (std::size_t r = 0; r < RA; ++r) {
        const vec av = V::load(a + r * lda + kk);
#pragma GCC unroll 4
        for (std::size_t q = 0; q < RB; ++q) part[r][q] += av * bv[q];
      }
    }
    for (std::size_t r = 0; r < RA; ++r) {
      for (std::size_t q = 0; q < RB; ++q) {
        T tail{0};
        for (std::size_t t = kk; t < kend; ++t) tail += a[r * lda + t] * b[q * ldb + t];
        part[r][q][0] += tail;
        for (std::size_t l = 0; l < L; ++l) acc[r][q][l] += part[r][q][l];
      }
    }
  }
  for (std::size_t r = 0; r < RA; ++r) {
    for (std::size_t q = 0; q < RB; ++q) {
      double s = 0.0;
      for (std::size_t l = 0; l < L; ++l) s += acc[r][q][l];
      out[r * ldo + q] += s;
    }
  }
}

template <std::size_t RA, typename T>
inline void dot_tile_rows(const T* a, std::size_t lda, const T* b, std::size_t ldb,
                          std::size_t rb, std::size_t len, double* out, std::size_t ldo) {
  switch (rb) {
    case 4: dot_tile<RA, 4>(a, lda, b, ldb, len, out, ldo); break;
    case 3: dot_tile<RA, 3>(a, lda, b, ldb, len, out, ldo); break;
    case 2: dot_tile<RA, 2>(a, lda, b, ldb, len, out, ldo); break;
    default: dot_tile<RA, 1>(a, lda, b, ldb, len, out, ldo); break;
  }
}

// C[M x N] (+)= A[M x K] * B[N x K]^T
//
// K is walked in chunks so the A and B slices of one chunk stay in cache.
template <typename T>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c,
             bool accumulate = false) {
  constexpr std::size_t kChunk = 8 * kBlock;
  std::vector<double> acc(m * n, 0.0);
  if (accumulate) {
    for (std::size_t i = 0; i < m * n; ++i) acc[i] = static_cast<double>(c[i]);
  }
  for (std::size_t k0 = 0; k0 < k; k0 += kChunk) {
    const std::size_t len = std::min(kChunk, k - k0);
    for (std::size_t j0 = 0; j0 < n; j0 += kRows) {
      const std::size_t rb = std::min(kRows, n - j0);
      const T* bp = b + j0 * k + k0;
      for (std::size_t i0 = 0; i0 < m; i0 += kRows) {
        const T* ap = a + i0 * k + k0;
        double* out = acc.data() + i0 * n + j0;
        switch (std::min(kRows, m - i0)) {
          case 4: dot_tile_rows<4>(ap, k, bp, k, rb, len, out, n); break;
          case 3: dot_tile_rows<3>(ap, k, bp, k, rb, len, out, n); break;
          case 2: dot_tile_rows<2>(ap, k, bp, k, rb, len, out, n); break;
          default: dot_tile_rows<1>(ap, k, bp, k, rb, len, out, n); break;
        }
      }
    }
  }
  for (std::size_t i = 0; i < m * n; ++i) c[i] = static_cast<T>(acc[i]);
}

}  // namespace sf3cnn::detail
