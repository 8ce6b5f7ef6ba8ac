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

// Independent reference implementations used by the unit and acceptance
// tests. Everything here is deliberately naive: plain nested loops in double
// precision, written from the definitions rather than from the library code.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <vector>

#include "sf3cnn/layers.hpp"
#include "sf3cnn/tensor.hpp"

namespace sf3cnn::oracle {

template <typename T>
double at5(const BasicTensor<T>& t, std::size_t a, std::size_t b, std::size_t c, std::size_t d,
           std::size_t e) {
  const Shape& s = t.dims();
  return static_cast<double>(t[(((a * s[1] + b) * s[2] + c) * s[3] + d) * s[4] + e]);
}

// Cross-correlation with zero padding, straight from the definition.
template <typename T>
Tensor64 conv3d(const BasicTensor<T>& x, const BasicTensor<T>& w, const BasicTensor<T>* bias,
                Extent3 stride, Extent3 pad) {
  const Shape& xs = x.dims();
  const Shape& ws = w.dims();
  const std::size_t n = xs[0], ci = xs[1], co = ws[0];
  const std::size_t kt = ws[2], kh = ws[3], kw = ws[4];
  const std::size_t ot = (xs[2] + 2 * pad.t - kt) / stride.t + 1;
  const std::size_t oh = (xs[3] + 2 * pad.h - kh) / stride.h + 1;
  const std::size_t ow = (xs[4] + 2 * pad.w - kw) / stride.w + 1;
  Tensor64 y({n, co, ot, oh, ow});
  std::size_t idx = 0;
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t o = 0; o < co; ++o)
      for (std::size_t t = 0; t < ot; ++t)
        for (std::size_t i = 0; i < oh; ++i)
          for (std::size_t j = 0; j < ow; ++j) {
            double s = bias ? static_cast<double>((*bias)[o]) : 0.0;
            for (std::size_t c = 0; c < ci; ++c)
              for (std::size_t a = 0; a < kt; ++a)
                for (std::size_t p = 0; p < kh; ++p)
                  for (std::size_t q = 0; q < kw; ++q) {
                    const long tt = static_cast<long>(t * stride.t + a) - static_cast<long>(pad.t);
                    const long ii = static_cast<long>(i * stride.h + p) - static_cast<long>(pad.h);
                    const long jj = static_cast<long>(j * stride.w + q) - static_cast<long>(pad.w);
                    if (tt < 0 || ii < 0 || jj < 0 || tt >= static_cast<long>(xs[2]) ||
                        ii >= static_cast<long>(xs[3]) || jj >= static_cast<long>(xs[4]))
                      continue;
                    s += at5(x, b, c, tt, ii, jj) * at5(w, o, c, a, p, q);
                  }
            y[idx++] = s;
          }
  return y;
}

// Pooling with padded cells excluded; first maximum in scan order wins.
template <typename T>
Tensor64 pool3d(const BasicTensor<T>& x, const Pool3dSpec& spec) {
  const Shape& xs = x.dims();
  const auto out = [](std::size_t in, std::size_t k, std::size_t s, std::size_t p) {
    return (in + 2 * p - k) / s + 1;
  };
  const std::size_t ot = out(xs[2], spec.window.t, spec.stride.t, spec.padding.t);
  const std::size_t oh = out(xs[3], spec.window.h, spec.stride.h, spec.padding.h);
  const std::size_t ow = out(xs[4], spec.window.w, spec.stride.w, spec.padding.w);
  Tensor64 y({xs[0], xs[1], ot, oh, ow});
  std::size_t idx = 0;
  for (std::size_t b = 0; b < xs[0]; ++b)
    for (std::size_t c = 0; c < xs[1]; ++c)
      for (std::size_t t = 0; t < ot; ++t)
        for (std::size_t i = 0; i < oh; ++i)
          for (std::size_t j = 0; j < ow; ++j) {
            double best = -std::numeric_limits<double>::infinity(), sum = 0.0;
            std::size_t count = 0;
            for (std::size_t a = 0; a < spec.window.t; ++a)
              for (std::size_t p = 0; p < spec.window.h; ++p)
                for (std::size_t q = 0; q < spec.window.w; ++q) {
                  const long tt = static_cast<long>(t * spec.stride.t + a) - static_cast<long>(spec.padding.t);
                  const long ii = static_cast<long>(i * spec.stride.h + p) - static_cast<long>(spec.padding.h);
                  const long jj = static_cast<long>(j * spec.stride.w + q) - static_cast<long>(spec.padding.w);
                  if (tt < 0 || ii < 0 || jj < 0 || tt >= static_cast<long>(xs[2]) ||
                      ii >= static_cast<long>(xs[3]) || jj >= static_cast<long>(xs[4]))
                    continue;
                  const double v = at5(x, b, c, tt, ii, jj);
                  best = std::max(best, v);
                  sum += v;
                  ++count;
                }
            y[idx++] = spec.kind == PoolKind::max ? best : sum / static_cast<double>(count);
          }
  return y;
}

// Angle between two vectors in long double.
inline double angle(const double* a, const double* b, std::size_t d) {
  long double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < d; ++i) {
    ab += static_cast<long double>(a[i]) * b[i];
    aa += static_cast<long double>(a[i]) * a[i];
    bb += static_cast<long double>(b[i]) * b[i];
  }
  long double c = ab / std::sqrt(aa * bb);
  c = std::clamp(c, -1.0L, 1.0L);
  return static_cast<double>(std::acos(c));
}

// psi evaluated with cos(m * theta) directly, segment by segment.
inline double psi(double theta, int m) {
  int k = static_cast<int>(std::floor(theta * m / std::numbers::pi));
  k = std::clamp(k, 0, m - 1);
  const double sign = k % 2 == 0 ? 1.0 : -1.0;
  return sign * std::cos(m * theta) - 2.0 * k;
}

// Softmax cross-entropy over logits x_i . w_j / |w_j| (unit-normalized
// weights, no bias) with its gradients with respect to x and raw w.
struct ModifiedSoftmax {
  double loss = 0.0;
  std::vector<double> grad_x;  // N x D
  std::vector<double> grad_w;  // C x D
};

inline ModifiedSoftmax modified_softmax(const std::vector<double>& x, const std::vector<double>& w,
                                        const std::vector<std::size_t>& labels, std::size_t d) {
  const std::size_t n = labels.size(), c = w.size() / d;
  std::vector<double> norm(c), wh(c * d);
  for (std::size_t j = 0; j < c; ++j) {
    double s = 0;
    for (std::size_t k = 0; k < d; ++k) s += w[j * d + k] * w[j * d + k];
    norm[j] = std::sqrt(s);
    for (std::size_t k = 0; k < d; ++k) wh[j * d + k] = w[j * d + k] / norm[j];
  }
  ModifiedSoftmax out;
  out.grad_x.assign(n * d, 0.0);
  std::vector<double> grad_wh(c * d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> z(c);
    for (std::size_t j = 0; j < c; ++j) {
      for (std::size_t k = 0; k < d; ++k) z[j] += x[i * d + k] * wh[j * d + k];
    }
    const double zmax = *std::max_element(z.begin(), z.end());
    double se = 0;
    for (double v : z) se += std::exp(v - zmax);
    out.loss += (std::log(se) + zmax - z[labels[i]]) / static_cast<double>(n);
    for (std::size_t j = 0; j < c; ++j) {
      const double dz = (std::exp(z[j] - zmax) / se - (j == labels[i] ? 1.0 : 0.0)) / n;
      for (std::size_t k = 0; k < d; ++k) {
        out.grad_x[i * d + k] += dz * wh[j * d + k];
        grad_wh[j * d + k] += dz * x[i * d + k];
      }
    }
  }
  // d w_hat / d w = (I - w_hat w_hat^T) / |w|
  out.grad_w.assign(c * d, 0.0);
  for (std::size_t j = 0; j < c; ++j) {
    double dot = 0;
    for (std::size_t k = 0; k < d; ++k) dot += grad_wh[j * d + k] * wh[j * d + k];
    for (std::size_t k = 0; k < d; ++k) {
      out.grad_w[j * d + k] = (grad_wh[j * d + k] - dot * wh[j * d + k]) / norm[j];
    }
  }
  return out;
}

inline double max_rel_err(const std::vector<double>& a, const std::vector<double>& b,
                          double floor = 1e-12) {
  double e = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    e = std::max(e, std::abs(a[i] - b[i]) / std::max({std::abs(a[i]), std::abs(b[i]), floor}));
  }
  return e;
}

}  // namespace sf3cnn::oracle
