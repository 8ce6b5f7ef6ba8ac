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

#include "sf3cnn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "gemm.hpp"
#include "sf3cnn/error.hpp"

namespace sf3cnn {

std::size_t window_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                          std::size_t pad, const char* axis) {
  if (kernel == 0 || stride == 0) {
    throw ShapeError(std::string("kernel and stride must be >= 1 on axis ") + axis);
  }
  const std::size_t padded = in + 2 * pad;
  if (padded < kernel) {
    throw ShapeError(std::string("non-positive output extent on axis ") + axis +
                     " (input " + std::to_string(in) + ", kernel " +
                     std::to_string(kernel) + ", pad " + std::to_string(pad) + ")");
  }
  return (padded - kernel) / stride + 1;
}

namespace {

struct ConvGeometry {
  std::size_t batch, in_c, out_c;
  Extent3 in, kernel, stride, pad, out;

  std::size_t in_volume() const { return in.t * in.h * in.w; }
  std::size_t positions() const { return out.t * out.h * out.w; }
  std::size_t col_rows() const { return in_c * kernel.t * kernel.h * kernel.w; }
  bool pointwise() const {
    return kernel == Extent3{1, 1, 1} && stride == Extent3{1, 1, 1} &&
           pad == Extent3{0, 0, 0};
  }
};

ConvGeometry conv_geometry(const Shape& x, const Shape& w, Extent3 stride, Extent3 pad) {
  if (x.size() != 5) throw ShapeError("conv3d input must be B x C x T x H x W, got " + shape_string(x));
  if (w.size() != 5) throw ShapeError("conv3d weights must be rank 5, got " + shape_string(w));
  if (w[1] != x[1]) {
    throw ShapeError("conv3d channel mismatch: input " + shape_string(x) + ", weights " +
                     shape_string(w));
  }
  ConvGeometry g{x[0], x[1], w[0], {x[2], x[3], x[4]}, {w[2], w[3], w[4]}, stride, pad, {}};
  g.out.t = window_extent(x[2], w[2], stride.t, pad.t, "T");
  g.out.h = window_extent(x[3], w[3], stride.h, pad.h, "H");
  g.out.w = window_extent(x[4], w[4], stride.w, pad.w, "W");
  return g;
}

// Output columns ow whose input column ow * stride + k - pad lies inside
// [0, in): the half-open range [lo, hi).
struct ColumnRange {
  std::size_t lo, hi;
};

ColumnRange valid_columns(std::size_t in, std::size_t out, std::size_t k, std::size_t stride,
                          std::size_t pad) {
  // smallest ow with ow * stride + k >= pad
  const std::size_t lo = k >= pad ? 0 : (pad - k + stride - 1) / stride;
  // largest ow with ow * stride + k - pad <= in - 1
  if (in - 1 + pad < k) return {0, 0};
  const std::size_t hi = std::min(out, (in - 1 + pad - k) / stride + 1);
  return {std::min(lo, hi), hi};
}

// col[row][pos], row = ((c * kT + kt) * kH + kh) * kW + kw
template <typename T>
void im2col(const T* x, const ConvGeometry& g, T* col, std::size_t ld) {
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.in_c; ++c) {
    const T* xc = x + c * g.in_volume();
    for (std::size_t kt = 0; kt < g.kernel.t; ++kt) {
      for (std::size_t kh = 0; kh < g.kernel.h; ++kh) {
        for (std::size_t kw = 0; kw < g.kernel.w; ++kw, ++row) {
          const ColumnRange cr = valid_columns(g.in.w, g.out.w, kw, g.stride.w, g.pad.w);
          T* dst = col + row * ld;
          for (std::size_t ot = 0; ot < g.out.t; ++ot) {
            const auto it = static_cast<std::ptrdiff_t>(ot * g.stride.t + kt) -
                            static_cast<std::ptrdiff_t>(g.pad.t);
            for (std::size_t oh = 0; oh < g.out.h; ++oh) {
              const auto ih = static_cast<std::ptrdiff_t>(oh * g.stride.h + kh) -
                              static_cast<std::ptrdiff_t>(g.pad.h);
              T* d = dst + (ot * g.out.h + oh) * g.out.w;
              if (it < 0 || it >= static_cast<std::ptrdiff_t>(g.in.t) || ih < 0 ||
                  ih >= static_cast<std::ptrdiff_t>(g.in.h) || cr.lo == cr.hi) {
                std::fill_n(d, g.out.w, T{0});
                continue;
              }
              // First valid input column; cr.lo * stride + kw >= pad.
              const T* src = xc + (static_cast<std::size_t>(it) * g.in.h +
                                   static_cast<std::size_t>(ih)) * g.in.w +
                             (cr.lo * g.stride.w + kw - g.pad.w);
              std::fill_n(d, cr.lo, T{0});
              if (g.stride.w == 1) {
                std::copy_n(src, cr.hi - cr.lo, d + cr.lo);
              } else {
                for (std::size_t ow = cr.lo, i = 0; ow < cr.hi; ++ow, i += g.stride.w) d[ow] = src[i];
              }
              std::fill(d + cr.hi, d + g.out.w, T{0});
            }
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-adds col into x.
template <typename T>
void col2im(const T* col, const ConvGeometry& g, T* x, std::size_t ld) {
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.in_c; ++c) {
    T* xc = x + c * g.in_volume();
    for (std::size_t kt = 0; kt < g.kernel.t; ++kt) {
      for (std::size_t kh = 0; kh < g.kernel.h; ++kh) {
        for (std::size_t kw = 0; kw < g.kernel.w; ++kw, ++row) {
          const ColumnRange cr = valid_columns(g.in.w, g.out.w, kw, g.stride.w, g.pad.w);
          if (cr.lo == cr.hi) continue;
          const T* src = col + row * ld;
          for (std::size_t ot = 0; ot < g.out.t; ++ot) {
            const auto it = static_cast<std::ptrdiff_t>(ot * g.stride.t + kt) -
                            static_cast<std::ptrdiff_t>(g.pad.t);
            if (it < 0 || it >= static_cast<std::ptrdiff_t>(g.in.t)) continue;
            for (std::size_t oh = 0; oh < g.out.h; ++oh) {
              const auto ih = static_cast<std::ptrdiff_t>(oh * g.stride.h + kh) -
                              static_cast<std::ptrdiff_t>(g.pad.h);
              if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.in.h)) continue;
              const T* s = src + (ot * g.out.h + oh) * g.out.w;
              T* dst = xc + (static_cast<std::size_t>(it) * g.in.h +
                             static_cast<std::size_t>(ih)) * g.in.w +
                       (cr.lo * g.stride.w + kw - g.pad.w);
              for (std::size_t ow = cr.lo, i = 0; ow < cr.hi; ++ow, i += g.stride.w) dst[i] += s[ow];
            }
          }
        }
      }
    }
  }
}

// Leading batch and channel extents plus the per-channel inner volume.
struct ChannelLayout {
  std::size_t batch, channels, inner;
};

ChannelLayout channel_layout(const Shape& dims, const char* op) {
  if (dims.size() < 2) {
    throw ShapeError(std::string(op) + " needs a channel axis, got " + shape_string(dims));
  }
  std::size_t inner = 1;
  for (std::size_t i = 2; i < dims.size(); ++i) inner *= dims[i];
  return {dims[0], dims[1], inner};
}

}  // namespace

Shape conv3d_output_shape(const Shape& x, const Shape& weights, Extent3 stride,
                          Extent3 padding) {
  const ConvGeometry g = conv_geometry(x, weights, stride, padding);
  return {g.batch, g.out_c, g.out.t, g.out.h, g.out.w};
}

// Samples are processed in groups whose column matrices sit side by side
// (K x G*P), so deep layers with few output positions still feed the GEMM
// wide rows.
static std::size_t conv_group(const ConvGeometry& g) {
  constexpr std::size_t kTargetColumns = 1024;
  const std::size_t want = (kTargetColumns + g.positions() - 1) / g.positions();
  return std::clamp<std::size_t>(want, 1, g.batch);
}

template <typename T>
BasicTensor<T> conv3d_forward(const BasicTensor<T>& x, const Conv3dParams<T>& p) {
  const ConvGeometry g = conv_geometry(x.dims(), p.weights.dims(), p.stride, p.padding);
  if (p.bias && p.bias->size() != g.out_c) {
    throw ShapeError("conv3d bias has " + std::to_string(p.bias->size()) +
                     " entries for " + std::to_string(g.out_c) + " filters");
  }
  BasicTensor<T> out({g.batch, g.out_c, g.out.t, g.out.h, g.out.w});
  const std::size_t P = g.positions();
  const std::size_t K = g.col_rows();
  const std::size_t G = conv_group(g);
  const std::size_t in_size = g.in_c * g.in_volume();
  std::vector<T> col(g.pointwise() && G == 1 ? 0 : K * P * G);
  std::vector<T> tmp(G > 1 ? g.out_c * P * G : 0);
  for (std::size_t b0 = 0; b0 < g.batch; b0 += G) {
    const std::size_t gs = std::min(G, g.batch - b0);
    const std::size_t N = gs * P;
    const T* cols = x.data() + b0 * in_size;
    if (!(g.pointwise() && G == 1)) {
      for (std::size_t s = 0; s < gs; ++s) {
        im2col(x.data() + (b0 + s) * in_size, g, col.data() + s * P, N);
      }
      cols = col.data();
    }
    T* ob = out.data() + b0 * g.out_c * P;
    detail::gemm_nn(g.out_c, N, K, p.weights.data(), cols, G > 1 ? tmp.data() : ob);
    if (G > 1) {
      for (std::size_t s = 0; s < gs; ++s) {
        for (std::size_t o = 0; o < g.out_c; ++o) {
          std::copy_n(tmp.data() + o * N + s * P, P, ob + (s * g.out_c + o) * P);
        }
      }
    }
    if (p.bias) {
      for (std::size_t s = 0; s < gs; ++s) {
        for (std::size_t o = 0; o < g.out_c; ++o) {
          const T bo = (*p.bias)[o];
          T* row = ob + (s * g.out_c + o) * P;
          for (std::size_t i = 0; i < P; ++i) row[i] += bo;
        }
      }
    }
  }
  return out;
}

template <typename T>
Conv3dGrads<T> conv3d_backward(const BasicTensor<T>& grad_out, const BasicTensor<T>& x,
                               const Conv3dParams<T>& p, bool need_grad_x) {
  const ConvGeometry g = conv_geometry(x.dims(), p.weights.dims(), p.stride, p.padding);
  const Shape expected{g.batch, g.out_c, g.out.t, g.out.h, g.out.w};
  if (grad_out.dims() != expected) {
    throw ShapeError("conv3d grad_out " + shape_string(grad_out.dims()) +
                     " does not match output " + shape_string(expected));
  }
  Conv3dGrads<T> grads{std::nullopt, BasicTensor<T>(p.weights.dims()), std::nullopt};
  if (need_grad_x) grads.grad_x = BasicTensor<T>(x.dims());
  if (p.bias) grads.grad_b = BasicTensor<T>({g.out_c});

  const std::size_t P = g.positions();
  const std::size_t K = g.col_rows();
  const std::size_t G = conv_group(g);
  const std::size_t in_size = g.in_c * g.in_volume();
  const bool direct = g.pointwise() && G == 1;
  std::vector<T> col(direct ? 0 : K * P * G);
  std::vector<T> col_grad(need_grad_x && !direct ? K * P * G : 0);
  std::vector<T> gout(G > 1 ? g.out_c * P * G : 0);
  std::vector<double> bias_acc(g.out_c, 0.0);
  for (std::size_t b0 = 0; b0 < g.batch; b0 += G) {
    const std::size_t gs = std::min(G, g.batch - b0);
    const std::size_t N = gs * P;
    const T* gb = grad_out.data() + b0 * g.out_c * P;
    if (G > 1) {
      for (std::size_t s = 0; s < gs; ++s) {
        for (std::size_t o = 0; o < g.out_c; ++o) {
          std::copy_n(gb + (s * g.out_c + o) * P, P, gout.data() + o * N + s * P);
        }
      }
      gb = gout.data();
    }
    const T* cols = x.data() + b0 * in_size;
    if (!direct) {
      for (std::size_t s = 0; s < gs; ++s) {
        im2col(x.data() + (b0 + s) * in_size, g, col.data() + s * P, N);
      }
      cols = col.data();
    }
    detail::gemm_nt(g.out_c, K, N, gb, cols, grads.grad_w.data(), b0 > 0);
    if (need_grad_x) {
      T* gx = grads.grad_x->data() + b0 * in_size;
      if (direct) {
        detail::gemm_tn(K, N, g.out_c, p.weights.data(), gb, gx);
      } else {
        detail::gemm_tn(K, N, g.out_c, p.weights.data(), gb, col_grad.data());
        for (std::size_t s = 0; s < gs; ++s) {
          col2im(col_grad.data() + s * P, g, gx + s * in_size, N);
        }
      }
    }
    if (p.bias) {
      for (std::size_t o = 0; o < g.out_c; ++o) {
        const T* row = gb + o * N;
        double acc = 0.0;
        for (std::size_t i = 0; i < N; ++i) acc += row[i];
        bias_acc[o] += acc;
      }
    }
  }
  if (p.bias) {
    for (std::size_t o = 0; o < g.out_c; ++o) (*grads.grad_b)[o] = static_cast<T>(bias_acc[o]);
  }
  return grads;
}

template <typename T>
BasicTensor<T> prelu_forward(const BasicTensor<T>& x, const BasicTensor<T>& slope) {
  const ChannelLayout l = channel_layout(x.dims(), "prelu");
  if (slope.size() != l.channels) {
    throw ShapeError("prelu has " + std::to_string(slope.size()) + " slopes for " +
                     std::to_string(l.channels) + " channels");
  }
  BasicTensor<T> out(x.dims());
  const T* in = x.data();
  T* o = out.data();
  for (std::size_t b = 0; b < l.batch; ++b) {
    for (std::size_t c = 0; c < l.channels; ++c) {
      const T a = slope[c];
      const std::size_t base = (b * l.channels + c) * l.inner;
      for (std::size_t i = base; i < base + l.inner; ++i) {
        const T v = in[i];
        o[i] = std::max(v, T{0}) + a * std::min(v, T{0});
      }
    }
  }
  return out;
}

template <typename T>
PReluGrads<T> prelu_backward(const BasicTensor<T>& grad_out, const BasicTensor<T>& x,
                             const BasicTensor<T>& slope) {
  const ChannelLayout l = channel_layout(x.dims(), "prelu");
  if (slope.size() != l.channels) {
    throw ShapeError("prelu has " + std::to_string(slope.size()) + " slopes for " +
                     std::to_string(l.channels) + " channels");
  }
  if (grad_out.dims() != x.dims()) throw ShapeError("prelu grad_out dims mismatch");
  PReluGrads<T> g{BasicTensor<T>(x.dims()), BasicTensor<T>(slope.dims())};
  std::vector<double> acc(l.channels, 0.0);
  for (std::size_t b = 0; b < l.batch; ++b) {
    for (std::size_t c = 0; c < l.channels; ++c) {
      const T a = slope[c];
      const std::size_t base = (b * l.channels + c) * l.inner;
      const T* xi = x.data() + base;
      const T* gi = grad_out.data() + base;
      T* gx = g.grad_x.data() + base;
      // Negative-side products summed in T per kBlock-sized run, then in double.
      double s = 0.0;
      for (std::size_t i0 = 0; i0 < l.inner; i0 += detail::kBlock) {
        const std::size_t end = std::min(l.inner, i0 + detail::kBlock);
        T part{0};
        for (std::size_t i = i0; i < end; ++i) {
          const T neg = static_cast<T>(!(xi[i] > T{0}));
          gx[i] = gi[i] * (neg * a + (T{1} - neg));  // exactly a or 1
          part += neg * gi[i] * xi[i];
        }
        s += static_cast<double>(part);
      }
      acc[c] += s;
    }
  }
  for (std::size_t c = 0; c < l.channels; ++c) g.grad_slope[c] = static_cast<T>(acc[c]);
  return g;
}

template <typename T>
BatchNorm3dParams<T> BatchNorm3dParams<T>::identity(std::size_t channels) {
  return {BasicTensor<T>({channels}, T{1}), BasicTensor<T>({channels}, T{0}),
          BasicTensor<T>({channels}, T{0}), BasicTensor<T>({channels}, T{1})};
}

template <typename T>
BasicTensor<T> batchnorm3d_forward(const BasicTensor<T>& x, BatchNorm3dParams<T>& p,
                                   Mode mode, BatchNormCache<T>* cache) {
  const ChannelLayout l = channel_layout(x.dims(), "batchnorm");
  for (const BasicTensor<T>* t : {&p.gamma, &p.beta, &p.running_mean, &p.running_var}) {
    if (t->size() != l.channels) {
      throw ShapeError("batchnorm parameters sized " + std::to_string(t->size()) +
                       " for " + std::to_string(l.channels) + " channels");
    }
  }
  const std::size_t population = l.batch * l.inner;
  if (mode == Mode::train && population < 2) {
    throw ConfigError("batchnorm in train mode needs >= 2 values per channel, got " +
                      std::to_string(population));
  }
  BasicTensor<T> out(x.dims());
  BasicTensor<T> x_hat(x.dims());
  std::vector<double> inv_std(l.channels);
  for (std::size_t c = 0; c < l.channels; ++c) {
    double mean = 0.0;
    double var = 0.0;
    if (mode == Mode::train) {
      for (std::size_t b = 0; b < l.batch; ++b) {
        const T* src = x.data() + (b * l.channels + c) * l.inner;
        for (std::size_t i = 0; i < l.inner; ++i) mean += src[i];
      }
      mean /= static_cast<double>(population);
      for (std::size_t b = 0; b < l.batch; ++b) {
        const T* src = x.data() + (b * l.channels + c) * l.inner;
        for (std::size_t i = 0; i < l.inner; ++i) {
          const double d = src[i] - mean;
          var += d * d;
        }
      }
      var /= static_cast<double>(population);
      const double unbiased = var * static_cast<double>(population) /
                              static_cast<double>(population - 1);
      p.running_mean[c] = static_cast<T>((1.0 - p.momentum) * p.running_mean[c] +
                                         p.momentum * mean);
      p.running_var[c] = static_cast<T>((1.0 - p.momentum) * p.running_var[c] +
                                        p.momentum * unbiased);
    } else {
      mean = p.running_mean[c];
      var = p.running_var[c];
    }
    const double is = 1.0 / std::sqrt(var + p.eps);
    inv_std[c] = is;
    const double gamma = p.gamma[c];
    const double beta = p.beta[c];
    for (std::size_t b = 0; b < l.batch; ++b) {
      const std::size_t base = (b * l.channels + c) * l.inner;
      for (std::size_t i = base; i < base + l.inner; ++i) {
        const double h = (x[i] - mean) * is;
        x_hat[i] = static_cast<T>(h);
        out[i] = static_cast<T>(gamma * h + beta);
      }
    }
  }
  if (cache) {
    cache->mode = mode;
    cache->x_hat = std::move(x_hat);
    cache->inv_std = std::move(inv_std);
  }
  return out;
}

template <typename T>
BatchNormGrads<T> batchnorm3d_backward(const BasicTensor<T>& grad_out,
                                       const BatchNormCache<T>& cache,
                                       const BatchNorm3dParams<T>& p) {
  const ChannelLayout l = channel_layout(cache.x_hat.dims(), "batchnorm");
  if (grad_out.dims() != cache.x_hat.dims()) {
    throw ShapeError("batchnorm grad_out " + shape_string(grad_out.dims()) +
                     " does not match input " + shape_string(cache.x_hat.dims()));
  }
  BatchNormGrads<T> g{BasicTensor<T>(grad_out.dims()), BasicTensor<T>({l.channels}),
                      BasicTensor<T>({l.channels})};
  const double n = static_cast<double>(l.batch * l.inner);
  for (std::size_t c = 0; c < l.channels; ++c) {
    double sum_dy = 0.0;
    double sum_dy_xhat = 0.0;
    for (std::size_t b = 0; b < l.batch; ++b) {
      const std::size_t base = (b * l.channels + c) * l.inner;
      for (std::size_t i = base; i < base + l.inner; ++i) {
        sum_dy += grad_out[i];
        sum_dy_xhat += static_cast<double>(grad_out[i]) * cache.x_hat[i];
      }
    }
    g.grad_gamma[c] = static_cast<T>(sum_dy_xhat);
    g.grad_beta[c] = static_cast<T>(sum_dy);
    const double scale = static_cast<double>(p.gamma[c]) * cache.inv_std[c];
    for (std::size_t b = 0; b < l.batch; ++b) {
      const std::size_t base = (b * l.channels + c) * l.inner;
      for (std::size_t i = base; i < base + l.inner; ++i) {
        if (cache.mode == Mode::train) {
          g.grad_x[i] = static_cast<T>(
              scale * (grad_out[i] - sum_dy / n - cache.x_hat[i] * sum_dy_xhat / n));
        } else {
          g.grad_x[i] = static_cast<T>(scale * grad_out[i]);
        }
      }
    }
  }
  return g;
}

Shape pool3d_output_shape(const Shape& x, const Pool3dSpec& s) {
  if (x.size() != 5) throw ShapeError("pool3d input must be rank 5, got " + shape_string(x));
  if (2 * s.padding.t > s.window.t || 2 * s.padding.h > s.window.h ||
      2 * s.padding.w > s.window.w) {
    throw ShapeError("pool3d padding must be at most half the window");
  }
  return {x[0], x[1], window_extent(x[2], s.window.t, s.stride.t, s.padding.t, "T"),
          window_extent(x[3], s.window.h, s.stride.h, s.padding.h, "H"),
          window_extent(x[4], s.window.w, s.stride.w, s.padding.w, "W")};
}

namespace {

// Input indices [lo, hi) covered by window `o` along one axis, padding excluded.
struct WindowRange {
  std::size_t lo, hi;
};

WindowRange window_range(std::size_t o, std::size_t stride, std::size_t pad, std::size_t window,
                         std::size_t in) {
  const std::size_t start = o * stride;  // in padded coordinates
  const std::size_t lo = start < pad ? 0 : start - pad;
  const std::size_t end = start + window;  // exclusive, padded
  const std::size_t hi = end <= pad ? 0 : std::min(in, end - pad);
  return {lo, hi};
}

}  // namespace

template <typename T>
BasicTensor<T> pool3d_forward(const BasicTensor<T>& x, const Pool3dSpec& s,
                              std::vector<std::size_t>* argmax) {
  const Shape od = pool3d_output_shape(x.dims(), s);
  const Shape& id = x.dims();
  BasicTensor<T> out(od);
  if (argmax) argmax->assign(out.size(), 0);
  const std::size_t in_vol = id[2] * id[3] * id[4];
  std::size_t o = 0;
  for (std::size_t bc = 0; bc < id[0] * id[1]; ++bc) {
    const std::size_t base = bc * in_vol;
    for (std::size_t ot = 0; ot < od[2]; ++ot) {
      for (std::size_t oh = 0; oh < od[3]; ++oh) {
        for (std::size_t ow = 0; ow < od[4]; ++ow, ++o) {
          const WindowRange rt = window_range(ot, s.stride.t, s.padding.t, s.window.t, id[2]);
          const WindowRange rh = window_range(oh, s.stride.h, s.padding.h, s.window.h, id[3]);
          const WindowRange rw = window_range(ow, s.stride.w, s.padding.w, s.window.w, id[4]);
          if (rt.lo >= rt.hi || rh.lo >= rh.hi || rw.lo >= rw.hi) {
            throw ShapeError("pool3d window covers only padding");
          }
          if (s.kind == PoolKind::max) {
            // Strict comparison keeps the first maximum in scan order.
            std::size_t best_idx = base + (rt.lo * id[3] + rh.lo) * id[4] + rw.lo;
            T best = x.data()[best_idx];
            for (std::size_t it = rt.lo; it < rt.hi; ++it) {
              for (std::size_t ih = rh.lo; ih < rh.hi; ++ih) {
                const std::size_t row = base + (it * id[3] + ih) * id[4];
                for (std::size_t iw = rw.lo; iw < rw.hi; ++iw) {
                  const T v = x.data()[row + iw];
                  const bool better = v > best;
                  best = better ? v : best;
                  best_idx = better ? row + iw : best_idx;
                }
              }
            }
            out[o] = best;
            if (argmax) (*argmax)[o] = best_idx;
          } else {
            double acc = 0.0;
            for (std::size_t it = rt.lo; it < rt.hi; ++it) {
              for (std::size_t ih = rh.lo; ih < rh.hi; ++ih) {
                const std::size_t row = base + (it * id[3] + ih) * id[4];
                for (std::size_t iw = rw.lo; iw < rw.hi; ++iw) acc += x.data()[row + iw];
              }
            }
            const std::size_t count = (rt.hi - rt.lo) * (rh.hi - rh.lo) * (rw.hi - rw.lo);
            out[o] = static_cast<T>(acc / static_cast<double>(count));
          }
        }
      }
    }
  }
  return out;
}

template <typename T>
BasicTensor<T> pool3d_backward(const BasicTensor<T>& grad_out, const Shape& x_dims,
                               const Pool3dSpec& s, const std::vector<std::size_t>& argmax) {
  const Shape od = pool3d_output_shape(x_dims, s);
  if (grad_out.dims() != od) {
    throw ShapeError("pool3d grad_out " + shape_string(grad_out.dims()) +
                     " does not match output " + shape_string(od));
  }
  BasicTensor<T> gx(x_dims);
  if (s.kind == PoolKind::max) {
    if (argmax.size() != grad_out.size()) throw ShapeError("pool3d argmax size mismatch");
    for (std::size_t o = 0; o < grad_out.size(); ++o) gx[argmax[o]] += grad_out[o];
    return gx;
  }
  const std::size_t in_vol = x_dims[2] * x_dims[3] * x_dims[4];
  std::size_t o = 0;
  for (std::size_t bc = 0; bc < x_dims[0] * x_dims[1]; ++bc) {
    const std::size_t base = bc * in_vol;
    for (std::size_t ot = 0; ot < od[2]; ++ot) {
      for (std::size_t oh = 0; oh < od[3]; ++oh) {
        for (std::size_t ow = 0; ow < od[4]; ++ow, ++o) {
          std::vector<std::size_t> members;
          for (std::size_t kt = 0; kt < s.window.t; ++kt) {
            const auto it = static_cast<std::ptrdiff_t>(ot * s.stride.t + kt) -
                            static_cast<std::ptrdiff_t>(s.padding.t);
            if (it < 0 || it >= static_cast<std::ptrdiff_t>(x_dims[2])) continue;
            for (std::size_t kh = 0; kh < s.window.h; ++kh) {
              const auto ih = static_cast<std::ptrdiff_t>(oh * s.stride.h + kh) -
                              static_cast<std::ptrdiff_t>(s.padding.h);
              if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(x_dims[3])) continue;
              for (std::size_t kw = 0; kw < s.window.w; ++kw) {
                const auto iw = static_cast<std::ptrdiff_t>(ow * s.stride.w + kw) -
                                static_cast<std::ptrdiff_t>(s.padding.w);
                if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(x_dims[4])) continue;
                members.push_back(base + (static_cast<std::size_t>(it) * x_dims[3] +
                                          static_cast<std::size_t>(ih)) * x_dims[4] +
                                  static_cast<std::size_t>(iw));
              }
            }
          }
          const T share = grad_out[o] / static_cast<T>(members.size());
          for (std::size_t idx : members) gx[idx] += share;
        }
      }
    }
  }
  return gx;
}

template <typename T>
BasicTensor<T> global_avg_pool(const BasicTensor<T>& x) {
  const ChannelLayout l = channel_layout(x.dims(), "global_avg_pool");
  BasicTensor<T> out({l.batch, l.channels});
  for (std::size_t bc = 0; bc < l.batch * l.channels; ++bc) {
    const T* src = x.data() + bc * l.inner;
    double acc = 0.0;
    for (std::size_t i = 0; i < l.inner; ++i) acc += src[i];
    out[bc] = static_cast<T>(acc / static_cast<double>(l.inner));
  }
  return out;
}

template <typename T>
BasicTensor<T> global_avg_pool_backward(const BasicTensor<T>& grad_out, const Shape& x_dims) {
  const ChannelLayout l = channel_layout(x_dims, "global_avg_pool");
  if (grad_out.dims() != Shape{l.batch, l.channels}) {
    throw ShapeError("global_avg_pool grad_out dims mismatch");
  }
  BasicTensor<T> gx(x_dims);
  for (std::size_t bc = 0; bc < l.batch * l.channels; ++bc) {
    const T share = grad_out[bc] / static_cast<T>(l.inner);
    std::fill_n(gx.data() + bc * l.inner, l.inner, share);
  }
  return gx;
}

template <typename T>
BasicTensor<T> linear_forward(const BasicTensor<T>& x, const BasicTensor<T>& w,
                              const BasicTensor<T>& b) {
  if (x.rank() != 2 || w.rank() != 2 || x.dim(1) != w.dim(1) || b.size() != w.dim(0)) {
    throw ShapeError("linear shape mismatch: x " + shape_string(x.dims()) + ", w " +
                     shape_string(w.dims()) + ", b " + shape_string(b.dims()));
  }
  const std::size_t B = x.dim(0);
  const std::size_t K = w.dim(0);
  const std::size_t D = x.dim(1);
  BasicTensor<T> out({B, K});
  detail::gemm_nt(B, K, D, x.data(), w.data(), out.data());
  for (std::size_t i = 0; i < B; ++i) {
    for (std::size_t k = 0; k < K; ++k) out[i * K + k] += b[k];
  }
  return out;
}

template <typename T>
LinearGrads<T> linear_backward(const BasicTensor<T>& grad_out, const BasicTensor<T>& x,
                               const BasicTensor<T>& w) {
  const std::size_t B = x.dim(0);
  const std::size_t K = w.dim(0);
  const std::size_t D = x.dim(1);
  if (grad_out.dims() != Shape{B, K}) {
    throw ShapeError("linear grad_out " + shape_string(grad_out.dims()) + " expected " +
                     shape_string({B, K}));
  }
  LinearGrads<T> g{BasicTensor<T>(x.dims()), BasicTensor<T>(w.dims()), BasicTensor<T>({K})};
  detail::gemm_nn(B, D, K, grad_out.data(), w.data(), g.grad_x.data());
  detail::gemm_tn(K, D, B, grad_out.data(), x.data(), g.grad_w.data());
  for (std::size_t k = 0; k < K; ++k) {
    double acc = 0.0;
    for (std::size_t i = 0; i < B; ++i) acc += grad_out[i * K + k];
    g.grad_b[k] = static_cast<T>(acc);
  }
  return g;
}

#define SF3CNN_INSTANTIATE(T)                                                         \
  template BasicTensor<T> conv3d_forward(const BasicTensor<T>&, const Conv3dParams<T>&); \
  template Conv3dGrads<T> conv3d_backward(const BasicTensor<T>&, const BasicTensor<T>&,  \
                                          const Conv3dParams<T>&, bool);                 \
  template BasicTensor<T> prelu_forward(const BasicTensor<T>&, const BasicTensor<T>&);   \
  template PReluGrads<T> prelu_backward(const BasicTensor<T>&, const BasicTensor<T>&,    \
                                        const BasicTensor<T>&);                          \
  template struct BatchNorm3dParams<T>;                                                  \
  template BasicTensor<T> batchnorm3d_forward(const BasicTensor<T>&,                     \
                                              BatchNorm3dParams<T>&, Mode,               \
                                              BatchNormCache<T>*);                       \
  template BatchNormGrads<T> batchnorm3d_backward(                                       \
      const BasicTensor<T>&, const BatchNormCache<T>&, const BatchNorm3dParams<T>&);     \
  template BasicTensor<T> pool3d_forward(const BasicTensor<T>&, const Pool3dSpec&,       \
                                         std::vector<std::size_t>*);                     \
  template BasicTensor<T> pool3d_backward(const BasicTensor<T>&, const Shape&,           \
                                          const Pool3dSpec&,                             \
                                          const std::vector<std::size_t>&);              \
  template BasicTensor<T> global_avg_pool(const BasicTensor<T>&);                        \
  template BasicTensor<T> global_avg_pool_backward(const BasicTensor<T>&, const Shape&); \
  template BasicTensor<T> linear_forward(const BasicTensor<T>&, const BasicTensor<T>&,   \
                                         const BasicTensor<T>&);                         \
  template LinearGrads<T> linear_backward(const BasicTensor<T>&, const BasicTensor<T>&,  \
                                          const BasicTensor<T>&);

SF3CNN_INSTANTIATE(float)
SF3CNN_INSTANTIATE(double)

#undef SF3CNN_INSTANTIATE

}  // namespace sf3cnn
