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

// Forward and analytic backward kernels for the 3D residual feature
// extractor. Activations are laid out B x C x T x H x W (row-major). All
// kernels are deterministic and single-threaded.

#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "sf3cnn/tensor.hpp"

namespace sf3cnn {

// Per-axis (time, height, width) triple.
struct Extent3 {
  std::size_t t = 1;
  std::size_t h = 1;
  std::size_t w = 1;

  static constexpr Extent3 cube(std::size_t v) { return {v, v, v}; }
  friend bool operator==(const Extent3&, const Extent3&) = default;
};

// floor((in + 2 * pad - kernel) / stride) + 1; ShapeError naming `axis` when
// the window does not fit.
std::size_t window_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                          std::size_t pad, const char* axis);

// ---------------------------------------------------------------------------
// Convolution (cross-correlation, no kernel flip).

template <typename T>
struct Conv3dParams {
  BasicTensor<T> weights;  // outC x inC x kT x kH x kW
  std::optional<BasicTensor<T>> bias;  // outC
  Extent3 stride{1, 1, 1};
  Extent3 padding{0, 0, 0};
};

template <typename T>
struct Conv3dGrads {
  std::optional<BasicTensor<T>> grad_x;
  BasicTensor<T> grad_w;
  std::optional<BasicTensor<T>> grad_b;
};

Shape conv3d_output_shape(const Shape& x, const Shape& weights, Extent3 stride,
                          Extent3 padding);

template <typename T>
BasicTensor<T> conv3d_forward(const BasicTensor<T>& x, const Conv3dParams<T>& p);

template <typename T>
Conv3dGrads<T> conv3d_backward(const BasicTensor<T>& grad_out, const BasicTensor<T>& x,
                               const Conv3dParams<T>& p, bool need_grad_x = true);

// ---------------------------------------------------------------------------
// PReLU: x for x > 0, slope[c] * x otherwise. Channel axis is 1.

template <typename T>
struct PReluGrads {
  BasicTensor<T> grad_x;
  BasicTensor<T> grad_slope;
};

template <typename T>
BasicTensor<T> prelu_forward(const BasicTensor<T>& x, const BasicTensor<T>& slope);

template <typename T>
PReluGrads<T> prelu_backward(const BasicTensor<T>& grad_out, const BasicTensor<T>& x,
                             const BasicTensor<T>& slope);

// ---------------------------------------------------------------------------
// Batch normalization over every axis except the channel axis.

enum class Mode { train, eval };

template <typename T>
struct BatchNorm3dParams {
  BasicTensor<T> gamma;
  BasicTensor<T> beta;
  BasicTensor<T> running_mean;
  BasicTensor<T> running_var;
  double momentum = 0.1;
  double eps = 1e-5;

  static BatchNorm3dParams identity(std::size_t channels);
};

// Saved state for the backward pass.
template <typename T>
struct BatchNormCache {
  Mode mode = Mode::train;
  BasicTensor<T> x_hat;
  std::vector<double> inv_std;
};

template <typename T>
struct BatchNormGrads {
  BasicTensor<T> grad_x;
  BasicTensor<T> grad_gamma;
  BasicTensor<T> grad_beta;
};

// Train mode normalizes with the batch statistics and folds them into the
// running estimates (unbiased variance); eval mode uses the running
// estimates. ConfigError when train mode sees fewer than 2 values per channel.
template <typename T>
BasicTensor<T> batchnorm3d_forward(const BasicTensor<T>& x, BatchNorm3dParams<T>& p,
                                   Mode mode, BatchNormCache<T>* cache = nullptr);

template <typename T>
BatchNormGrads<T> batchnorm3d_backward(const BasicTensor<T>& grad_out,
                                       const BatchNormCache<T>& cache,
                                       const BatchNorm3dParams<T>& p);

// ---------------------------------------------------------------------------
// Pooling. Padded positions never win a max and are excluded from averages.

enum class PoolKind { max, avg };

struct Pool3dSpec {
  PoolKind kind = PoolKind::max;
  Extent3 window{1, 1, 1};
  Extent3 stride{1, 1, 1};
  Extent3 padding{0, 0, 0};
};

Shape pool3d_output_shape(const Shape& x, const Pool3dSpec& spec);

// `argmax` (optional) receives the flat input index chosen by each max window.
template <typename T>
BasicTensor<T> pool3d_forward(const BasicTensor<T>& x, const Pool3dSpec& spec,
                              std::vector<std::size_t>* argmax = nullptr);

template <typename T>
BasicTensor<T> pool3d_backward(const BasicTensor<T>& grad_out, const Shape& x_dims,
                               const Pool3dSpec& spec,
                               const std::vector<std::size_t>& argmax);

// B x C x T x H x W -> B x C
template <typename T>
BasicTensor<T> global_avg_pool(const BasicTensor<T>& x);

template <typename T>
BasicTensor<T> global_avg_pool_backward(const BasicTensor<T>& grad_out, const Shape& x_dims);

// ---------------------------------------------------------------------------
// Affine map y = x * w^T + b with x: B x D, w: K x D, b: K.

template <typename T>
struct LinearGrads {
  BasicTensor<T> grad_x;
  BasicTensor<T> grad_w;
  BasicTensor<T> grad_b;
};

template <typename T>
BasicTensor<T> linear_forward(const BasicTensor<T>& x, const BasicTensor<T>& w,
                              const BasicTensor<T>& b);

template <typename T>
LinearGrads<T> linear_backward(const BasicTensor<T>& grad_out, const BasicTensor<T>& x,
                               const BasicTensor<T>& w);

}  // namespace sf3cnn
