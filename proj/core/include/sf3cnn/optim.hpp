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

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sf3cnn/modules.hpp"
#include "sf3cnn/tensor.hpp"

namespace sf3cnn {

struct AdamaxConfig {
  double lr = 0.002;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;

  void validate() const;
};

// First moment m and exponentially weighted infinity norm u per parameter.
template <typename T>
struct AdamaxState {
  AdamaxConfig config;
  std::vector<BasicTensor<T>> m;
  std::vector<BasicTensor<T>> u;
  std::uint64_t t = 0;
};

// g <- g + wd * p (when wd > 0)
// m <- beta1 * m + (1 - beta1) * g
// u <- max(beta2 * u, |g|)
// p <- p - lr / (1 - beta1^t) * m / (u + eps)
//
// All gradients are checked before any parameter moves; a non-finite entry
// raises NumericError naming the parameter and leaves params and state alone.
template <typename T>
void adamax_step(std::span<const ParamRef<T>> params, AdamaxState<T>& state);

struct SgdConfig {
  double lr = 0.1;
  double momentum = 0.0;
  double weight_decay = 0.0;

  void validate() const;
};

template <typename T>
struct SgdState {
  SgdConfig config;
  std::vector<BasicTensor<T>> velocity;
  std::uint64_t t = 0;
};

// v <- momentum * v + g;  p <- p - lr * v
template <typename T>
void sgd_step(std::span<const ParamRef<T>> params, SgdState<T>& state);

}  // namespace sf3cnn
