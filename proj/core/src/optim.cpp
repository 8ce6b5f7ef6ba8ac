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

#include "sf3cnn/optim.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sf3cnn/error.hpp"

namespace sf3cnn {

namespace {

template <typename T>
void check_finite(std::span<const ParamRef<T>> params) {
  for (const auto& p : params) {
    if (p.grad->dims() != p.value->dims()) {
      throw ShapeError("gradient of " + p.name + " has dims " + shape_string(p.grad->dims()) +
                       ", parameter has " + shape_string(p.value->dims()));
    }
    for (T g : p.grad->values()) {
      if (!std::isfinite(static_cast<double>(g))) {
        throw NumericError("non-finite gradient in parameter " + p.name);
      }
    }
  }
}

template <typename T>
void ensure_slots(std::vector<BasicTensor<T>>& slots, std::span<const ParamRef<T>> params,
                  const char* what) {
  if (slots.empty()) {
    for (const auto& p : params) slots.emplace_back(p.value->dims());
    return;
  }
  if (slots.size() != params.size()) {
    throw ShapeError(std::string(what) + " state tracks " + std::to_string(slots.size()) +
                     " parameters, got " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i].dims() != params[i].value->dims()) {
      throw ShapeError(std::string(what) + " state for " + params[i].name + " has dims " +
                       shape_string(slots[i].dims()));
    }
  }
}

}  // namespace

void AdamaxConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("adamax lr must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("adamax beta1 must be in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("adamax beta2 must be in [0, 1)");
  if (!(eps > 0.0)) throw ConfigError("adamax eps must be > 0");
  if (!(weight_decay >= 0.0)) throw ConfigError("adamax weight_decay must be >= 0");
}

void SgdConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("sgd lr must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("sgd momentum must be in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("sgd weight_decay must be >= 0");
}

template <typename T>
void adamax_step(std::span<const ParamRef<T>> params, AdamaxState<T>& state) {
  const AdamaxConfig& c = state.config;
  c.validate();
  check_finite(params);
  ensure_slots(state.m, params, "adamax");
  ensure_slots(state.u, params, "adamax");
  state.t += 1;
  const double step = c.lr / (1.0 - std::pow(c.beta1, static_cast<double>(state.t)));
  for (std::size_t i = 0; i < params.size(); ++i) {
    T* p = params[i].value->data();
    const T* g = params[i].grad->data();
    T* m = state.m[i].data();
    T* u = state.u[i].data();
    for (std::size_t k = 0; k < params[i].value->size(); ++k) {
      double grad = g[k];
      if (c.weight_decay > 0.0) grad += c.weight_decay * p[k];
      const double mk = c.beta1 * m[k] + (1.0 - c.beta1) * grad;
      const double uk = std::max(c.beta2 * u[k], std::abs(grad));
      m[k] = static_cast<T>(mk);
      u[k] = static_cast<T>(uk);
      p[k] = static_cast<T>(p[k] - step * mk / (uk + c.eps));
    }
  }
}

template <typename T>
void sgd_step(std::span<const ParamRef<T>> params, SgdState<T>& state) {
  const SgdConfig& c = state.config;
  c.validate();
  check_finite(params);
  ensure_slots(state.velocity, params, "sgd");
  state.t += 1;
  for (std::size_t i = 0; i < params.size(); ++i) {
    T* p = params[i].value->data();
    const T* g = params[i].grad->data();
    T* v = state.velocity[i].data();
    for (std::size_t k = 0; k < params[i].value->size(); ++k) {
      double grad = g[k];
      if (c.weight_decay > 0.0) grad += c.weight_decay * p[k];
      const double vk = c.momentum * v[k] + grad;
      v[k] = static_cast<T>(vk);
      p[k] = static_cast<T>(p[k] - c.lr * vk);
    }
  }
}

template void adamax_step(std::span<const ParamRef<float>>, AdamaxState<float>&);
template void adamax_step(std::span<const ParamRef<double>>, AdamaxState<double>&);
template void sgd_step(std::span<const ParamRef<float>>, SgdState<float>&);
template void sgd_step(std::span<const ParamRef<double>>, SgdState<double>&);

}  // namespace sf3cnn
