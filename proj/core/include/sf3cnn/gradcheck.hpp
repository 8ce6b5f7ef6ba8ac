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

// Finite-difference verification of every analytic backward pass.
//
// A case is a scalar function of named input tensors together with its
// analytic gradient. The reference is always a central difference of the
// 64-bit instantiation; the analytic side runs in 64 or 32 bits. Layer cases
// reduce their output to a scalar with a fixed random projection.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sf3cnn/tensor.hpp"

namespace sf3cnn::gradcheck {

enum class Precision { f64, f32 };

const char* to_string(Precision p);
Precision parse_precision(const std::string& name);

struct Options {
  Precision precision = Precision::f64;
  std::uint64_t seed = 7;
  std::size_t max_entries = 48;  // per input tensor; larger tensors are sampled
  double step = 1e-3;             // scaled by max(1, |x|)
  std::optional<double> tolerance;
};

// |a - n| / max(|a|, |n|, floor); gradients below the floor compare absolutely.
double relative_error(double analytic, double numeric, double floor);
// 1e-6 in 64 bits. 32-bit rounding grows with the magnitude of the summed
// terms, so there the floor is max(1e-3, 1e-4 * scale), scale being the
// largest gradient entry of the tensor.
double error_floor(Precision p, double scale);
// 1e-3 for 32-bit runs, 1e-4 for the loss scope, 1e-5 otherwise.
double default_tolerance(const std::string& scope, Precision p);

template <typename T>
struct Problem {
  std::vector<std::string> names;
  std::vector<BasicTensor<T>> inputs;
  // Returns the objective at `in`; fills d(objective)/d(in[k]) when grads
  // is non-null.
  std::function<double(const std::vector<BasicTensor<T>>& in,
                       std::vector<BasicTensor<T>>* grads)>
      eval;
};

// Both builders must produce the same input values (32-bit representable).
struct Case {
  std::string name;
  std::function<Problem<double>()> f64;
  std::function<Problem<float>()> f32;
};

struct GroupResult {
  std::string name;  // case.input
  std::size_t checked = 0;
  double max_rel_err = 0.0;
  double max_abs_err = 0.0;
  bool passed = false;
};

struct Report {
  std::string scope;
  Precision precision = Precision::f64;
  double tolerance = 0.0;
  std::vector<GroupResult> groups;

  bool passed() const;
};

std::vector<GroupResult> check_case(const Case& c, const Options& opts, double tolerance);

// Public scopes: loss, layer:<name> (conv3d, prelu, batchnorm, pool, linear,
// residual), layer:all and model (64-bit only). "fixture:corrupted" is a linear layer with
// a deliberately wrong weight gradient, used to test the harness itself.
std::vector<std::string> scopes();
std::vector<Case> cases_for(const std::string& scope, std::uint64_t seed);

// ConfigError for an unknown scope.
Report run(const std::string& scope, const Options& opts);

std::string format_report(const Report& report);

}  // namespace sf3cnn::gradcheck
