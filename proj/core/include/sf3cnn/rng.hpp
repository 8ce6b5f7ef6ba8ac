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
#include <initializer_list>
#include <random>
#include <string>

#include "sf3cnn/tensor.hpp"

namespace sf3cnn {

// Seeded pseudorandom source. The engine is std::mt19937_64, whose output
// sequence is fixed by the C++ standard; all derived draws use the transforms
// below rather than the implementation-defined std distributions, so a seed
// yields the same stream on every conforming platform.
//
//   uniform():  (next >> 11) * 2^-53, in [0, 1)
//   normal():   Box-Muller, cos branch, from two uniform() draws
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  // Independent stream for a (seed, key...) tuple, e.g. (seed, epoch, clip).
  static Rng derive(std::uint64_t seed, std::initializer_list<std::uint64_t> keys);

  std::uint64_t next_u64() { return engine_(); }
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Integer in [0, n).
  std::size_t index(std::size_t n);
  bool bernoulli(double p) { return uniform() < p; }
  double normal();

  // Text form of the engine state; restore() accepts what save() produced.
  std::string save() const;
  static Rng restore(const std::string& state);

  friend bool operator==(const Rng& a, const Rng& b) { return a.engine_ == b.engine_; }

 private:
  std::mt19937_64 engine_;
};

// splitmix64 finalizer; mixes keys for Rng::derive and config hashing.
std::uint64_t mix64(std::uint64_t x);

template <typename T>
BasicTensor<T> rng_uniform(Rng& rng, Shape dims, T lo = T{0}, T hi = T{1});

// Throws DomainError when stddev < 0. stddev == 0 yields the constant mean.
template <typename T>
BasicTensor<T> rng_normal(Rng& rng, Shape dims, T mean, T stddev);

}  // namespace sf3cnn
