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

#include "sf3cnn/rng.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "sf3cnn/error.hpp"

namespace sf3cnn {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng Rng::derive(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = mix64(seed);
  for (std::uint64_t k : keys) h = mix64(h ^ mix64(k));
  return Rng(h);
}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::size_t Rng::index(std::size_t n) {
  if (n == 0) throw DomainError("Rng::index needs n >= 1");
  const auto i = static_cast<std::size_t>(uniform() * static_cast<double>(n));
  return i < n ? i : n - 1;
}

double Rng::normal() {
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::string Rng::save() const {
  std::ostringstream os;
  os << engine_;
  return os.str();
}

Rng Rng::restore(const std::string& state) {
  Rng rng;
  std::istringstream is(state);
  is >> rng.engine_;
  if (is.fail()) throw IoError("malformed rng state");
  return rng;
}

template <typename T>
BasicTensor<T> rng_uniform(Rng& rng, Shape dims, T lo, T hi) {
  BasicTensor<T> out(std::move(dims));
  for (T& v : out.values()) v = static_cast<T>(rng.uniform(lo, hi));
  return out;
}

template <typename T>
BasicTensor<T> rng_normal(Rng& rng, Shape dims, T mean, T stddev) {
  if (!(stddev >= T{0})) throw DomainError("normal stddev must be >= 0");
  BasicTensor<T> out(std::move(dims));
  for (T& v : out.values()) v = static_cast<T>(mean + stddev * rng.normal());
  return out;
}

template Tensor rng_uniform(Rng&, Shape, float, float);
template Tensor64 rng_uniform(Rng&, Shape, double, double);
template Tensor rng_normal(Rng&, Shape, float, float);
template Tensor64 rng_normal(Rng&, Shape, double, double);

}  // namespace sf3cnn
