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

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

namespace sf3cnn {

using Shape = std::vector<std::size_t>;

// Number of elements described by `dims`. Throws ShapeError when dims is
// empty or holds a zero extent.
std::size_t shape_numel(const Shape& dims);

// Renders dims as "[2x3x4]".
std::string shape_string(const Shape& dims);

// Dense row-major array of reals. Storage length always equals the product
// of the extents, and there is always at least one extent. The element type
// is float for training and double for the gradient verification build.
template <typename T>
class BasicTensor {
  static_assert(std::is_floating_point_v<T>);

 public:
  using value_type = T;

  // A single zero element with dims [1].
  BasicTensor();
  explicit BasicTensor(Shape dims, T fill = T{0});
  BasicTensor(Shape dims, std::vector<T> values);
  BasicTensor(Shape dims, std::initializer_list<T> values);

  const Shape& dims() const noexcept { return dims_; }
  std::size_t rank() const noexcept { return dims_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const noexcept { return data_.size(); }

  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }
  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  // Bounds-checked multi-index access.
  T& at(std::initializer_list<std::size_t> index);
  const T& at(std::initializer_list<std::size_t> index) const;

  // Same storage, new extents with an equal element count.
  BasicTensor reshaped(Shape dims) const&;
  BasicTensor reshaped(Shape dims) &&;

  void fill(T value);

  template <typename U>
  BasicTensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return BasicTensor<U>(dims_, std::move(out));
  }

  friend bool operator==(const BasicTensor&, const BasicTensor&) = default;

 private:
  std::size_t offset(std::initializer_list<std::size_t> index) const;

  Shape dims_;
  std::vector<T> data_;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

// ---------------------------------------------------------------------------
// Shape inference. Each op's output dims are a pure function of its input
// dims; these are exposed so they can be checked without touching data.

// Broadcast for binary elementwise ops: equal dims, `b` matching the trailing
// dims of `a` (or vice versa), or either side being a single element.
Shape broadcast_shape(const Shape& a, const Shape& b);
Shape matmul_shape(const Shape& a, const Shape& b);
Shape reduce_shape(const Shape& dims, std::size_t axis);

// ---------------------------------------------------------------------------
// Kernels.

enum class Elementwise { add, sub, mul, scale, exp, log, cos, acos, max };

// Unary kernels: exp, log, cos, acos. acos clamps its argument to [-1, 1];
// log rejects non-positive values with DomainError.
template <typename T>
BasicTensor<T> elementwise(Elementwise op, const BasicTensor<T>& a);

// Binary kernels: add, sub, mul, max, with broadcasting per broadcast_shape.
template <typename T>
BasicTensor<T> elementwise(Elementwise op, const BasicTensor<T>& a,
                           const BasicTensor<T>& b);

// Scalar kernels: add, sub, mul, scale (same as mul), max.
template <typename T>
BasicTensor<T> elementwise(Elementwise op, const BasicTensor<T>& a, T scalar);

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return elementwise(Elementwise::add, a, b);
}
template <typename T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return elementwise(Elementwise::sub, a, b);
}
template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return elementwise(Elementwise::mul, a, b);
}
template <typename T>
BasicTensor<T> maximum(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return elementwise(Elementwise::max, a, b);
}
template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& a, T factor) {
  return elementwise(Elementwise::scale, a, factor);
}
template <typename T>
BasicTensor<T> exp(const BasicTensor<T>& a) {
  return elementwise(Elementwise::exp, a);
}
template <typename T>
BasicTensor<T> log(const BasicTensor<T>& a) {
  return elementwise(Elementwise::log, a);
}
template <typename T>
BasicTensor<T> cos(const BasicTensor<T>& a) {
  return elementwise(Elementwise::cos, a);
}
template <typename T>
BasicTensor<T> acos(const BasicTensor<T>& a) {
  return elementwise(Elementwise::acos, a);
}

// Row-major matrix product of rank-2 tensors. Products are accumulated in T
// over blocks of the inner dimension, and block partial sums in double.
template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b);

enum class Reduction { sum, mean, max, argmax };

// Reduces along `axis`, removing it (a rank-1 input reduces to dims [1]).
// Sums accumulate in double; argmax breaks ties toward the lowest index and
// stores the index as a real.
template <typename T>
BasicTensor<T> reduce(Reduction op, const BasicTensor<T>& t, std::size_t axis);

// Inner product accumulated in double.
template <typename T>
double dot(std::span<const T> a, std::span<const T> b);

}  // namespace sf3cnn
