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

#include "sf3cnn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>

#include "gemm.hpp"
#include "sf3cnn/error.hpp"

namespace sf3cnn {

std::size_t shape_numel(const Shape& dims) {
  if (dims.empty()) throw ShapeError("tensor dims must not be empty");
  std::size_t n = 1;
  for (std::size_t d : dims) {
    if (d == 0) throw ShapeError("tensor extent must be >= 1 in " + shape_string(dims));
    n *= d;
  }
  return n;
}

std::string shape_string(const Shape& dims) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) os << 'x';
    os << dims[i];
  }
  os << ']';
  return os.str();
}

template <typename T>
BasicTensor<T>::BasicTensor() : dims_{1}, data_(1, T{0}) {}

template <typename T>
BasicTensor<T>::BasicTensor(Shape dims, T fill)
    : dims_(std::move(dims)), data_(shape_numel(dims_), fill) {}

template <typename T>
BasicTensor<T>::BasicTensor(Shape dims, std::vector<T> values)
    : dims_(std::move(dims)), data_(std::move(values)) {
  if (data_.size() != shape_numel(dims_)) {
    throw ShapeError("tensor of dims " + shape_string(dims_) + " given " +
                     std::to_string(data_.size()) + " values");
  }
}

template <typename T>
BasicTensor<T>::BasicTensor(Shape dims, std::initializer_list<T> values)
    : BasicTensor(std::move(dims), std::vector<T>(values)) {}

template <typename T>
std::size_t BasicTensor<T>::dim(std::size_t axis) const {
  if (axis >= dims_.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " +
                     shape_string(dims_));
  }
  return dims_[axis];
}

template <typename T>
std::size_t BasicTensor<T>::offset(std::initializer_list<std::size_t> index) const {
  if (index.size() != dims_.size()) {
    throw ShapeError("index rank " + std::to_string(index.size()) +
                     " does not match " + shape_string(dims_));
  }
  std::size_t off = 0;
  std::size_t axis = 0;
  for (std::size_t i : index) {
    if (i >= dims_[axis]) {
      throw ShapeError("index " + std::to_string(i) + " out of range on axis " +
                       std::to_string(axis) + " of " + shape_string(dims_));
    }
    off = off * dims_[axis] + i;
    ++axis;
  }
  return off;
}

template <typename T>
T& BasicTensor<T>::at(std::initializer_list<std::size_t> index) {
  return data_[offset(index)];
}

template <typename T>
const T& BasicTensor<T>::at(std::initializer_list<std::size_t> index) const {
  return data_[offset(index)];
}

template <typename T>
BasicTensor<T> BasicTensor<T>::reshaped(Shape dims) const& {
  return BasicTensor(std::move(dims), data_);
}

template <typename T>
BasicTensor<T> BasicTensor<T>::reshaped(Shape dims) && {
  return BasicTensor(std::move(dims), std::move(data_));
}

template <typename T>
void BasicTensor<T>::fill(T value) {
  std::fill(data_.begin(), data_.end(), value);
}

Shape broadcast_shape(const Shape& a, const Shape& b) {
  const std::size_t na = shape_numel(a);
  const std::size_t nb = shape_numel(b);
  if (a == b) return a;
  if (nb == 1) return a;
  if (na == 1) return b;
  auto trailing = [](const Shape& big, const Shape& small) {
    return small.size() <= big.size() &&
           std::equal(small.rbegin(), small.rend(), big.rbegin());
  };
  if (trailing(a, b)) return a;
  if (trailing(b, a)) return b;
  throw ShapeError("cannot broadcast " + shape_string(a) + " with " + shape_string(b));
}

Shape matmul_shape(const Shape& a, const Shape& b) {
  if (a.size() != 2 || b.size() != 2 || a[1] != b[0]) {
    throw ShapeError("matmul dimension mismatch: " + shape_string(a) + " x " +
                     shape_string(b));
  }
  return {a[0], b[1]};
}

Shape reduce_shape(const Shape& dims, std::size_t axis) {
  shape_numel(dims);
  if (axis >= dims.size()) {
    throw ShapeError("reduce axis " + std::to_string(axis) + " out of range for " +
                     shape_string(dims));
  }
  Shape out;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i != axis) out.push_back(dims[i]);
  }
  if (out.empty()) out.push_back(1);
  return out;
}

namespace {

template <typename T>
T apply_binary(Elementwise op, T x, T y) {
  switch (op) {
    case Elementwise::add:
      return x + y;
    case Elementwise::sub:
      return x - y;
    case Elementwise::mul:
    case Elementwise::scale:
      return x * y;
    case Elementwise::max:
      return std::max(x, y);
    default:
      throw DomainError("elementwise op is not binary");
  }
}

}  // namespace

template <typename T>
BasicTensor<T> elementwise(Elementwise op, const BasicTensor<T>& a) {
  BasicTensor<T> out(a.dims());
  const T* in = a.data();
  T* o = out.data();
  const std::size_t n = a.size();
  switch (op) {
    case Elementwise::exp:
      for (std::size_t i = 0; i < n; ++i) o[i] = std::exp(in[i]);
      break;
    case Elementwise::log:
      for (std::size_t i = 0; i < n; ++i) {
        if (!(in[i] > T{0})) {
          throw DomainError("log of non-positive value at flat index " +
                            std::to_string(i));
        }
        o[i] = std::log(in[i]);
      }
      break;
    case Elementwise::cos:
      for (std::size_t i = 0; i < n; ++i) o[i] = std::cos(in[i]);
      break;
    case Elementwise::acos:
      for (std::size_t i = 0; i < n; ++i) {
        o[i] = std::acos(std::clamp(in[i], T{-1}, T{1}));
      }
      break;
    default:
      throw DomainError("elementwise op needs a second operand");
  }
  return out;
}

template <typename T>
BasicTensor<T> elementwise(Elementwise op, const BasicTensor<T>& a,
                           const BasicTensor<T>& b) {
  const Shape dims = broadcast_shape(a.dims(), b.dims());
  BasicTensor<T> out(dims);
  const std::size_t n = out.size();
  const std::size_t na = a.size();
  const std::size_t nb = b.size();
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = apply_binary(op, a[na == n ? i : i % na], b[nb == n ? i : i % nb]);
  }
  return out;
}

template <typename T>
BasicTensor<T> elementwise(Elementwise op, const BasicTensor<T>& a, T scalar) {
  BasicTensor<T> out(a.dims());
  if (op == Elementwise::sub) {
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - scalar;
    return out;
  }
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = apply_binary(op, a[i], scalar);
  return out;
}

template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  const Shape dims = matmul_shape(a.dims(), b.dims());
  BasicTensor<T> out(dims);
  detail::gemm_nn(dims[0], dims[1], a.dim(1), a.data(), b.data(), out.data());
  return out;
}

template <typename T>
BasicTensor<T> reduce(Reduction op, const BasicTensor<T>& t, std::size_t axis) {
  const Shape out_dims = reduce_shape(t.dims(), axis);
  std::size_t outer = 1;
  std::size_t inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= t.dims()[i];
  for (std::size_t i = axis + 1; i < t.rank(); ++i) inner *= t.dims()[i];
  const std::size_t len = t.dims()[axis];
  BasicTensor<T> out(out_dims);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const T* base = t.data() + o * len * inner + in;
      T& dst = out[o * inner + in];
      switch (op) {
        case Reduction::sum:
        case Reduction::mean: {
          double acc = 0.0;
          for (std::size_t k = 0; k < len; ++k) acc += base[k * inner];
          if (op == Reduction::mean) acc /= static_cast<double>(len);
          dst = static_cast<T>(acc);
          break;
        }
        case Reduction::max:
        case Reduction::argmax: {
          std::size_t best = 0;
          for (std::size_t k = 1; k < len; ++k) {
            if (base[k * inner] > base[best * inner]) best = k;
          }
          dst = op == Reduction::max ? base[best * inner] : static_cast<T>(best);
          break;
        }
      }
    }
  }
  return out;
}

template <typename T>
double dot(std::span<const T> a, std::span<const T> b) {
  if (a.size() != b.size()) {
    throw ShapeError("dot of lengths " + std::to_string(a.size()) + " and " +
                     std::to_string(b.size()));
  }
  return detail::blocked_dot(a.data(), b.data(), a.size());
}

#define SF3CNN_INSTANTIATE(T)                                                     \
  template class BasicTensor<T>;                                                  \
  template BasicTensor<T> elementwise(Elementwise, const BasicTensor<T>&);        \
  template BasicTensor<T> elementwise(Elementwise, const BasicTensor<T>&,         \
                                      const BasicTensor<T>&);                     \
  template BasicTensor<T> elementwise(Elementwise, const BasicTensor<T>&, T);     \
  template BasicTensor<T> matmul(const BasicTensor<T>&, const BasicTensor<T>&);   \
  template BasicTensor<T> reduce(Reduction, const BasicTensor<T>&, std::size_t);  \
  template double dot(std::span<const T>, std::span<const T>);

SF3CNN_INSTANTIATE(float)
SF3CNN_INSTANTIATE(double)

#undef SF3CNN_INSTANTIATE

}  // namespace sf3cnn
