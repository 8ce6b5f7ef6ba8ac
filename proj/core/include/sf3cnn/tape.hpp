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
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sf3cnn/error.hpp"
#include "sf3cnn/tensor.hpp"

namespace sf3cnn {

// Handle to a value recorded on a Tape.
struct Var {
  std::size_t id = 0;
};

// Dynamic reverse-mode tape with layer-granularity nodes.
//
// Values are appended in execution order, so replaying the nodes backwards
// is a reverse topological order and visits each node once. Backward
// functions receive the gradient of their output and one slot per input;
// they must ACCUMULATE into non-null slots (a null slot means the input does
// not need a gradient). Parameter gradients are accumulated by the layers
// themselves, since parameters outlive any single tape.
template <typename T>
class Tape {
 public:
  using TensorT = BasicTensor<T>;
  using BackwardFn = std::function<void(const Tape& tape, const TensorT& grad_out,
                                        std::span<TensorT* const> grad_inputs)>;

  struct Node {
    std::string op;
    std::vector<Var> inputs;
    Var output;
    BackwardFn backward;
  };

  Var leaf(TensorT value, bool requires_grad = false) {
    values_.push_back(Slot{std::move(value), {}, requires_grad, false});
    return Var{values_.size() - 1};
  }

  Var record(std::string op, TensorT value, std::vector<Var> inputs, BackwardFn backward) {
    values_.push_back(Slot{std::move(value), {}, true, false});
    const Var out{values_.size() - 1};
    nodes_.push_back(Node{std::move(op), std::move(inputs), out, std::move(backward)});
    return out;
  }

  const TensorT& value(Var v) const { return values_.at(v.id).value; }
  bool requires_grad(Var v) const { return values_.at(v.id).requires_grad; }
  bool has_grad(Var v) const { return values_.at(v.id).has_grad; }

  const TensorT& grad(Var v) const {
    const Slot& s = values_.at(v.id);
    if (!s.has_grad) throw Error("no gradient reached tape value " + std::to_string(v.id));
    return s.grad;
  }

  const std::vector<Node>& nodes() const { return nodes_; }
  std::size_t size() const { return values_.size(); }

  // Seeds d(root) = seed and propagates to every value that requires grad.
  void backward(Var root, const TensorT& seed) {
    Slot& r = values_.at(root.id);
    if (seed.dims() != r.value.dims()) {
      throw ShapeError("backward seed " + shape_string(seed.dims()) +
                       " does not match root " + shape_string(r.value.dims()));
    }
    r.grad = seed;
    r.has_grad = true;
    std::vector<TensorT*> slots;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      Slot& out = values_[it->output.id];
      if (!out.has_grad) continue;
      slots.clear();
      for (Var in : it->inputs) {
        Slot& s = values_[in.id];
        if (!s.requires_grad) {
          slots.push_back(nullptr);
          continue;
        }
        if (!s.has_grad) {
          s.grad = TensorT(s.value.dims());
          s.has_grad = true;
        }
        slots.push_back(&s.grad);
      }
      it->backward(*this, out.grad, slots);
    }
  }

  void clear() {
    values_.clear();
    nodes_.clear();
  }

 private:
  struct Slot {
    TensorT value;
    TensorT grad;
    bool requires_grad;
    bool has_grad;
  };

  std::vector<Slot> values_;
  std::vector<Node> nodes_;
};

}  // namespace sf3cnn
