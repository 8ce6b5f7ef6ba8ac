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

// Parameterized layers that record themselves on a Tape, and the residual
// block built from them. Each module owns its parameter values and their
// gradient accumulators; ParamRef exposes both to optimizers and
// checkpointing.

#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "sf3cnn/layers.hpp"
#include "sf3cnn/rng.hpp"
#include "sf3cnn/tape.hpp"

namespace sf3cnn {

template <typename T>
struct ParamRef {
  std::string name;
  BasicTensor<T>* value;
  BasicTensor<T>* grad;
};

// Non-trainable state saved with checkpoints (batch-norm running stats).
template <typename T>
struct BufferRef {
  std::string name;
  BasicTensor<T>* value;
};

template <typename T>
struct ParamList {
  std::vector<ParamRef<T>> params;
  std::vector<BufferRef<T>> buffers;

  std::size_t parameter_count() const;
  void zero_grad();
};

enum class ActivationKind { prelu, relu };

// Negative-side slope used for He initialization gain.
inline constexpr double kPReluInitSlope = 0.25;

template <typename T>
class Conv3d {
 public:
  Conv3d(std::string name, std::size_t in_c, std::size_t out_c, Extent3 kernel,
         Extent3 stride = {1, 1, 1}, Extent3 padding = {0, 0, 0}, bool bias = false);

  // Fan-in scaled normal draws: std = sqrt(2 / ((1 + a^2) * fan_in)).
  void init(Rng& rng, double negative_slope);
  void zero();

  // The input gradient is only computed when x requires one.
  Var forward(Tape<T>& tape, Var x);
  Shape output_shape(const Shape& in) const;
  void collect(ParamList<T>& out);

  const Conv3dParams<T>& params() const { return p_; }
  Conv3dParams<T>& params() { return p_; }

 private:
  std::string name_;
  Conv3dParams<T> p_;
  BasicTensor<T> grad_w_;
  std::optional<BasicTensor<T>> grad_b_;
};

template <typename T>
class BatchNorm3d {
 public:
  BatchNorm3d(std::string name, std::size_t channels);

  Var forward(Tape<T>& tape, Var x, Mode mode);
  void collect(ParamList<T>& out);

  BatchNorm3dParams<T>& params() { return p_; }

 private:
  std::string name_;
  BatchNorm3dParams<T> p_;
  BasicTensor<T> grad_gamma_;
  BasicTensor<T> grad_beta_;
};

// PReLU with learnable per-channel slopes, or ReLU (slope fixed at zero).
template <typename T>
class Activation {
 public:
  Activation(std::string name, ActivationKind kind, std::size_t channels);

  Var forward(Tape<T>& tape, Var x);
  void collect(ParamList<T>& out);

  ActivationKind kind() const { return kind_; }
  double init_slope() const { return kind_ == ActivationKind::prelu ? kPReluInitSlope : 0.0; }

 private:
  std::string name_;
  ActivationKind kind_;
  BasicTensor<T> slope_;
  BasicTensor<T> grad_slope_;
};

template <typename T>
class Linear {
 public:
  Linear(std::string name, std::size_t in_features, std::size_t out_features);

  void init(Rng& rng, double negative_slope);
  Var forward(Tape<T>& tape, Var x);
  void collect(ParamList<T>& out);

  BasicTensor<T>& weight() { return w_; }
  BasicTensor<T>& bias() { return b_; }
  const BasicTensor<T>& weight() const { return w_; }
  const BasicTensor<T>& bias() const { return b_; }

 private:
  std::string name_;
  BasicTensor<T> w_;
  BasicTensor<T> b_;
  BasicTensor<T> grad_w_;
  BasicTensor<T> grad_b_;
};

// Stateless tape ops.
template <typename T>
Var tape_add(Tape<T>& tape, Var a, Var b);

template <typename T>
Var tape_pool3d(Tape<T>& tape, Var x, const Pool3dSpec& spec);

template <typename T>
Var tape_global_avg_pool(Tape<T>& tape, Var x);

// ---------------------------------------------------------------------------

enum class BlockGenre { basic, bottleneck, wide, preact, dense_transition };

const char* to_string(BlockGenre genre);
BlockGenre parse_block_genre(const std::string& name);

// Channel plan of one residual block. `planes` is the inner width used by
// the bottleneck-style genres; basic blocks ignore it. Stride applies to
// time, height and width alike.
struct BlockSpec {
  BlockGenre genre = BlockGenre::basic;
  std::size_t in_channels = 0;
  std::size_t planes = 0;
  std::size_t out_channels = 0;
  std::size_t stride = 1;
  ActivationKind activation = ActivationKind::prelu;
};

// output = act(main(x) + skip(x)) for basic/bottleneck/wide.
// output = main(h) + skip(h), h = act(bn(x)), for preact/dense-transition.
// The skip path is a strided 1x1x1 projection whenever channels or stride
// disagree, identity otherwise.
template <typename T>
class ResidualBlock {
 public:
  ResidualBlock(std::string name, const BlockSpec& spec);

  void init(Rng& rng);
  // Makes the main path contribute exactly zero.
  void zero_main_path();

  Var forward(Tape<T>& tape, Var x, Mode mode);
  Shape output_shape(const Shape& in) const;
  void collect(ParamList<T>& out);

  const BlockSpec& spec() const { return spec_; }
  bool has_projection() const { return proj_conv_.has_value(); }

 private:
  struct Step {
    enum class Kind { conv, bn, act } kind;
    std::size_t index;
  };

  void add_conv(std::size_t in, std::size_t out, std::size_t k, std::size_t stride);
  void add_bn(std::size_t channels);
  void add_act(std::size_t channels);
  Var run(Tape<T>& tape, const std::vector<Step>& steps, Var x, Mode mode);

  std::string name_;
  BlockSpec spec_;
  std::vector<Conv3d<T>> convs_;
  std::vector<BatchNorm3d<T>> bns_;
  std::vector<Activation<T>> acts_;
  std::vector<Step> pre_;   // pre-activation prefix (preact genres)
  std::vector<Step> main_;
  std::optional<Conv3d<T>> proj_conv_;
  std::optional<BatchNorm3d<T>> proj_bn_;
  std::optional<Activation<T>> out_act_;
};

// Validates a block spec; ConfigError on an impossible channel plan.
void validate(const BlockSpec& spec);

}  // namespace sf3cnn
