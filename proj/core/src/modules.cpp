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

#include "sf3cnn/modules.hpp"

#include <cmath>
#include <utility>

#include "sf3cnn/error.hpp"

namespace sf3cnn {

namespace {

template <typename T>
void accumulate(BasicTensor<T>& dst, const BasicTensor<T>& src) {
  if (dst.dims() != src.dims()) {
    throw ShapeError("gradient " + shape_string(src.dims()) + " accumulated into " +
                     shape_string(dst.dims()));
  }
  T* d = dst.data();
  const T* s = src.data();
  for (std::size_t i = 0; i < dst.size(); ++i) d[i] += s[i];
}

template <typename T>
void he_normal(Rng& rng, BasicTensor<T>& w, std::size_t fan_in, double negative_slope) {
  const double stddev =
      std::sqrt(2.0 / ((1.0 + negative_slope * negative_slope) * static_cast<double>(fan_in)));
  w = rng_normal<T>(rng, w.dims(), T{0}, static_cast<T>(stddev));
}

}  // namespace

template <typename T>
std::size_t ParamList<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params) n += p.value->size();
  return n;
}

template <typename T>
void ParamList<T>::zero_grad() {
  for (auto& p : params) p.grad->fill(T{0});
}

// ---------------------------------------------------------------------------

template <typename T>
Conv3d<T>::Conv3d(std::string name, std::size_t in_c, std::size_t out_c, Extent3 kernel,
                  Extent3 stride, Extent3 padding, bool bias)
    : name_(std::move(name)),
      p_{BasicTensor<T>({out_c, in_c, kernel.t, kernel.h, kernel.w}), std::nullopt, stride,
         padding},
      grad_w_(p_.weights.dims()) {
  if (stride.t == 0 || stride.h == 0 || stride.w == 0) {
    throw ConfigError("conv3d " + name_ + ": stride must be >= 1");
  }
  if (bias) {
    p_.bias = BasicTensor<T>({out_c});
    grad_b_ = BasicTensor<T>({out_c});
  }
}

template <typename T>
void Conv3d<T>::init(Rng& rng, double negative_slope) {
  const Shape& d = p_.weights.dims();
  he_normal(rng, p_.weights, d[1] * d[2] * d[3] * d[4], negative_slope);
  if (p_.bias) p_.bias->fill(T{0});
}

template <typename T>
void Conv3d<T>::zero() {
  p_.weights.fill(T{0});
  if (p_.bias) p_.bias->fill(T{0});
}

template <typename T>
Var Conv3d<T>::forward(Tape<T>& tape, Var x) {
  BasicTensor<T> y = conv3d_forward(tape.value(x), p_);
  return tape.record(
      "conv3d:" + name_, std::move(y), {x},
      [this, x](const Tape<T>& t, const BasicTensor<T>& gy,
                std::span<BasicTensor<T>* const> gin) {
        const bool want_x = gin[0] != nullptr;
        auto g = conv3d_backward(gy, t.value(x), p_, want_x);
        accumulate(grad_w_, g.grad_w);
        if (grad_b_) accumulate(*grad_b_, *g.grad_b);
        if (want_x) accumulate(*gin[0], *g.grad_x);
      });
}

template <typename T>
Shape Conv3d<T>::output_shape(const Shape& in) const {
  return conv3d_output_shape(in, p_.weights.dims(), p_.stride, p_.padding);
}

template <typename T>
void Conv3d<T>::collect(ParamList<T>& out) {
  out.params.push_back({name_ + ".weight", &p_.weights, &grad_w_});
  if (p_.bias) out.params.push_back({name_ + ".bias", &*p_.bias, &*grad_b_});
}

// ---------------------------------------------------------------------------

template <typename T>
BatchNorm3d<T>::BatchNorm3d(std::string name, std::size_t channels)
    : name_(std::move(name)),
      p_(BatchNorm3dParams<T>::identity(channels)),
      grad_gamma_({channels}),
      grad_beta_({channels}) {}

template <typename T>
Var BatchNorm3d<T>::forward(Tape<T>& tape, Var x, Mode mode) {
  BatchNormCache<T> cache;
  BasicTensor<T> y = batchnorm3d_forward(tape.value(x), p_, mode, &cache);
  return tape.record("batchnorm:" + name_, std::move(y), {x},
                     [this, cache = std::move(cache)](const Tape<T>&, const BasicTensor<T>& gy,
                                                      std::span<BasicTensor<T>* const> gin) {
                       auto g = batchnorm3d_backward(gy, cache, p_);
                       accumulate(grad_gamma_, g.grad_gamma);
                       accumulate(grad_beta_, g.grad_beta);
                       if (gin[0]) accumulate(*gin[0], g.grad_x);
                     });
}

template <typename T>
void BatchNorm3d<T>::collect(ParamList<T>& out) {
  out.params.push_back({name_ + ".gamma", &p_.gamma, &grad_gamma_});
  out.params.push_back({name_ + ".beta", &p_.beta, &grad_beta_});
  out.buffers.push_back({name_ + ".running_mean", &p_.running_mean});
  out.buffers.push_back({name_ + ".running_var", &p_.running_var});
}

// ---------------------------------------------------------------------------

template <typename T>
Activation<T>::Activation(std::string name, ActivationKind kind, std::size_t channels)
    : name_(std::move(name)),
      kind_(kind),
      slope_({channels}, static_cast<T>(kind == ActivationKind::prelu ? kPReluInitSlope : 0.0)),
      grad_slope_({channels}) {}

template <typename T>
Var Activation<T>::forward(Tape<T>& tape, Var x) {
  BasicTensor<T> y = prelu_forward(tape.value(x), slope_);
  const char* op = kind_ == ActivationKind::prelu ? "prelu:" : "relu:";
  return tape.record(op + name_, std::move(y), {x},
                     [this, x](const Tape<T>& t, const BasicTensor<T>& gy,
                               std::span<BasicTensor<T>* const> gin) {
                       auto g = prelu_backward(gy, t.value(x), slope_);
                       if (kind_ == ActivationKind::prelu) accumulate(grad_slope_, g.grad_slope);
                       if (gin[0]) accumulate(*gin[0], g.grad_x);
                     });
}

template <typename T>
void Activation<T>::collect(ParamList<T>& out) {
  if (kind_ == ActivationKind::prelu) out.params.push_back({name_ + ".slope", &slope_, &grad_slope_});
}

// ---------------------------------------------------------------------------

template <typename T>
Linear<T>::Linear(std::string name, std::size_t in_features, std::size_t out_features)
    : name_(std::move(name)),
      w_({out_features, in_features}),
      b_({out_features}),
      grad_w_({out_features, in_features}),
      grad_b_({out_features}) {}

template <typename T>
void Linear<T>::init(Rng& rng, double negative_slope) {
  he_normal(rng, w_, w_.dim(1), negative_slope);
  b_.fill(T{0});
}

template <typename T>
Var Linear<T>::forward(Tape<T>& tape, Var x) {
  BasicTensor<T> y = linear_forward(tape.value(x), w_, b_);
  return tape.record("linear:" + name_, std::move(y), {x},
                     [this, x](const Tape<T>& t, const BasicTensor<T>& gy,
                               std::span<BasicTensor<T>* const> gin) {
                       auto g = linear_backward(gy, t.value(x), w_);
                       accumulate(grad_w_, g.grad_w);
                       accumulate(grad_b_, g.grad_b);
                       if (gin[0]) accumulate(*gin[0], g.grad_x);
                     });
}

template <typename T>
void Linear<T>::collect(ParamList<T>& out) {
  out.params.push_back({name_ + ".weight", &w_, &grad_w_});
  out.params.push_back({name_ + ".bias", &b_, &grad_b_});
}

// ---------------------------------------------------------------------------

template <typename T>
Var tape_add(Tape<T>& tape, Var a, Var b) {
  BasicTensor<T> y = tape.value(a);
  const BasicTensor<T>& bv = tape.value(b);
  if (bv.dims() != y.dims()) {
    throw ShapeError("residual sum of " + shape_string(y.dims()) + " and " +
                     shape_string(bv.dims()));
  }
  accumulate(y, bv);
  return tape.record("add", std::move(y), {a, b},
                     [](const Tape<T>&, const BasicTensor<T>& gy,
                        std::span<BasicTensor<T>* const> gin) {
                       if (gin[0]) accumulate(*gin[0], gy);
                       if (gin[1]) accumulate(*gin[1], gy);
                     });
}

template <typename T>
Var tape_pool3d(Tape<T>& tape, Var x, const Pool3dSpec& spec) {
  std::vector<std::size_t> argmax;
  BasicTensor<T> y = pool3d_forward(tape.value(x), spec, &argmax);
  return tape.record(spec.kind == PoolKind::max ? "maxpool3d" : "avgpool3d", std::move(y), {x},
                     [x, spec, argmax = std::move(argmax)](const Tape<T>& t,
                                                           const BasicTensor<T>& gy,
                                                           std::span<BasicTensor<T>* const> gin) {
                       if (gin[0]) {
                         accumulate(*gin[0], pool3d_backward(gy, t.value(x).dims(), spec, argmax));
                       }
                     });
}

template <typename T>
Var tape_global_avg_pool(Tape<T>& tape, Var x) {
  BasicTensor<T> y = global_avg_pool(tape.value(x));
  return tape.record("global_avg_pool", std::move(y), {x},
                     [x](const Tape<T>& t, const BasicTensor<T>& gy,
                         std::span<BasicTensor<T>* const> gin) {
                       if (gin[0]) accumulate(*gin[0], global_avg_pool_backward(gy, t.value(x).dims()));
                     });
}

// ---------------------------------------------------------------------------

const char* to_string(BlockGenre genre) {
  switch (genre) {
    case BlockGenre::basic:
      return "basic";
    case BlockGenre::bottleneck:
      return "bottleneck";
    case BlockGenre::wide:
      return "wide";
    case BlockGenre::preact:
      return "preact";
    case BlockGenre::dense_transition:
      return "dense-transition";
  }
  return "?";
}

BlockGenre parse_block_genre(const std::string& name) {
  for (BlockGenre g : {BlockGenre::basic, BlockGenre::bottleneck, BlockGenre::wide,
                       BlockGenre::preact, BlockGenre::dense_transition}) {
    if (name == to_string(g)) return g;
  }
  throw ConfigError("unknown block genre '" + name + "'");
}

void validate(const BlockSpec& spec) {
  if (spec.in_channels == 0 || spec.out_channels == 0) {
    throw ConfigError("residual block needs >= 1 input and output channel");
  }
  if (spec.stride == 0) throw ConfigError("residual block stride must be >= 1");
  if (spec.genre != BlockGenre::basic && spec.planes == 0) {
    throw ConfigError(std::string(to_string(spec.genre)) + " block needs planes >= 1");
  }
}

template <typename T>
void ResidualBlock<T>::add_conv(std::size_t in, std::size_t out, std::size_t k,
                                std::size_t stride) {
  const std::size_t pad = k / 2;
  convs_.emplace_back(name_ + ".conv" + std::to_string(convs_.size() + 1), in, out,
                      Extent3::cube(k), Extent3::cube(stride), Extent3::cube(pad));
  main_.push_back({Step::Kind::conv, convs_.size() - 1});
}

template <typename T>
void ResidualBlock<T>::add_bn(std::size_t channels) {
  bns_.emplace_back(name_ + ".bn" + std::to_string(bns_.size() + 1), channels);
  main_.push_back({Step::Kind::bn, bns_.size() - 1});
}

template <typename T>
void ResidualBlock<T>::add_act(std::size_t channels) {
  acts_.emplace_back(name_ + ".act" + std::to_string(acts_.size() + 1), spec_.activation,
                     channels);
  main_.push_back({Step::Kind::act, acts_.size() - 1});
}

template <typename T>
ResidualBlock<T>::ResidualBlock(std::string name, const BlockSpec& spec)
    : name_(std::move(name)), spec_(spec) {
  validate(spec);
  const std::size_t in = spec.in_channels;
  const std::size_t mid = spec.planes;
  const std::size_t out = spec.out_channels;
  const std::size_t s = spec.stride;
  const bool needs_projection = in != out || s != 1;
  switch (spec.genre) {
    case BlockGenre::basic:
      add_conv(in, out, 3, s);
      add_bn(out);
      add_act(out);
      add_conv(out, out, 3, 1);
      add_bn(out);
      break;
    case BlockGenre::bottleneck:
    case BlockGenre::wide:
      add_conv(in, mid, 1, 1);
      add_bn(mid);
      add_act(mid);
      add_conv(mid, mid, 3, s);
      add_bn(mid);
      add_act(mid);
      add_conv(mid, out, 1, 1);
      add_bn(out);
      break;
    case BlockGenre::preact:
      add_bn(in);
      add_act(in);
      pre_ = std::move(main_);
      main_.clear();
      add_conv(in, mid, 1, 1);
      add_bn(mid);
      add_act(mid);
      add_conv(mid, mid, 3, s);
      add_bn(mid);
      add_act(mid);
      add_conv(mid, out, 1, 1);
      break;
    case BlockGenre::dense_transition:
      add_bn(in);
      add_act(in);
      pre_ = std::move(main_);
      main_.clear();
      add_conv(in, mid, 1, 1);
      add_bn(mid);
      add_act(mid);
      add_conv(mid, out, 3, s);
      break;
  }
  const bool post_activation = pre_.empty();
  if (needs_projection) {
    proj_conv_.emplace(name_ + ".proj", in, out, Extent3{1, 1, 1}, Extent3::cube(s));
    if (post_activation) proj_bn_.emplace(name_ + ".proj_bn", out);
  }
  if (post_activation) out_act_.emplace(name_ + ".out_act", spec.activation, out);
}

template <typename T>
void ResidualBlock<T>::init(Rng& rng) {
  const double slope = spec_.activation == ActivationKind::prelu ? kPReluInitSlope : 0.0;
  for (auto& c : convs_) c.init(rng, slope);
  if (proj_conv_) proj_conv_->init(rng, 1.0);
}

template <typename T>
void ResidualBlock<T>::zero_main_path() {
  // The last main-path step is a BN for post-activation genres and a conv
  // for the pre-activation ones.
  const Step& last = main_.back();
  if (last.kind == Step::Kind::bn) {
    bns_[last.index].params().gamma.fill(T{0});
    bns_[last.index].params().beta.fill(T{0});
  } else {
    convs_[last.index].zero();
  }
}

template <typename T>
Var ResidualBlock<T>::run(Tape<T>& tape, const std::vector<Step>& steps, Var x, Mode mode) {
  for (const Step& s : steps) {
    switch (s.kind) {
      case Step::Kind::conv:
        x = convs_[s.index].forward(tape, x);
        break;
      case Step::Kind::bn:
        x = bns_[s.index].forward(tape, x, mode);
        break;
      case Step::Kind::act:
        x = acts_[s.index].forward(tape, x);
        break;
    }
  }
  return x;
}

template <typename T>
Var ResidualBlock<T>::forward(Tape<T>& tape, Var x, Mode mode) {
  const Var h = run(tape, pre_, x, mode);
  const Var main = run(tape, main_, h, mode);
  Var skip = h;
  if (proj_conv_) {
    skip = proj_conv_->forward(tape, h);
    if (proj_bn_) skip = proj_bn_->forward(tape, skip, mode);
  }
  const Var sum = tape_add(tape, main, skip);
  return out_act_ ? out_act_->forward(tape, sum) : sum;
}

template <typename T>
Shape ResidualBlock<T>::output_shape(const Shape& in) const {
  if (in.size() != 5 || in[1] != spec_.in_channels) {
    throw ShapeError("block " + name_ + " expects " + std::to_string(spec_.in_channels) +
                     " channels, got " + shape_string(in));
  }
  Shape d = in;
  for (const Step& s : main_) {
    if (s.kind == Step::Kind::conv) d = convs_[s.index].output_shape(d);
  }
  if (proj_conv_ && proj_conv_->output_shape(in) != d) {
    throw ShapeError("block " + name_ + " skip and main paths disagree");
  }
  return d;
}

template <typename T>
void ResidualBlock<T>::collect(ParamList<T>& out) {
  // Registration follows execution order.
  auto visit = [&](const std::vector<Step>& steps) {
    for (const Step& s : steps) {
      switch (s.kind) {
        case Step::Kind::conv:
          convs_[s.index].collect(out);
          break;
        case Step::Kind::bn:
          bns_[s.index].collect(out);
          break;
        case Step::Kind::act:
          acts_[s.index].collect(out);
          break;
      }
    }
  };
  visit(pre_);
  visit(main_);
  if (proj_conv_) proj_conv_->collect(out);
  if (proj_bn_) proj_bn_->collect(out);
  if (out_act_) out_act_->collect(out);
}

#define SF3CNN_INSTANTIATE(T)                                     \
  template struct ParamList<T>;                                   \
  template class Conv3d<T>;                                       \
  template class BatchNorm3d<T>;                                  \
  template class Activation<T>;                                   \
  template class Linear<T>;                                       \
  template class ResidualBlock<T>;                                \
  template Var tape_add(Tape<T>&, Var, Var);                      \
  template Var tape_pool3d(Tape<T>&, Var, const Pool3dSpec&);     \
  template Var tape_global_avg_pool(Tape<T>&, Var);

SF3CNN_INSTANTIATE(float)
SF3CNN_INSTANTIATE(double)

#undef SF3CNN_INSTANTIATE

}  // namespace sf3cnn
