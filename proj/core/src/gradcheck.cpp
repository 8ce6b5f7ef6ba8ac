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

#include "sf3cnn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>
#include <numbers>
#include <utility>

#include "sf3cnn/angular_softmax.hpp"
#include "sf3cnn/error.hpp"
#include "sf3cnn/layers.hpp"
#include "sf3cnn/model.hpp"
#include "sf3cnn/modules.hpp"
#include "sf3cnn/rng.hpp"

namespace sf3cnn::gradcheck {

namespace {

using T64 = BasicTensor<double>;

// Values representable in 32 bits, so both precisions see identical inputs.
T64 rounded(T64 t) {
  for (double& v : t.values()) v = static_cast<float>(v);
  return t;
}

T64 uniform(Rng& rng, Shape dims, double lo, double hi) {
  return rounded(rng_uniform<double>(rng, std::move(dims), lo, hi));
}

// Uniform magnitudes in [lo, hi] with random signs; keeps kinks at zero
// out of the finite-difference stencil.
T64 away_from_zero(Rng& rng, Shape dims, double lo, double hi) {
  T64 t(std::move(dims));
  for (double& v : t.values()) {
    const double mag = rng.uniform(lo, hi);
    v = static_cast<float>(rng.bernoulli(0.5) ? mag : -mag);
  }
  return t;
}

// Distinct values at least `gap` apart, so max windows never switch winner
// inside the stencil.
T64 distinct(Rng& rng, Shape dims, double gap) {
  T64 t(std::move(dims));
  std::vector<std::size_t> perm(t.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.index(i)]);
  const double mid = 0.5 * gap * static_cast<double>(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    t[i] = static_cast<float>(gap * static_cast<double>(perm[i]) - mid);
  }
  return t;
}

template <typename T>
BasicTensor<T> as(const T64& t) {
  return t.cast<T>();
}

template <typename T>
double project(const BasicTensor<T>& y, const T64& r) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += static_cast<double>(y[i]) * r[i];
  return s;
}

template <typename T>
std::vector<BasicTensor<T>> cast_all(const std::vector<T64>& v) {
  std::vector<BasicTensor<T>> out;
  for (const T64& t : v) out.push_back(as<T>(t));
  return out;
}

// Builds a Case from a template builder `make<T>(seed)`.
#define SF3_CASE(label, builder, seed)                              \
  Case {                                                            \
    label, [=] { return builder<double>(seed); }, [=] { return builder<float>(seed); } \
  }

// --- loss ------------------------------------------------------------------

// Features placed at two angles inside every psi segment of the target class.
template <typename T>
Problem<T> make_asoftmax(std::uint64_t seed, int m, double lambda) {
  Rng rng = Rng::derive(seed, {1, static_cast<std::uint64_t>(m)});
  const std::size_t c = 4, d = 6;
  T64 w = uniform(rng, {c, d}, -1.0, 1.0);
  std::vector<std::size_t> labels;
  std::vector<double> xs;
  for (int k = 0; k < m; ++k) {
    for (double frac : {0.3, 0.7}) {
      const std::size_t y = labels.size() % c;
      const double theta = (k + frac) * std::numbers::pi / m;
      // Unit target direction and a unit vector orthogonal to it.
      std::vector<double> wy(d), u(d);
      double nw = 0.0;
      for (std::size_t j = 0; j < d; ++j) nw += w.at({y, j}) * w.at({y, j});
      for (std::size_t j = 0; j < d; ++j) wy[j] = w.at({y, j}) / std::sqrt(nw);
      double dot = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        u[j] = rng.uniform(-1.0, 1.0);
        dot += u[j] * wy[j];
      }
      double nu = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        u[j] -= dot * wy[j];
        nu += u[j] * u[j];
      }
      const double r = rng.uniform(0.5, 2.0);
      for (std::size_t j = 0; j < d; ++j) {
        xs.push_back(r * (std::cos(theta) * wy[j] + std::sin(theta) * u[j] / std::sqrt(nu)));
      }
      labels.push_back(y);
    }
  }
  T64 x = rounded(T64({labels.size(), d}, xs));

  AngularLossConfig cfg;
  cfg.margin = m;
  cfg.anneal_lambda = lambda;
  cfg.schedule.floor = std::min(cfg.schedule.floor, lambda);
  Problem<T> p;
  p.names = {"x", "w"};
  p.inputs = cast_all<T>({x, w});
  p.eval = [labels, cfg](const std::vector<BasicTensor<T>>& in, std::vector<BasicTensor<T>>* g) {
    const FeatureBatch<T> batch{in[0], labels};
    const ClassifierWeights<T> cw{in[1]};
    const AngularLossResult<T> res = asoftmax_loss(batch, cw, cfg);
    if (g) {
      AngularGrads<T> grads = asoftmax_backward(batch, cw, res.saved);
      *g = {std::move(grads.grad_x), std::move(grads.grad_w)};
    }
    return res.loss;
  };
  return p;
}

template <typename T>
Problem<T> make_cross_entropy(std::uint64_t seed) {
  Rng rng = Rng::derive(seed, {2});
  const T64 logits = uniform(rng, {6, 5}, -3.0, 3.0);
  const std::vector<std::size_t> labels = {0, 1, 2, 3, 4, 2};
  Problem<T> p;
  p.names = {"logits"};
  p.inputs = cast_all<T>({logits});
  p.eval = [labels](const std::vector<BasicTensor<T>>& in, std::vector<BasicTensor<T>>* g) {
    const CrossEntropyResult<T> res = cross_entropy_loss(in[0], labels);
    if (g) *g = {cross_entropy_backward(in[0], labels, res)};
    return res.loss;
  };
  return p;
}

// --- layers ----------------------------------------------------------------

template <typename T>
Problem<T> make_conv(std::uint64_t seed, Extent3 stride, Extent3 pad, bool bias) {
  Rng rng = Rng::derive(seed, {3, stride.h, pad.h, bias});
  const T64 x = uniform(rng, {2, 2, 4, 5, 5}, -1.0, 1.0);
  const T64 w = uniform(rng, {3, 2, 3, 3, 3}, -0.5, 0.5);
  const T64 b = uniform(rng, {3}, -0.5, 0.5);
  const Shape out = conv3d_output_shape(x.dims(), w.dims(), stride, pad);
  const T64 r = uniform(rng, out, -1.0, 1.0);
  Problem<T> p;
  p.names = {"x", "weights"};
  p.inputs = cast_all<T>({x, w});
  if (bias) {
    p.names.push_back("bias");
    p.inputs.push_back(as<T>(b));
  }
  p.eval = [=](const std::vector<BasicTensor<T>>& in, std::vector<BasicTensor<T>>* g) {
    Conv3dParams<T> cp;
    cp.weights = in[1];
    if (bias) cp.bias = in[2];
    cp.stride = stride;
    cp.padding = pad;
    const BasicTensor<T> y = conv3d_forward(in[0], cp);
    if (g) {
      Conv3dGrads<T> grads = conv3d_backward(as<T>(r), in[0], cp);
      *g = {std::move(*grads.grad_x), std::move(grads.grad_w)};
      if (bias) g->push_back(std::move(*grads.grad_b));
    }
    return project(y, r);
  };
  return p;
}

template <typename T>
Problem<T> make_prelu(std::uint64_t seed) {
  Rng rng = Rng::derive(seed, {4});
  const T64 x = away_from_zero(rng, {2, 3, 2, 3, 3}, 0.05, 1.0);
  const T64 slope = uniform(rng, {3}, -0.5, 0.5);
  const T64 r = uniform(rng, x.dims(), -1.0, 1.0);
  Problem<T> p;
  p.names = {"x", "slope"};
  p.inputs = cast_all<T>({x, slope});
  p.eval = [=](const std::vector<BasicTensor<T>>& in, std::vector<BasicTensor<T>>* g) {
    const BasicTensor<T> y = prelu_forward(in[0], in[1]);
    if (g) {
      PReluGrads<T> grads = prelu_backward(as<T>(r), in[0], in[1]);
      *g = {std::move(grads.grad_x), std::move(grads.grad_slope)};
    }
    return project(y, r);
  };
  return p;
}

template <typename T>
Problem<T> make_batchnorm(std::uint64_t seed, Mode mode) {
  Rng rng = Rng::derive(seed, {5, mode == Mode::train});
  const T64 x = uniform(rng, {3, 2, 2, 3, 3}, -2.0, 2.0);
  const T64 gamma = uniform(rng, {2}, 0.5, 1.5);
  const T64 beta = uniform(rng, {2}, -0.5, 0.5);
  const T64 rmean = uniform(rng, {2}, -0.3, 0.3);
  const T64 rvar = uniform(rng, {2}, 0.5, 2.0);
  const T64 r = uniform(rng, x.dims(), -1.0, 1.0);
  Problem<T> p;
  p.names = {"x", "gamma", "beta"};
  p.inputs = cast_all<T>({x, gamma, beta});
  p.eval = [=](const std::vector<BasicTensor<T>>& in, std::vector<BasicTensor<T>>* g) {
    BatchNorm3dParams<T> bp = BatchNorm3dParams<T>::identity(2);
    bp.gamma = in[1];
    bp.beta = in[2];
    bp.running_mean = as<T>(rmean);
    bp.running_var = as<T>(rvar);
    BatchNormCache<T> cache;
    const BasicTensor<T> y = batchnorm3d_forward(in[0], bp, mode, &cache);
    if (g) {
      BatchNormGrads<T> grads = batchnorm3d_backward(as<T>(r), cache, bp);
      *g = {std::move(grads.grad_x), std::move(grads.grad_gamma), std::move(grads.grad_beta)};
    }
    return project(y, r);
  };
  return p;
}

template <typename T>
Problem<T> make_pool(std::uint64_t seed, PoolKind kind) {
  Rng rng = Rng::derive(seed, {6, kind == PoolKind::max});
  const T64 x = distinct(rng, {2, 2, 3, 5, 5}, 0.01);
  const Pool3dSpec spec{kind, Extent3::cube(3), Extent3{1, 2, 2}, Extent3::cube(1)};
  const T64 r = uniform(rng, pool3d_output_shape(x.dims(), spec), -1.0, 1.0);
  Problem<T> p;
  p.names = {"x"};
  p.inputs = cast_all<T>({x});
  p.eval = [=](const std::vector<BasicTensor<T>>& in, std::vector<BasicTensor<T>>* g) {
    std::vector<std::size_t> argmax;
    const BasicTensor<T> y = pool3d_forward(in[0], spec, &argmax);
    if (g) *g = {pool3d_backward(as<T>(r), in[0].dims(), spec, argmax)};
    return project(y, r);
  };
  return p;
}

template <typename T>
Problem<T> make_global_pool(std::uint64_t seed) {
  Rng rng = Rng::derive(seed, {7});
  const T64 x = uniform(rng, {2, 3, 2, 3, 3}, -1.0, 1.0);
  const T64 r = uniform(rng, {2, 3}, -1.0, 1.0);
  Problem<T> p;
  p.names = {"x"};
  p.inputs = cast_all<T>({x});
  p.eval = [=](const std::vector<BasicTensor<T>>& in, std::vector<BasicTensor<T>>* g) {
    const BasicTensor<T> y = global_avg_pool(in[0]);
    if (g) *g = {global_avg_pool_backward(as<T>(r), in[0].dims())};
    return project(y, r);
  };
  return p;
}

// `corrupt` scales the weight gradient: the harness must flag it.
template <typename T>
Problem<T> make_linear(std::uint64_t seed, double corrupt) {
  Rng rng = Rng::derive(seed, {8});
  const T64 x = uniform(rng, {4, 6}, -1.0, 1.0);
  const T64 w = uniform(rng, {3, 6}, -1.0, 1.0);
  const T64 b = uniform(rng, {3}, -1.0, 1.0);
  const T64 r = uniform(rng, {4, 3}, -1.0, 1.0);
  Problem<T> p;
  p.names = {"x", "weight", "bias"};
  p.inputs = cast_all<T>({x, w, b});
  p.eval = [=](const std::vector<BasicTensor<T>>& in, std::vector<BasicTensor<T>>* g) {
    const BasicTensor<T> y = linear_forward(in[0], in[1], in[2]);
    if (g) {
      LinearGrads<T> grads = linear_backward(as<T>(r), in[0], in[1]);
      for (T& v : grads.grad_w.values()) v = static_cast<T>(v * corrupt);
      *g = {std::move(grads.grad_x), std::move(grads.grad_w), std::move(grads.grad_b)};
    }
    return project(y, r);
  };
  return p;
}

// Copies `in[offset..]` into the listed parameters.
template <typename T>
void load_params(ParamList<T>& params, const std::vector<BasicTensor<T>>& in, std::size_t offset) {
  for (std::size_t k = 0; k < params.params.size(); ++k) *params.params[k].value = in[offset + k];
}

template <typename T>
void append_param_values(Problem<T>& p, ParamList<double>& ref) {
  for (const ParamRef<double>& pr : ref.params) {
    *pr.value = rounded(*pr.value);
    p.names.push_back(pr.name);
    p.inputs.push_back(as<T>(*pr.value));
  }
}

template <typename T>
Problem<T> make_residual(std::uint64_t seed, BlockGenre genre, std::size_t stride,
                         ActivationKind act) {
  Rng rng = Rng::derive(seed, {9, static_cast<std::uint64_t>(genre), stride,
                               static_cast<std::uint64_t>(act)});
  BlockSpec spec;
  spec.genre = genre;
  spec.in_channels = 4;
  spec.planes = genre == BlockGenre::basic || genre == BlockGenre::dense_transition ? 6 : 2;
  spec.out_channels = spec.planes * genre_expansion(genre);
  spec.stride = stride;
  spec.activation = act;

  // Parameter values come from a 64-bit block for both precisions.
  ResidualBlock<double> ref("block", spec);
  ref.init(rng);
  ParamList<double> ref_params;
  ref.collect(ref_params);
  for (const ParamRef<double>& pr : ref_params.params) {
    if (pr.name.find("slope") != std::string::npos) *pr.value = uniform(rng, pr.value->dims(), 0.1, 0.4);
  }

  const T64 x = uniform(rng, {3, 4, 3, 4, 4}, -1.0, 1.0);
  auto block = std::make_shared<ResidualBlock<T>>("block", spec);
  auto params = std::make_shared<ParamList<T>>();
  block->collect(*params);
  const T64 r = uniform(rng, block->output_shape(x.dims()), -1.0, 1.0);

  Problem<T> p;
  p.names = {"x"};
  p.inputs = {as<T>(x)};
  append_param_values(p, ref_params);
  p.eval = [=](const std::vector<BasicTensor<T>>& in, std::vector<BasicTensor<T>>* g) {
    load_params(*params, in, 1);
    Tape<T> tape;
    const Var xv = tape.leaf(in[0], true);
    const Var y = block->forward(tape, xv, Mode::train);
    const double value = project(tape.value(y), r);
    if (g) {
      params->zero_grad();
      tape.backward(y, as<T>(r));
      g->clear();
      g->push_back(tape.grad(xv));
      for (const ParamRef<T>& pr : params->params) g->push_back(*pr.grad);
    }
    return value;
  };
  return p;
}

ModelConfig tiny_model_config() {
  ModelConfig cfg = model_preset("desk-resnet10-basic", 3);
  cfg.base_width = 4;
  cfg.embedding_dim = 8;
  cfg.input = {8, 32, 32};
  return cfg;
}

template <typename T>
Problem<T> make_model(std::uint64_t seed) {
  const ModelConfig cfg = tiny_model_config();
  Rng rng = Rng::derive(seed, {10});
  auto ref = build_model<double>(cfg);
  ref->init(rng);
  const T64 clips = uniform(rng, {4, 3, 8, 32, 32}, -0.5, 0.5);
  const std::vector<std::size_t> labels = {0, 1, 2, 1};

  auto model = std::shared_ptr<Model<T>>(build_model<T>(cfg));
  Problem<T> p;
  p.names = {"clips"};
  p.inputs = {as<T>(clips)};
  append_param_values(p, ref->parameters());
  AngularLossConfig loss;
  loss.margin = 4;
  p.eval = [=](const std::vector<BasicTensor<T>>& in, std::vector<BasicTensor<T>>* g) {
    ParamList<T>& params = model->parameters();
    load_params(params, in, 1);
    Tape<T> tape;
    const Var x = tape.leaf(in[0], true);
    const Var e = model->embed(tape, x, Mode::train);
    const HeadLoss<T> hl = model->head_loss(tape, e, labels, loss);
    if (g) {
      params.zero_grad();
      tape.backward(hl.loss, BasicTensor<T>({1}, T{1}));
      g->clear();
      g->push_back(tape.grad(x));
      for (const ParamRef<T>& pr : params.params) g->push_back(*pr.grad);
    }
    return hl.value;
  };
  return p;
}

std::vector<Case> loss_cases(std::uint64_t seed) {
  std::vector<Case> out;
  for (int m = 1; m <= 4; ++m) {
    for (double lambda : {0.0, 7.5}) {
      std::string name = "asoftmax.m" + std::to_string(m);
      if (lambda > 0) name += ".lambda7.5";
      out.push_back(Case{name, [=] { return make_asoftmax<double>(seed, m, lambda); },
                         [=] { return make_asoftmax<float>(seed, m, lambda); }});
    }
  }
  out.push_back(SF3_CASE("cross_entropy", make_cross_entropy, seed));
  return out;
}

std::vector<Case> layer_cases(const std::string& layer, std::uint64_t seed) {
  std::vector<Case> out;
  if (layer == "conv3d" || layer == "all") {
    const auto conv = [&](std::string name, Extent3 s, Extent3 pd, bool bias) {
      out.push_back(Case{name, [=] { return make_conv<double>(seed, s, pd, bias); },
                         [=] { return make_conv<float>(seed, s, pd, bias); }});
    };
    conv("conv3d.s1p0", {1, 1, 1}, {0, 0, 0}, false);
    conv("conv3d.s2p1.bias", {1, 2, 2}, {1, 1, 1}, true);
  }
  if (layer == "prelu" || layer == "all") out.push_back(SF3_CASE("prelu", make_prelu, seed));
  if (layer == "batchnorm" || layer == "all") {
    for (Mode mode : {Mode::train, Mode::eval}) {
      out.push_back(Case{mode == Mode::train ? "batchnorm.train" : "batchnorm.eval",
                         [=] { return make_batchnorm<double>(seed, mode); },
                         [=] { return make_batchnorm<float>(seed, mode); }});
    }
  }
  if (layer == "pool" || layer == "all") {
    for (PoolKind kind : {PoolKind::max, PoolKind::avg}) {
      out.push_back(Case{kind == PoolKind::max ? "pool.max" : "pool.avg",
                         [=] { return make_pool<double>(seed, kind); },
                         [=] { return make_pool<float>(seed, kind); }});
    }
    out.push_back(SF3_CASE("pool.global_avg", make_global_pool, seed));
  }
  if (layer == "linear" || layer == "all") {
    out.push_back(Case{"linear", [=] { return make_linear<double>(seed, 1.0); },
                       [=] { return make_linear<float>(seed, 1.0); }});
  }
  if (layer == "residual" || layer == "all") {
    for (BlockGenre genre : {BlockGenre::basic, BlockGenre::bottleneck, BlockGenre::wide,
                             BlockGenre::preact, BlockGenre::dense_transition}) {
      for (std::size_t stride : {1, 2}) {
        for (ActivationKind act : {ActivationKind::prelu, ActivationKind::relu}) {
          const std::string name = std::string("residual.") + to_string(genre) + ".s" +
                                   std::to_string(stride) + "." + to_string(act);
          out.push_back(Case{name, [=] { return make_residual<double>(seed, genre, stride, act); },
                             [=] { return make_residual<float>(seed, genre, stride, act); }});
        }
      }
    }
  }
  return out;
}

template <typename T>
std::vector<BasicTensor<double>> analytic(const Problem<T>& p) {
  std::vector<BasicTensor<T>> grads;
  p.eval(p.inputs, &grads);
  if (grads.size() != p.inputs.size()) throw Error("gradient count does not match inputs");
  std::vector<T64> out;
  for (std::size_t k = 0; k < grads.size(); ++k) {
    if (grads[k].dims() != p.inputs[k].dims()) {
      throw ShapeError("gradient of " + p.names[k] + " has shape " +
                       shape_string(grads[k].dims()));
    }
    out.push_back(grads[k].template cast<double>());
  }
  return out;
}

}  // namespace

const char* to_string(Precision p) { return p == Precision::f64 ? "f64" : "f32"; }

Precision parse_precision(const std::string& name) {
  if (name == "f64" || name == "64") return Precision::f64;
  if (name == "f32" || name == "32") return Precision::f32;
  throw ConfigError("unknown precision '" + name + "' (expected f64 or f32)");
}

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

double error_floor(Precision p, double scale) {
  return p == Precision::f64 ? 1e-6 : std::max(1e-3, 1e-4 * scale);
}

double default_tolerance(const std::string& scope, Precision p) {
  if (p == Precision::f32) return 1e-3;
  return scope == "loss" ? 1e-4 : 1e-5;
}

bool Report::passed() const {
  return !groups.empty() &&
         std::all_of(groups.begin(), groups.end(), [](const GroupResult& g) { return g.passed; });
}

std::vector<GroupResult> check_case(const Case& c, const Options& opts, double tolerance) {
  Problem<double> ref = c.f64();
  const std::vector<T64> grads =
      opts.precision == Precision::f64 ? analytic(ref) : analytic(c.f32());

  std::vector<GroupResult> out;
  std::vector<T64> in = ref.inputs;
  for (std::size_t k = 0; k < in.size(); ++k) {
    std::vector<std::size_t> entries(in[k].size());
    for (std::size_t i = 0; i < entries.size(); ++i) entries[i] = i;
    if (entries.size() > opts.max_entries) {
      Rng pick = Rng::derive(opts.seed, {k, entries.size()});
      for (std::size_t i = 0; i < opts.max_entries; ++i) {
        std::swap(entries[i], entries[i + pick.index(entries.size() - i)]);
      }
      entries.resize(opts.max_entries);
    }
    double scale = 0.0;
    for (double v : grads[k].values()) scale = std::max(scale, std::abs(v));
    const double floor = error_floor(opts.precision, scale);
    GroupResult g;
    g.name = c.name + "." + ref.names[k];
    for (std::size_t i : entries) {
      const double x0 = in[k][i];
      const double a = grads[k][i];
      // A ReLU / PReLU / max-pool kink inside the stencil spoils one step but
      // not a smaller one; a wrong backward disagrees at every step.
      double best = std::numeric_limits<double>::infinity();
      double best_abs = best;
      for (double shrink : {1.0, 1e-1, 1e-2, 1e-3, 1e-4}) {
        const double h = shrink * opts.step * std::max(1.0, std::abs(x0));
        const auto at = [&](double dx) {
          in[k][i] = x0 + dx;
          return ref.eval(in, nullptr);
        };
        // Fourth-order central stencil.
        const double numeric = (8.0 * (at(h) - at(-h)) - (at(2.0 * h) - at(-2.0 * h))) / (12.0 * h);
        in[k][i] = x0;
        if (!std::isfinite(numeric) || !std::isfinite(a)) break;
        const double err = relative_error(a, numeric, floor);
        if (err < best) {
          best = err;
          best_abs = std::abs(a - numeric);
        }
        if (best <= tolerance) break;
      }
      g.max_rel_err = std::max(g.max_rel_err, best);
      g.max_abs_err = std::max(g.max_abs_err, best_abs);
      ++g.checked;
    }
    g.passed = g.max_rel_err <= tolerance;
    out.push_back(std::move(g));
  }
  return out;
}

std::vector<std::string> scopes() {
  return {"loss",         "layer:conv3d",   "layer:prelu",    "layer:batchnorm", "layer:pool",
          "layer:linear", "layer:residual", "layer:all",      "model"};
}

std::vector<Case> cases_for(const std::string& scope, std::uint64_t seed) {
  if (scope == "loss") return loss_cases(seed);
  if (scope == "model") return {SF3_CASE("model", make_model, seed)};
  if (scope == "fixture:corrupted") {
    return {Case{"linear.corrupted", [=] { return make_linear<double>(seed, 1.01); },
                 [=] { return make_linear<float>(seed, 1.01); }}};
  }
  if (scope.rfind("layer:", 0) == 0) {
    std::vector<Case> out = layer_cases(scope.substr(6), seed);
    if (!out.empty()) return out;
  }
  std::string known;
  for (const std::string& s : scopes()) known += (known.empty() ? "" : ", ") + s;
  throw ConfigError("unknown gradcheck scope '" + scope + "' (expected one of " + known + ")");
}

Report run(const std::string& scope, const Options& opts) {
  if (scope == "model" && opts.precision == Precision::f32) {
    throw ConfigError("the model scope runs in 64-bit only; 32-bit checks are per layer");
  }
  Report rep;
  rep.scope = scope;
  rep.precision = opts.precision;
  rep.tolerance = opts.tolerance.value_or(default_tolerance(scope, opts.precision));
  for (const Case& c : cases_for(scope, opts.seed)) {
    for (GroupResult& g : check_case(c, opts, rep.tolerance)) rep.groups.push_back(std::move(g));
  }
  return rep;
}

std::string format_report(const Report& rep) {
  std::string out = "gradcheck " + rep.scope + " (" + to_string(rep.precision) + ", tolerance ";
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%.0e)\n", rep.tolerance);
  out += buf;
  std::size_t width = 5;
  for (const GroupResult& g : rep.groups) width = std::max(width, g.name.size());
  for (const GroupResult& g : rep.groups) {
    std::snprintf(buf, sizeof(buf), "  %-*s  n=%-3zu  max_rel_err=%.3e  %s\n",
                  static_cast<int>(width), g.name.c_str(), g.checked, g.max_rel_err,
                  g.passed ? "ok" : "FAIL");
    out += buf;
  }
  out += rep.passed() ? "PASS\n" : "FAIL\n";
  return out;
}

}  // namespace sf3cnn::gradcheck
