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

#include "sf3cnn/model.hpp"

#include <cmath>
#include <map>

#include "sf3cnn/error.hpp"

namespace sf3cnn {

namespace {

template <typename T>
void accumulate(BasicTensor<T>& dst, const BasicTensor<T>& src) {
  T* d = dst.data();
  const T* s = src.data();
  for (std::size_t i = 0; i < dst.size(); ++i) d[i] += s[i];
}

std::size_t conv_params(std::size_t in, std::size_t out, std::size_t k) {
  return in * out * k * k * k;
}

std::size_t block_parameter_count(const BlockSpec& b) {
  const std::size_t act = b.activation == ActivationKind::prelu ? 1 : 0;
  const std::size_t in = b.in_channels, mid = b.planes, out = b.out_channels;
  std::size_t n = 0;
  bool post = true;
  switch (b.genre) {
    case BlockGenre::basic:
      n = conv_params(in, out, 3) + 2 * out + act * out + conv_params(out, out, 3) + 2 * out;
      break;
    case BlockGenre::bottleneck:
    case BlockGenre::wide:
      n = conv_params(in, mid, 1) + 2 * mid + act * mid + conv_params(mid, mid, 3) + 2 * mid +
          act * mid + conv_params(mid, out, 1) + 2 * out;
      break;
    case BlockGenre::preact:
      post = false;
      n = 2 * in + act * in + conv_params(in, mid, 1) + 2 * mid + act * mid +
          conv_params(mid, mid, 3) + 2 * mid + act * mid + conv_params(mid, out, 1);
      break;
    case BlockGenre::dense_transition:
      post = false;
      n = 2 * in + act * in + conv_params(in, mid, 1) + 2 * mid + act * mid +
          conv_params(mid, out, 3);
      break;
  }
  if (in != out || b.stride != 1) n += conv_params(in, out, 1) + (post ? 2 * out : 0);
  if (post) n += act * out;
  return n;
}

Shape strided(const Shape& in, std::size_t channels, Extent3 k, Extent3 s, Extent3 p) {
  return {in[0], channels, window_extent(in[2], k.t, s.t, p.t, "time"),
          window_extent(in[3], k.h, s.h, p.h, "height"),
          window_extent(in[4], k.w, s.w, p.w, "width")};
}

std::size_t last_channels(const ModelConfig& cfg) {
  const std::size_t last = cfg.stage_blocks.size() - 1;
  return stage_block_spec(cfg, last, cfg.stage_blocks[last] - 1).out_channels;
}

const ModelConfig& checked(const ModelConfig& cfg) {
  cfg.validate();
  return cfg;
}

}  // namespace

const char* to_string(HeadKind head) {
  return head == HeadKind::asoftmax ? "asoftmax" : "cross_entropy";
}

HeadKind parse_head_kind(const std::string& name) {
  if (name == "asoftmax") return HeadKind::asoftmax;
  if (name == "cross_entropy") return HeadKind::cross_entropy;
  throw ConfigError("unknown loss head '" + name + "' (expected asoftmax or cross_entropy)");
}

const char* to_string(ActivationKind kind) {
  return kind == ActivationKind::prelu ? "prelu" : "relu";
}

ActivationKind parse_activation(const std::string& name) {
  if (name == "prelu") return ActivationKind::prelu;
  if (name == "relu") return ActivationKind::relu;
  throw ConfigError("unknown activation '" + name + "' (expected prelu or relu)");
}

void ModelConfig::validate() const {
  if (stage_blocks.empty()) throw ConfigError("model needs at least one stage");
  for (std::size_t b : stage_blocks) {
    if (b == 0) throw ConfigError("every stage needs at least one block");
  }
  if (base_width == 0 || widen == 0) throw ConfigError("base_width and widen must be >= 1");
  if (embedding_dim < 2) throw ConfigError("embedding_dim must be >= 2");
  if (num_classes < 2) throw ConfigError("num_classes must be >= 2");
  if (in_channels == 0) throw ConfigError("in_channels must be >= 1");
  if (input.t == 0 || input.h == 0 || input.w == 0) throw ConfigError("input extent must be >= 1");
}

std::size_t genre_expansion(BlockGenre genre) {
  switch (genre) {
    case BlockGenre::basic:
    case BlockGenre::dense_transition:
      return 1;
    case BlockGenre::wide:
      return 2;
    case BlockGenre::bottleneck:
    case BlockGenre::preact:
      return 4;
  }
  return 1;
}

BlockSpec stage_block_spec(const ModelConfig& cfg, std::size_t stage, std::size_t index) {
  const std::size_t planes = (cfg.base_width << stage) * cfg.widen;
  const std::size_t out = planes * genre_expansion(cfg.genre);
  std::size_t in = out;
  if (index == 0) {
    in = stage == 0 ? cfg.base_width : stage_block_spec(cfg, stage - 1, 0).out_channels;
  }
  BlockSpec b;
  b.genre = cfg.genre;
  b.in_channels = in;
  b.planes = planes;
  b.out_channels = out;
  b.stride = (index == 0 && stage > 0) ? 2 : 1;
  b.activation = cfg.activation;
  return b;
}

namespace {

ModelConfig full_preset(BlockGenre genre, std::vector<std::size_t> blocks, std::size_t widen) {
  ModelConfig c;
  c.genre = genre;
  c.stage_blocks = std::move(blocks);
  c.widen = widen;
  return c;
}

// Desk stem: (3,4,4) kernel with (2,4,4) stride takes 16x112x112 to 8x28x28,
// the max pool to 4x14x14; four stages end at 1x2x2.
ModelConfig desk_preset(std::vector<std::size_t> blocks) {
  ModelConfig c;
  c.genre = BlockGenre::basic;
  c.stage_blocks = std::move(blocks);
  c.base_width = 16;
  c.embedding_dim = 64;
  c.stem.kernel = {3, 4, 4};
  c.stem.stride = {2, 4, 4};
  c.stem.padding = {1, 0, 0};
  return c;
}

const std::map<std::string, ModelConfig>& presets() {
  static const std::map<std::string, ModelConfig> table = [] {
    std::map<std::string, ModelConfig> t;
    t["desk-resnet10-basic"] = desk_preset({1, 1, 1, 1});
    t["desk-resnet18-basic"] = desk_preset({2, 2, 2, 2});
    t["resnet-18"] = full_preset(BlockGenre::basic, {2, 2, 2, 2}, 1);
    t["resnet-34"] = full_preset(BlockGenre::basic, {3, 4, 6, 3}, 1);
    t["resnet-50"] = full_preset(BlockGenre::bottleneck, {3, 4, 6, 3}, 1);
    t["resnet-101"] = full_preset(BlockGenre::bottleneck, {3, 4, 23, 3}, 1);
    t["resnet-152"] = full_preset(BlockGenre::bottleneck, {3, 8, 36, 3}, 1);
    // Grouped convolutions are not modelled; twice-wide bottlenecks stand in.
    t["resnext-101"] = full_preset(BlockGenre::bottleneck, {3, 4, 23, 3}, 2);
    t["preact-resnet-200"] = full_preset(BlockGenre::preact, {3, 24, 36, 3}, 1);
    // Dense connectivity is approximated by transition-style blocks.
    t["densenet-121"] = full_preset(BlockGenre::dense_transition, {6, 12, 24, 16}, 1);
    t["densenet-201"] = full_preset(BlockGenre::dense_transition, {6, 12, 48, 32}, 1);
    t["wide-resnet-50"] = full_preset(BlockGenre::wide, {3, 4, 6, 3}, 2);
    for (auto& [name, cfg] : t) cfg.preset = name;
    return t;
  }();
  return table;
}

}  // namespace

ModelConfig model_preset(const std::string& name, std::size_t num_classes) {
  const auto& table = presets();
  const auto it = table.find(name);
  if (it == table.end()) throw ConfigError("unknown model preset '" + name + "'");
  ModelConfig cfg = it->second;
  cfg.num_classes = num_classes;
  return cfg;
}

std::vector<std::string> preset_names() {
  std::vector<std::string> names;
  for (const auto& [name, cfg] : presets()) names.push_back(name);
  return names;
}

ModelPlan plan_model(const ModelConfig& cfg) {
  cfg.validate();
  ModelPlan plan;
  auto add = [&](std::string name, Shape out, std::size_t params) {
    plan.parameter_count += params;
    plan.layers.push_back({std::move(name), std::move(out), params});
  };
  const std::size_t act = cfg.activation == ActivationKind::prelu ? 1 : 0;
  try {
    Shape d = {1, cfg.in_channels, cfg.input.t, cfg.input.h, cfg.input.w};
    const StemSpec& st = cfg.stem;
    d = strided(d, cfg.base_width, st.kernel, st.stride, st.padding);
    add("stem.conv", d,
        cfg.in_channels * cfg.base_width * st.kernel.t * st.kernel.h * st.kernel.w);
    add("stem.bn", d, 2 * cfg.base_width);
    add("stem.act", d, act * cfg.base_width);
    if (st.max_pool) {
      d = pool3d_output_shape(d, st.pool);
      add("stem.pool", d, 0);
    }
    for (std::size_t s = 0; s < cfg.stage_blocks.size(); ++s) {
      for (std::size_t i = 0; i < cfg.stage_blocks[s]; ++i) {
        const BlockSpec b = stage_block_spec(cfg, s, i);
        d = strided(d, b.out_channels, Extent3::cube(3), Extent3::cube(b.stride),
                    Extent3::cube(1));
        add("layer" + std::to_string(s + 1) + "." + std::to_string(i), d,
            block_parameter_count(b));
      }
    }
    const std::size_t c = d[1];
    add("pool", {1, c}, 0);
    add("embedding", {1, cfg.embedding_dim}, c * cfg.embedding_dim + cfg.embedding_dim);
    const std::size_t head = cfg.head == HeadKind::asoftmax
                                 ? cfg.num_classes * cfg.embedding_dim
                                 : cfg.num_classes * cfg.embedding_dim + cfg.num_classes;
    add("head", {1, cfg.num_classes}, head);
  } catch (const ShapeError& e) {
    throw ConfigError("stage plan does not fit the " + std::to_string(cfg.input.t) + "x" +
                      std::to_string(cfg.input.h) + "x" + std::to_string(cfg.input.w) +
                      " input: " + e.what());
  }
  return plan;
}

// ---------------------------------------------------------------------------

template <typename T>
Model<T>::Model(const ModelConfig& cfg)
    : cfg_(checked(cfg)),
      plan_(plan_model(cfg)),
      stem_conv_("stem.conv", cfg.in_channels, cfg.base_width, cfg.stem.kernel, cfg.stem.stride,
                 cfg.stem.padding),
      stem_bn_("stem.bn", cfg.base_width),
      stem_act_("stem.act", cfg.activation, cfg.base_width),
      embedding_("embedding", last_channels(cfg), cfg.embedding_dim) {
  for (std::size_t s = 0; s < cfg.stage_blocks.size(); ++s) {
    for (std::size_t i = 0; i < cfg.stage_blocks[s]; ++i) {
      blocks_.emplace_back("layer" + std::to_string(s + 1) + "." + std::to_string(i),
                           stage_block_spec(cfg, s, i));
    }
  }
  stem_conv_.collect(params_);
  stem_bn_.collect(params_);
  stem_act_.collect(params_);
  for (auto& b : blocks_) b.collect(params_);
  embedding_.collect(params_);
  if (cfg.head == HeadKind::asoftmax) {
    head_w_ = BasicTensor<T>({cfg.num_classes, cfg.embedding_dim});
    head_grad_ = BasicTensor<T>({cfg.num_classes, cfg.embedding_dim});
    params_.params.push_back({"head.weight", &head_w_, &head_grad_});
  } else {
    ce_head_ = std::make_unique<Linear<T>>("head", cfg.embedding_dim, cfg.num_classes);
    ce_head_->collect(params_);
  }
  if (params_.parameter_count() != plan_.parameter_count) {
    throw Error("internal: planned " + std::to_string(plan_.parameter_count) +
                " parameters, built " + std::to_string(params_.parameter_count()));
  }
}

template <typename T>
void Model<T>::init(Rng& rng) {
  stem_conv_.init(rng, stem_act_.init_slope());
  for (auto& b : blocks_) b.init(rng);
  embedding_.init(rng, 1.0);
  if (ce_head_) {
    ce_head_->init(rng, 1.0);
  } else {
    head_w_ = rng_normal<T>(rng, head_w_.dims(), T{0},
                            static_cast<T>(1.0 / std::sqrt(static_cast<double>(cfg_.embedding_dim))));
  }
}

template <typename T>
Var Model<T>::embed(Tape<T>& tape, Var clips, Mode mode) {
  const Shape& in = tape.value(clips).dims();
  const Shape want = {in.empty() ? 0 : in[0], cfg_.in_channels, cfg_.input.t, cfg_.input.h,
                      cfg_.input.w};
  if (in != want || in[0] == 0) {
    throw ShapeError("model expects clips B x " + std::to_string(cfg_.in_channels) + " x " +
                     std::to_string(cfg_.input.t) + " x " + std::to_string(cfg_.input.h) +
                     " x " + std::to_string(cfg_.input.w) + ", got " + shape_string(in));
  }
  Var x = stem_conv_.forward(tape, clips);
  x = stem_bn_.forward(tape, x, mode);
  x = stem_act_.forward(tape, x);
  if (cfg_.stem.max_pool) x = tape_pool3d(tape, x, cfg_.stem.pool);
  for (auto& b : blocks_) x = b.forward(tape, x, mode);
  x = tape_global_avg_pool(tape, x);
  return embedding_.forward(tape, x);
}

template <typename T>
HeadLoss<T> Model<T>::head_loss(Tape<T>& tape, Var embeddings,
                                const std::vector<std::size_t>& labels,
                                const AngularLossConfig& loss) {
  HeadLoss<T> out;
  if (ce_head_) {
    const Var logits = ce_head_->forward(tape, embeddings);
    auto fwd = std::make_shared<CrossEntropyResult<T>>(
        cross_entropy_loss(tape.value(logits), labels));
    out.value = fwd->loss;
    out.logits = tape.value(logits);
    out.loss = tape.record(
        "cross_entropy", BasicTensor<T>({1}, static_cast<T>(fwd->loss)), {logits},
        [fwd, logits, labels](const Tape<T>& t, const BasicTensor<T>& gy,
                              std::span<BasicTensor<T>* const> gin) {
          if (!gin[0]) return;
          accumulate(*gin[0], cross_entropy_backward(t.value(logits), labels, *fwd,
                                                     static_cast<double>(gy[0])));
        });
    return out;
  }
  struct Saved {
    FeatureBatch<T> batch;
    ClassifierWeights<T> w;
    AngularSaved saved;
  };
  auto s = std::make_shared<Saved>();
  s->batch = FeatureBatch<T>{tape.value(embeddings), labels};
  s->w = ClassifierWeights<T>{head_w_};
  AngularLossResult<T> res = asoftmax_loss(s->batch, s->w, loss);
  s->saved = std::move(res.saved);
  out.value = res.loss;
  out.logits = std::move(res.logits);
  out.loss = tape.record(
      "asoftmax", BasicTensor<T>({1}, static_cast<T>(res.loss)), {embeddings},
      [this, s](const Tape<T>&, const BasicTensor<T>& gy, std::span<BasicTensor<T>* const> gin) {
        AngularGrads<T> g = asoftmax_backward(s->batch, s->w, s->saved, static_cast<double>(gy[0]));
        accumulate(head_grad_, g.grad_w);
        if (gin[0]) accumulate(*gin[0], g.grad_x);
      });
  return out;
}

template <typename T>
BasicTensor<T> Model<T>::logits(const BasicTensor<T>& embeddings) const {
  if (ce_head_) {
    return linear_forward(embeddings, ce_head_->weight(), ce_head_->bias());
  }
  return angular_logits(embeddings, ClassifierWeights<T>{head_w_});
}

template <typename T>
std::vector<std::size_t> Model<T>::predict(const BasicTensor<T>& embeddings) const {
  if (!ce_head_) return angular_predict(embeddings, ClassifierWeights<T>{head_w_});
  const BasicTensor<T> z = logits(embeddings);
  const std::size_t n = z.dim(0), c = z.dim(1);
  std::vector<std::size_t> labels(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 1; j < c; ++j) {
      if (z[i * c + j] > z[i * c + labels[i]]) labels[i] = j;
    }
  }
  return labels;
}

template <typename T>
BasicTensor<T> Model<T>::embed_eval(const BasicTensor<T>& clips) {
  Tape<T> tape;
  const Var x = tape.leaf(clips, false);
  return tape.value(embed(tape, x, Mode::eval));
}

template <typename T>
std::unique_ptr<Model<T>> build_model(const ModelConfig& cfg) {
  return std::make_unique<Model<T>>(cfg);
}

template class Model<float>;
template class Model<double>;
template std::unique_ptr<Model<float>> build_model<float>(const ModelConfig&);
template std::unique_ptr<Model<double>> build_model<double>(const ModelConfig&);

}  // namespace sf3cnn
