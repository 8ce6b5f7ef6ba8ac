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

// 3D residual networks with an angular-margin or plain softmax head.
//
//   clip -> stem conv -> bn -> act -> max pool -> stages -> global avg pool
//        -> linear embedding x (D) -> head
//
// Presets come in two sizes: "desk-*" networks small enough to train on a
// CPU in minutes, and the full-width families, which are meant for shape and
// parameter-count inspection through plan_model().

#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "sf3cnn/angular_softmax.hpp"
#include "sf3cnn/layers.hpp"
#include "sf3cnn/modules.hpp"
#include "sf3cnn/rng.hpp"
#include "sf3cnn/tape.hpp"

namespace sf3cnn {

enum class HeadKind { asoftmax, cross_entropy };

const char* to_string(HeadKind head);
HeadKind parse_head_kind(const std::string& name);
const char* to_string(ActivationKind kind);
ActivationKind parse_activation(const std::string& name);

struct StemSpec {
  Extent3 kernel{7, 7, 7};
  Extent3 stride{1, 2, 2};
  Extent3 padding{3, 3, 3};
  bool max_pool = true;
  Pool3dSpec pool{PoolKind::max, Extent3::cube(3), Extent3::cube(2), Extent3::cube(1)};
};

struct ModelConfig {
  std::string preset;  // informational only
  BlockGenre genre = BlockGenre::basic;
  std::vector<std::size_t> stage_blocks = {1, 1, 1, 1};
  std::size_t base_width = 64;
  std::size_t widen = 1;
  ActivationKind activation = ActivationKind::prelu;
  std::size_t embedding_dim = 512;
  std::size_t num_classes = 5;
  std::size_t in_channels = 3;
  Extent3 input{16, 112, 112};
  StemSpec stem;
  HeadKind head = HeadKind::asoftmax;

  void validate() const;  // ConfigError
};

// Output channels per unit of `planes`: 1 basic / dense-transition,
// 2 wide, 4 bottleneck / preact.
std::size_t genre_expansion(BlockGenre genre);

// ConfigError for unknown names. num_classes fills the head size.
ModelConfig model_preset(const std::string& name, std::size_t num_classes = 5);
std::vector<std::string> preset_names();

// Block spec of stage `stage`, block `index` (stride 2 opens every stage
// after the first).
BlockSpec stage_block_spec(const ModelConfig& cfg, std::size_t stage, std::size_t index);

struct LayerPlan {
  std::string name;
  Shape output;  // for a batch of one clip
  std::size_t parameters = 0;
};

struct ModelPlan {
  std::vector<LayerPlan> layers;
  std::size_t parameter_count = 0;
};

// Symbolic dry-run: shapes and parameter counts without allocating weights.
// ConfigError when the stage plan does not fit the input extent.
ModelPlan plan_model(const ModelConfig& cfg);

template <typename T>
struct HeadLoss {
  Var loss;                // scalar {1}
  double value = 0.0;      // same, in double
  BasicTensor<T> logits;   // N x C (margin applied for the angular head)
};

template <typename T>
class Model {
 public:
  // Validates cfg and checks the plan; weights are zero until init().
  explicit Model(const ModelConfig& cfg);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  // Draw order: stem, blocks, embedding, head. Backbone draws do not depend
  // on the head kind.
  void init(Rng& rng);

  // clips: B x 3 x T x H x W -> embeddings B x D.
  Var embed(Tape<T>& tape, Var clips, Mode mode);
  // Loss node on top of embeddings; `loss` carries the margin and the
  // current annealing weight (ignored by the cross-entropy head).
  HeadLoss<T> head_loss(Tape<T>& tape, Var embeddings, const std::vector<std::size_t>& labels,
                        const AngularLossConfig& loss);
  // Head scores without margin: r cos(theta_j) or the linear logits.
  BasicTensor<T> logits(const BasicTensor<T>& embeddings) const;
  // argmax_j cos(theta_j) for the angular head, argmax logits otherwise.
  std::vector<std::size_t> predict(const BasicTensor<T>& embeddings) const;

  // Convenience: eval-mode embeddings without recording gradients.
  BasicTensor<T> embed_eval(const BasicTensor<T>& clips);

  const ModelConfig& config() const { return cfg_; }
  const ModelPlan& plan() const { return plan_; }
  ParamList<T>& parameters() { return params_; }
  std::size_t parameter_count() const { return params_.parameter_count(); }
  // Per-class direction vectors (C x D): the angular head weights, or the
  // weight rows of the linear head.
  const BasicTensor<T>& class_directions() const {
    return ce_head_ ? ce_head_->weight() : head_w_;
  }
  std::vector<ResidualBlock<T>>& blocks() { return blocks_; }

 private:
  ModelConfig cfg_;
  ModelPlan plan_;
  Conv3d<T> stem_conv_;
  BatchNorm3d<T> stem_bn_;
  Activation<T> stem_act_;
  std::vector<ResidualBlock<T>> blocks_;
  Linear<T> embedding_;
  std::unique_ptr<Linear<T>> ce_head_;
  BasicTensor<T> head_w_;
  BasicTensor<T> head_grad_;
  ParamList<T> params_;
};

template <typename T>
std::unique_ptr<Model<T>> build_model(const ModelConfig& cfg);

}  // namespace sf3cnn
