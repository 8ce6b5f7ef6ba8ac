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

// Experiment configuration.
//
// Files are flat UTF-8 "key = value" lines; '#' starts a comment, blank
// lines are ignored, and unknown or repeated keys are rejected.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "sf3cnn/angular_softmax.hpp"
#include "sf3cnn/dataset.hpp"
#include "sf3cnn/model.hpp"
#include "sf3cnn/optim.hpp"
#include "sf3cnn/video.hpp"

namespace sf3cnn {

// Raw key/value pairs in file order of first appearance.
struct KeyValues {
  std::map<std::string, std::string> values;
  std::map<std::string, std::size_t> lines;  // 1-based source line per key
};

KeyValues parse_key_values(const std::string& text, const std::string& origin = "<config>");
KeyValues read_key_values(const std::filesystem::path& path);

enum class OptimizerKind { adamax, sgd };

const char* to_string(OptimizerKind kind);

struct TrainConfig {
  // model
  std::string model = "desk-resnet10-basic";
  std::optional<ActivationKind> activation;  // preset default when unset
  std::optional<std::size_t> base_width;
  std::optional<std::size_t> widen;
  std::optional<std::size_t> embedding_dim;
  // loss
  HeadKind loss = HeadKind::asoftmax;
  int margin = 4;
  bool anneal = true;
  LambdaSchedule lambda;
  // optimizer
  OptimizerKind optimizer = OptimizerKind::adamax;
  AdamaxConfig adamax;
  SgdConfig sgd{0.1, 0.9, 0.0};
  // loop
  std::size_t batch_size = 16;
  std::size_t epochs = 30;
  std::uint64_t seed = 0;
  std::size_t metrics_window = 5;
  std::size_t eval_clips = 1;  // > 1 enables multi-clip voting for accuracy
  bool log_wall_time = false;
  // data
  std::filesystem::path dataset;
  double split_ratio = 0.6;
  std::optional<std::size_t> split_train;
  std::optional<std::size_t> split_val;
  bool split_stratified = false;
  std::size_t clip_len = 16;
  std::size_t out_size = 112;
  double flip_prob = 0.5;

  void validate() const;  // ConfigError

  // Model config for a dataset with num_classes classes.
  ModelConfig model_config(std::size_t num_classes) const;
  AngularLossConfig loss_config() const;
  SplitOptions split_options() const;
  AugmentPolicy augment_policy(const std::array<float, 3>& channel_means) const;

  // Canonical "key = value" text; from_text(to_text()) round-trips exactly.
  std::string to_text() const;
  static TrainConfig from_key_values(const KeyValues& kv);
  static TrainConfig from_text(const std::string& text);
  static TrainConfig load(const std::filesystem::path& path);
};

// Synthetic data generation settings. Keys: classes, videos_per_class,
// frames, height, width, noise_std, seed.
struct DataGenConfig {
  SyntheticSpec spec;
  std::uint64_t seed = 0;

  static DataGenConfig from_key_values(const KeyValues& kv);
  static DataGenConfig load(const std::filesystem::path& path);
};

// FNV-1a over the canonical text of the settings that decide parameter
// shapes and semantics (model, loss head, margin, clip geometry).
std::string config_hash(const TrainConfig& cfg);

}  // namespace sf3cnn
