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

// Training checkpoints.
//
// A checkpoint is a directory:
//
//   manifest.txt   key = value metadata (epoch, iteration, rng state, ...)
//   config.txt     the full training configuration
//   params/        one STEN file per parameter
//   buffers/       one STEN file per running statistic
//   optim/         optimizer slots, "<slot>.<param>.sten"
//
// Floating-point metadata is stored as hex floats so a reload is exact.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "sf3cnn/config.hpp"
#include "sf3cnn/model.hpp"
#include "sf3cnn/optim.hpp"

namespace sf3cnn {

struct CheckpointMeta {
  std::string config_hash;
  std::size_t num_classes = 0;
  std::size_t epoch = 0;           // completed epochs
  std::uint64_t iteration = 0;     // completed optimizer steps
  std::string shuffle_rng;         // Rng::save() text
  std::array<float, 3> channel_means = {0.0f, 0.0f, 0.0f};
  std::vector<double> val_losses;  // one per completed epoch
};

struct OptimizerSlots {
  AdamaxState<float> adamax;
  SgdState<float> sgd;
};

// Writes into `<dir>.tmp` and renames over `dir`, so an interrupted save
// leaves the previous checkpoint intact.
void save_checkpoint(const std::filesystem::path& dir, const TrainConfig& cfg,
                     const CheckpointMeta& meta, Model<float>& model,
                     const OptimizerSlots& optim);

struct LoadedCheckpoint {
  TrainConfig config;
  CheckpointMeta meta;
  std::unique_ptr<Model<float>> model;
  OptimizerSlots optim;
};

// IoError for missing or malformed files; CompatibilityError when the stored
// tensors do not fit the stored configuration.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir);

// CompatibilityError unless `expected` hashes like the checkpoint's config.
void check_compatible(const LoadedCheckpoint& ckpt, const TrainConfig& expected);

}  // namespace sf3cnn
