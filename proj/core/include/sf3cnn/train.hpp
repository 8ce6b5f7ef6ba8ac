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

// Training, evaluation and embedding extraction.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sf3cnn/angular_softmax.hpp"
#include "sf3cnn/checkpoint.hpp"
#include "sf3cnn/config.hpp"
#include "sf3cnn/dataset.hpp"
#include "sf3cnn/model.hpp"

namespace sf3cnn {

inline constexpr const char* kMetricsHeader =
    "epoch,train_loss,val_loss,val_loss_avg,val_acc,intra_mean,inter_min,wall_time_s";

struct MetricsRow {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_loss_avg = 0.0;  // trailing mean of val_loss over the metrics window
  double val_acc = 0.0;
  double intra_mean = 0.0;
  double inter_min = 0.0;
  double wall_time_s = 0.0;
};

std::string format_metrics_row(const MetricsRow& row);
// IoError when the header differs or a row does not parse.
std::vector<MetricsRow> read_metrics(const std::filesystem::path& csv);

// out[i] = mean(xs[max(0, i - window + 1) .. i])
std::vector<double> trailing_mean(const std::vector<double>& xs, std::size_t window);

// Stream tags separating the seeded streams of one run.
enum class Stream : std::uint64_t { init = 1, shuffle = 2, augment = 3 };
Rng stream_rng(std::uint64_t seed, Stream stream);
// Augmentation stream of one clip; a pure function of (seed, epoch, video).
Rng augment_rng(std::uint64_t seed, std::size_t epoch, std::size_t video_id);

struct TrainOptions {
  std::filesystem::path out_dir;   // metrics.csv and checkpoint/ go here
  bool resume = false;             // continue from out_dir/checkpoint
  std::optional<std::size_t> stop_after_epoch;
  std::function<void(const MetricsRow&)> on_epoch;
};

struct TrainResult {
  std::vector<MetricsRow> rows;  // every row in metrics.csv after the run
  std::filesystem::path checkpoint;
};

// Per epoch: shuffle, augment, forward, loss, backward, optimizer step, then
// evaluate on the validation split, append a metrics row and checkpoint.
// NumericError on a non-finite loss; the previous checkpoint is kept.
TrainResult train(const TrainConfig& cfg, const TrainOptions& opts);

struct EvalResult {
  std::size_t count = 0;
  double accuracy = 0.0;
  double loss = 0.0;  // head loss without annealing
  AngleStats stats;
  Tensor embeddings;  // count x D, center clips
  std::vector<std::size_t> labels;
  std::vector<std::size_t> predictions;
};

struct EvalSettings {
  std::size_t batch_size = 16;
  std::size_t eval_clips = 1;
  AngularLossConfig loss;  // anneal_lambda is ignored (treated as 0)
};

EvalSettings eval_settings(const TrainConfig& cfg);

// Deterministic eval-mode pass over videos[ids] in the given order. With
// eval_clips > 1 the predicted label is the majority vote over evenly spaced
// clips (ties to the lowest label); loss, stats and embeddings always use
// the centered clip. InputError for an empty id list.
EvalResult evaluate_model(Model<float>& model, const std::vector<Video>& videos,
                          const std::vector<std::size_t>& ids, const AugmentPolicy& policy,
                          const EvalSettings& settings);

enum class SplitSelector { train, val, all };
SplitSelector parse_split_selector(const std::string& name);

// Ids of the selected split, reproduced from the checkpoint configuration.
std::vector<std::size_t> select_split(const TrainConfig& cfg, const std::vector<Video>& videos,
                                      SplitSelector which);

// Loads a checkpoint and evaluates it on a dataset split. When `expected` is
// given its hash must match the checkpoint (CompatibilityError otherwise).
EvalResult evaluate_checkpoint(const std::filesystem::path& checkpoint,
                               const std::filesystem::path& dataset, SplitSelector which,
                               const std::optional<TrainConfig>& expected = std::nullopt);

// Writes embeddings.sten (N x D), labels.sten (N) and angle_stats.txt into
// out_dir and returns the evaluation they came from.
EvalResult extract_embeddings(const std::filesystem::path& checkpoint,
                              const std::filesystem::path& dataset, SplitSelector which,
                              const std::filesystem::path& out_dir);

std::string format_angle_stats(const AngleStats& stats);

}  // namespace sf3cnn
