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

// Datasets: train/validation split, channel statistics, the synthetic
// moving-pattern generator and the on-disk layout
//
//   <root>/<class_name>/<video_id>.vten
//
// Class labels follow the lexicographic order of class directory names.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sf3cnn/rng.hpp"
#include "sf3cnn/video.hpp"

namespace sf3cnn {

struct SplitOptions {
  double ratio = 0.6;
  std::uint64_t seed = 0;
  // Explicit sizes override the ratio; they must add up to n.
  std::optional<std::size_t> train_count;
  std::optional<std::size_t> val_count;
  // Apply the ratio within each class instead of over the whole set.
  bool stratified = false;

  void validate() const;
};

struct DatasetSplit {
  std::vector<std::size_t> train;  // ascending
  std::vector<std::size_t> val;    // ascending
  double ratio = 0.6;
  std::uint64_t seed = 0;
};

// Ids are 0..labels.size()-1; labels are only consulted when stratified.
DatasetSplit split_dataset(std::span<const std::size_t> labels, const SplitOptions& opts);
DatasetSplit split_dataset(std::size_t n, const SplitOptions& opts);

// Per-channel pixel mean over the selected videos (all frames).
std::array<float, 3> compute_channel_means(std::span<const Video> videos,
                                           std::span<const std::size_t> ids);

struct ClassPattern {
  double orientation = 0.0;  // grating direction, radians
  double frequency = 3.0;    // grating cycles across the frame
  double drift = 0.0;        // grating phase advance per frame, radians
  std::array<double, 3> tint = {1.0, 1.0, 1.0};
  std::array<double, 2> blob_velocity = {0.0, 0.0};  // pixels per frame (y, x)

  friend bool operator==(const ClassPattern&, const ClassPattern&) = default;
};

struct SyntheticSpec {
  std::size_t num_classes = 5;
  std::size_t videos_per_class = 64;
  std::size_t frames_per_video = 20;
  std::size_t height = 48;
  std::size_t width = 48;
  double noise_std = 0.05;
  // Empty means standard_patterns(num_classes).
  std::vector<ClassPattern> patterns;

  void validate() const;  // ConfigError
  std::vector<ClassPattern> resolved_patterns() const;
};

// Evenly spread orientations, drifts, tints and blob directions.
std::vector<ClassPattern> standard_patterns(std::size_t num_classes);

// Videos in class-major order; source ids are "<class>/<index>".
std::vector<Video> generate_synthetic(const SyntheticSpec& spec, Rng& rng);

std::string class_dir_name(std::size_t label);

void write_dataset(const std::filesystem::path& root, std::span<const Video> videos);
// IoError when root is missing, holds no class directories or a file is bad.
std::vector<Video> load_dataset(const std::filesystem::path& root);
// Class directory names in label order.
std::vector<std::string> dataset_classes(const std::filesystem::path& root);

}  // namespace sf3cnn
