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

// Clip construction and augmentation for video inputs.
//
// Frame stacks are T x 3 x H x W. The network consumes 3 x T x H x W, so
// augment_clip() transposes as its last step.

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "sf3cnn/layers.hpp"
#include "sf3cnn/rng.hpp"
#include "sf3cnn/tensor.hpp"

namespace sf3cnn {

struct Video {
  Tensor frames;  // T x 3 x H x W, values in [0, 1]
  std::size_t label = 0;
  std::string source_id;

  std::size_t num_frames() const { return frames.dim(0); }
  std::size_t height() const { return frames.dim(2); }
  std::size_t width() const { return frames.dim(3); }
  // InputError unless frames is a non-empty T x 3 x H x W stack.
  void validate() const;
};

enum class CropPosition { top_left, top_right, bottom_left, bottom_right, center };

std::string to_string(CropPosition p);

struct AugmentPolicy {
  std::size_t clip_len = 16;
  double flip_prob = 0.5;
  std::vector<CropPosition> crop_positions = {CropPosition::top_left, CropPosition::top_right,
                                              CropPosition::bottom_left,
                                              CropPosition::bottom_right, CropPosition::center};
  // 2^-1/4, 2^-1/2, 2^-3/4, 1/2
  std::vector<double> scale_set = {0.8408964152537145, 0.7071067811865476, 0.5946035575013605,
                                   0.5};
  std::size_t out_size = 112;
  std::array<float, 3> channel_means = {0.0f, 0.0f, 0.0f};

  void validate() const;  // ConfigError
};

// Frame indices of a clip starting at `start`; wraps modulo num_frames.
std::vector<std::size_t> clip_indices(std::size_t num_frames, std::size_t clip_len,
                                      std::size_t start);

// Random contiguous window when the video is long enough, otherwise the
// looped video from frame 0. Consumes one draw only when T > clip_len.
Tensor sample_clip(const Video& v, std::size_t clip_len, Rng& rng);
// Deterministic variant: centered window (start = (T - clip_len) / 2).
Tensor center_clip(const Video& v, std::size_t clip_len);

// Square crop of side round(scale * min(H, W)), same window on every frame.
Tensor corner_crop(const Tensor& stack, CropPosition position, double scale);

// Half-pixel-centered bilinear resampling of every frame to size x size:
//   src = (dst + 0.5) * in / out - 0.5, clamped to [0, in - 1].
Tensor resize_bilinear(const Tensor& stack, std::size_t out_size);

// Reverses the W axis of every frame.
Tensor hflip(const Tensor& stack);
// One Bernoulli(p) draw for the whole clip.
Tensor hflip(const Tensor& stack, Rng& rng, double p = 0.5);

Tensor mean_subtract(const Tensor& stack, const std::array<float, 3>& channel_means);

// sample -> flip -> crop -> resize -> mean subtraction -> 3 x T x S x S.
// Train mode draws window, flip, crop position and scale from rng in that
// order. Eval mode uses the center window, center crop, scale 1, no flip and
// leaves rng untouched.
Tensor augment_clip(const Video& v, const AugmentPolicy& policy, Rng& rng, Mode mode);

// Eval-mode clip whose window starts at `start` (frames wrap modulo T):
// center crop at scale 1, resize, mean subtraction, 3 x T x S x S.
Tensor eval_clip_at(const Video& v, const AugmentPolicy& policy, std::size_t start);
// Window starts of `count` evenly spaced eval clips; count == 1 gives the
// centered window.
std::vector<std::size_t> eval_clip_starts(std::size_t num_frames, std::size_t clip_len,
                                          std::size_t count);

// Stream used for one clip of one epoch; independent of visiting order.
Rng clip_rng(std::uint64_t seed, std::uint64_t epoch, std::uint64_t clip_id);

}  // namespace sf3cnn
