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

#include "sf3cnn/video.hpp"

#include <algorithm>
#include <cmath>

#include "sf3cnn/error.hpp"

namespace sf3cnn {

namespace {

void check_stack(const Tensor& stack, const char* op) {
  if (stack.rank() != 4 || stack.dim(1) != 3) {
    throw ShapeError(std::string(op) + ": expected T x 3 x H x W, got " +
                     shape_string(stack.dims()));
  }
}

// Copies frames[indices] into a new stack.
Tensor gather_frames(const Tensor& frames, const std::vector<std::size_t>& indices) {
  const std::size_t frame = frames.size() / frames.dim(0);
  Shape dims = frames.dims();
  dims[0] = indices.size();
  Tensor out(dims);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    std::copy_n(frames.data() + indices[i] * frame, frame, out.data() + i * frame);
  }
  return out;
}

struct Tap {
  std::size_t lo, hi;
  float w;  // weight of hi
};

std::vector<Tap> bilinear_taps(std::size_t in, std::size_t out) {
  std::vector<Tap> taps(out);
  const double ratio = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t d = 0; d < out; ++d) {
    double src = (static_cast<double>(d) + 0.5) * ratio - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in - 1));
    const auto lo = static_cast<std::size_t>(std::floor(src));
    const std::size_t hi = std::min(lo + 1, in - 1);
    taps[d] = {lo, hi, static_cast<float>(src - static_cast<double>(lo))};
  }
  return taps;
}

}  // namespace

void Video::validate() const {
  if (frames.rank() != 4 || frames.dim(1) != 3) {
    throw InputError("video " + source_id + ": frames must be T x 3 x H x W, got " +
                     shape_string(frames.dims()));
  }
}

std::string to_string(CropPosition p) {
  switch (p) {
    case CropPosition::top_left: return "top_left";
    case CropPosition::top_right: return "top_right";
    case CropPosition::bottom_left: return "bottom_left";
    case CropPosition::bottom_right: return "bottom_right";
    case CropPosition::center: return "center";
  }
  return "?";
}

void AugmentPolicy::validate() const {
  if (clip_len == 0) throw ConfigError("clip_len must be >= 1");
  if (out_size == 0) throw ConfigError("out_size must be >= 1");
  if (!(flip_prob >= 0.0 && flip_prob <= 1.0)) throw ConfigError("flip_prob must be in [0, 1]");
  if (crop_positions.empty()) throw ConfigError("crop_positions must not be empty");
  if (scale_set.empty()) throw ConfigError("scale_set must not be empty");
  for (double s : scale_set) {
    if (!(s > 0.0 && s <= 1.0)) throw ConfigError("scale_set values must be in (0, 1]");
  }
}

std::vector<std::size_t> clip_indices(std::size_t num_frames, std::size_t clip_len,
                                      std::size_t start) {
  if (num_frames == 0) throw InputError("cannot sample a clip from an empty video");
  std::vector<std::size_t> idx(clip_len);
  for (std::size_t i = 0; i < clip_len; ++i) idx[i] = (start + i) % num_frames;
  return idx;
}

Tensor sample_clip(const Video& v, std::size_t clip_len, Rng& rng) {
  v.validate();
  const std::size_t t = v.num_frames();
  const std::size_t start = t > clip_len ? rng.index(t - clip_len + 1) : 0;
  return gather_frames(v.frames, clip_indices(t, clip_len, start));
}

Tensor center_clip(const Video& v, std::size_t clip_len) {
  v.validate();
  const std::size_t t = v.num_frames();
  const std::size_t start = t > clip_len ? (t - clip_len) / 2 : 0;
  return gather_frames(v.frames, clip_indices(t, clip_len, start));
}

Tensor corner_crop(const Tensor& stack, CropPosition position, double scale) {
  check_stack(stack, "corner_crop");
  if (!(scale > 0.0 && scale <= 1.0)) throw DomainError("crop scale must be in (0, 1]");
  const std::size_t t = stack.dim(0), h = stack.dim(2), w = stack.dim(3);
  const auto side = static_cast<std::size_t>(std::lround(scale * static_cast<double>(std::min(h, w))));
  if (side == 0) throw DomainError("crop side rounds to zero");
  std::size_t y0 = 0, x0 = 0;
  switch (position) {
    case CropPosition::top_left: break;
    case CropPosition::top_right: x0 = w - side; break;
    case CropPosition::bottom_left: y0 = h - side; break;
    case CropPosition::bottom_right: y0 = h - side; x0 = w - side; break;
    case CropPosition::center: y0 = (h - side) / 2; x0 = (w - side) / 2; break;
  }
  Tensor out({t, 3, side, side});
  float* dst = out.data();
  for (std::size_t f = 0; f < t * 3; ++f) {
    const float* plane = stack.data() + f * h * w;
    for (std::size_t y = 0; y < side; ++y) {
      dst = std::copy_n(plane + (y0 + y) * w + x0, side, dst);
    }
  }
  return out;
}

Tensor resize_bilinear(const Tensor& stack, std::size_t out_size) {
  check_stack(stack, "resize_bilinear");
  if (out_size == 0) throw DomainError("resize target must be >= 1");
  const std::size_t t = stack.dim(0), h = stack.dim(2), w = stack.dim(3);
  if (h == out_size && w == out_size) return stack;
  const std::vector<Tap> ty = bilinear_taps(h, out_size);
  const std::vector<Tap> tx = bilinear_taps(w, out_size);
  Tensor out({t, 3, out_size, out_size});
  std::vector<float> row_lo(out_size), row_hi(out_size);
  for (std::size_t f = 0; f < t * 3; ++f) {
    const float* plane = stack.data() + f * h * w;
    float* dst = out.data() + f * out_size * out_size;
    for (std::size_t y = 0; y < out_size; ++y) {
      const float* a = plane + ty[y].lo * w;
      const float* b = plane + ty[y].hi * w;
      const float wy = ty[y].w;
      for (std::size_t x = 0; x < out_size; ++x) {
        const Tap& c = tx[x];
        const float top = a[c.lo] + c.w * (a[c.hi] - a[c.lo]);
        const float bot = b[c.lo] + c.w * (b[c.hi] - b[c.lo]);
        dst[y * out_size + x] = top + wy * (bot - top);
      }
    }
  }
  return out;
}

Tensor hflip(const Tensor& stack) {
  check_stack(stack, "hflip");
  const std::size_t w = stack.dim(3);
  Tensor out = stack;
  for (std::size_t r = 0; r < stack.size() / w; ++r) {
    std::reverse(out.data() + r * w, out.data() + (r + 1) * w);
  }
  return out;
}

Tensor hflip(const Tensor& stack, Rng& rng, double p) {
  return rng.bernoulli(p) ? hflip(stack) : stack;
}

Tensor mean_subtract(const Tensor& stack, const std::array<float, 3>& channel_means) {
  check_stack(stack, "mean_subtract");
  const std::size_t plane = stack.dim(2) * stack.dim(3);
  Tensor out = stack;
  for (std::size_t f = 0; f < stack.dim(0); ++f) {
    for (std::size_t c = 0; c < 3; ++c) {
      float* p = out.data() + (f * 3 + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) p[i] -= channel_means[c];
    }
  }
  return out;
}

namespace {

// T x 3 x S x S -> 3 x T x S x S
Tensor to_channels_first(const Tensor& clip) {
  const std::size_t t = clip.dim(0), plane = clip.dim(2) * clip.dim(3);
  Tensor out({3, t, clip.dim(2), clip.dim(3)});
  for (std::size_t f = 0; f < t; ++f) {
    for (std::size_t c = 0; c < 3; ++c) {
      std::copy_n(clip.data() + (f * 3 + c) * plane, plane, out.data() + (c * t + f) * plane);
    }
  }
  return out;
}

}  // namespace

Tensor augment_clip(const Video& v, const AugmentPolicy& policy, Rng& rng, Mode mode) {
  policy.validate();
  if (mode == Mode::eval) {
    v.validate();
    return eval_clip_at(v, policy, eval_clip_starts(v.num_frames(), policy.clip_len, 1)[0]);
  }
  Tensor clip = sample_clip(v, policy.clip_len, rng);
  clip = hflip(clip, rng, policy.flip_prob);
  const CropPosition pos = policy.crop_positions[rng.index(policy.crop_positions.size())];
  const double scale = policy.scale_set[rng.index(policy.scale_set.size())];
  clip = corner_crop(clip, pos, scale);
  return to_channels_first(
      mean_subtract(resize_bilinear(clip, policy.out_size), policy.channel_means));
}

Tensor eval_clip_at(const Video& v, const AugmentPolicy& policy, std::size_t start) {
  policy.validate();
  v.validate();
  Tensor clip = gather_frames(v.frames, clip_indices(v.num_frames(), policy.clip_len, start));
  clip = corner_crop(clip, CropPosition::center, 1.0);
  return to_channels_first(
      mean_subtract(resize_bilinear(clip, policy.out_size), policy.channel_means));
}

std::vector<std::size_t> eval_clip_starts(std::size_t num_frames, std::size_t clip_len,
                                          std::size_t count) {
  if (count == 0) throw DomainError("eval clip count must be >= 1");
  const std::size_t span = num_frames > clip_len ? num_frames - clip_len : 0;
  if (count == 1) return {span / 2};
  std::vector<std::size_t> starts(count);
  for (std::size_t i = 0; i < count; ++i) starts[i] = span * i / (count - 1);
  return starts;
}

Rng clip_rng(std::uint64_t seed, std::uint64_t epoch, std::uint64_t clip_id) {
  return Rng::derive(seed, {epoch, clip_id});
}

}  // namespace sf3cnn
