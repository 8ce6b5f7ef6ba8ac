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

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <set>

#include "sf3cnn/error.hpp"
#include "sf3cnn/video.hpp"

namespace sf3cnn {
namespace {

// Pixel value encodes (frame, channel, y, x) so crops and flips are traceable.
Video coded_video(std::size_t t, std::size_t h, std::size_t w) {
  Video v;
  v.frames = Tensor({t, 3, h, w});
  for (std::size_t f = 0; f < t; ++f)
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
          v.frames.at({f, c, y, x}) = static_cast<float>(f * 1000000 + c * 100000 + y * 300 + x);
  return v;
}

Video random_video(Rng& rng, std::size_t t, std::size_t h, std::size_t w) {
  Video v;
  v.frames = rng_uniform<float>(rng, {t, 3, h, w}, 0.0f, 1.0f);
  return v;
}

TEST(ClipIndices, LoopsShortVideos) {
  std::vector<std::size_t> expect(16);
  for (std::size_t i = 0; i < 16; ++i) expect[i] = i % 10;
  EXPECT_EQ(clip_indices(10, 16, 0), expect);
  EXPECT_EQ(clip_indices(20, 4, 18), (std::vector<std::size_t>{18, 19, 0, 1}));
  EXPECT_THROW(clip_indices(0, 4, 0), InputError);
}

TEST(SampleClip, ShortVideoIsLoopedFromFrameZeroWithoutDraws) {
  const Video v = coded_video(10, 4, 4);
  Rng rng(1);
  const Rng before = rng;
  const Tensor clip = sample_clip(v, 16, rng);
  EXPECT_EQ(rng, before);
  ASSERT_EQ(clip.dims(), (Shape{16, 3, 4, 4}));
  for (std::size_t i = 0; i < 16; ++i) {
    EXPECT_EQ(clip.at({i, 0, 0, 0}), static_cast<float>((i % 10) * 1000000));
  }
  // Exactly clip_len frames: also no draw.
  const Video w = coded_video(16, 2, 2);
  sample_clip(w, 16, rng);
  EXPECT_EQ(rng, before);
}

TEST(SampleClip, LongVideoGivesContiguousWindowCoveringAllStarts) {
  const Video v = coded_video(20, 2, 2);
  Rng rng(2);
  std::set<std::size_t> starts;
  for (int i = 0; i < 400; ++i) {
    const Tensor clip = sample_clip(v, 16, rng);
    const auto s = static_cast<std::size_t>(clip[0] / 1000000);
    for (std::size_t k = 0; k < 16; ++k) {
      ASSERT_EQ(clip.at({k, 0, 0, 0}), static_cast<float>((s + k) * 1000000));
    }
    starts.insert(s);
  }
  EXPECT_EQ(starts, (std::set<std::size_t>{0, 1, 2, 3, 4}));
}

TEST(CenterClip, CenteredWindow) {
  const Video v = coded_video(21, 2, 2);
  const Tensor c = center_clip(v, 16);
  EXPECT_EQ(c.at({0, 0, 0, 0}), 2.0f * 1000000);
  EXPECT_EQ(eval_clip_starts(21, 16, 1), (std::vector<std::size_t>{2}));
  EXPECT_EQ(eval_clip_starts(21, 16, 3), (std::vector<std::size_t>{0, 2, 5}));
  EXPECT_EQ(eval_clip_starts(8, 16, 2), (std::vector<std::size_t>{0, 0}));
  EXPECT_THROW(eval_clip_starts(8, 16, 0), DomainError);
}

TEST(CornerCrop, SizesAndPositions) {
  const Video v = coded_video(2, 112, 112);
  struct Case {
    CropPosition pos;
    std::size_t y0, x0;
  };
  for (const Case& c : {Case{CropPosition::top_left, 0, 0}, Case{CropPosition::top_right, 0, 56},
                        Case{CropPosition::bottom_left, 56, 0},
                        Case{CropPosition::bottom_right, 56, 56},
                        Case{CropPosition::center, 28, 28}}) {
    const Tensor crop = corner_crop(v.frames, c.pos, 0.5);
    ASSERT_EQ(crop.dims(), (Shape{2, 3, 56, 56})) << to_string(c.pos);
    EXPECT_EQ(crop.at({1, 2, 0, 0}), v.frames.at({1, 2, c.y0, c.x0}));
    EXPECT_EQ(crop.at({0, 1, 55, 55}), v.frames.at({0, 1, c.y0 + 55, c.x0 + 55}));
  }
  // Scale set sides on a 112 frame: round(112 * s).
  const AugmentPolicy policy;
  std::vector<std::size_t> sides;
  for (double s : policy.scale_set) sides.push_back(corner_crop(v.frames, CropPosition::center, s).dim(2));
  EXPECT_EQ(sides, (std::vector<std::size_t>{94, 79, 67, 56}));
  // Non-square frames crop a square of the short side.
  const Video r = coded_video(1, 48, 64);
  const Tensor full = corner_crop(r.frames, CropPosition::center, 1.0);
  EXPECT_EQ(full.dims(), (Shape{1, 3, 48, 48}));
  EXPECT_EQ(full.at({0, 0, 0, 0}), r.frames.at({0, 0, 0, 8}));
  EXPECT_THROW(corner_crop(r.frames, CropPosition::center, 0.0), DomainError);
  EXPECT_THROW(corner_crop(r.frames, CropPosition::center, 1.5), DomainError);
}

TEST(ResizeBilinear, ConstantStaysConstant) {
  const Tensor stack({2, 3, 37, 37}, 0.25f);
  for (std::size_t s : {1, 5, 37, 112}) {
    const Tensor out = resize_bilinear(stack, s);
    ASSERT_EQ(out.dims(), (Shape{2, 3, s, s}));
    for (float x : out.values()) ASSERT_NEAR(x, 0.25f, 1e-7);
  }
}

TEST(ResizeBilinear, HalvingAveragesTwoByTwoBlocks) {
  Rng rng(3);
  const Tensor stack = rng_uniform<float>(rng, {1, 3, 8, 8});
  const Tensor out = resize_bilinear(stack, 4);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < 4; ++y)
      for (std::size_t x = 0; x < 4; ++x) {
        const double avg = (stack.at({0, c, 2 * y, 2 * x}) + stack.at({0, c, 2 * y + 1, 2 * x}) +
                            stack.at({0, c, 2 * y, 2 * x + 1}) +
                            stack.at({0, c, 2 * y + 1, 2 * x + 1})) / 4.0;
        EXPECT_NEAR(out.at({0, c, y, x}), avg, 1e-6);
      }
  // A checkerboard halves to uniform grey.
  Tensor board({1, 3, 8, 8});
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < 8; ++y)
      for (std::size_t x = 0; x < 8; ++x) board.at({0, c, y, x}) = static_cast<float>((x + y) % 2);
  const Tensor halved = resize_bilinear(board, 4);
  for (float v : halved.values()) EXPECT_NEAR(v, 0.5f, 1e-7);
}

TEST(ResizeBilinear, HalfPixelCentersAndEdgeClamp) {
  // 2 -> 4 upsample of [0, 1]: src = (d + 0.5) / 2 - 0.5 = -0.25, 0.25, 0.75, 1.25.
  Tensor stack({1, 3, 1, 2});
  for (std::size_t c = 0; c < 3; ++c) stack.at({0, c, 0, 1}) = 1.0f;
  const Tensor out = resize_bilinear(stack, 4);
  const float expect[4] = {0.0f, 0.25f, 0.75f, 1.0f};
  for (std::size_t y = 0; y < 4; ++y)
    for (std::size_t x = 0; x < 4; ++x) EXPECT_NEAR(out.at({0, 1, y, x}), expect[x], 1e-7);
}

TEST(Hflip, InvolutionAndMirror) {
  Rng rng(4);
  const Tensor s = rng_uniform<float>(rng, {3, 3, 5, 7});
  const Tensor f = hflip(s);
  EXPECT_EQ(hflip(f), s);
  EXPECT_EQ(f.at({2, 1, 3, 0}), s.at({2, 1, 3, 6}));
  Rng r0(5);
  EXPECT_EQ(hflip(s, r0, 0.0), s);
  EXPECT_EQ(hflip(s, r0, 1.0), f);
  // Roughly half of the clips flip at p = 0.5.
  int flips = 0;
  for (int i = 0; i < 2000; ++i) flips += hflip(s, r0, 0.5) == f;
  EXPECT_NEAR(flips / 2000.0, 0.5, 0.05);
}

TEST(MeanSubtract, PerChannel) {
  const Tensor s({2, 3, 2, 2}, 0.5f);
  const Tensor out = mean_subtract(s, {0.1f, 0.2f, 0.3f});
  EXPECT_FLOAT_EQ(out.at({1, 0, 1, 1}), 0.4f);
  EXPECT_FLOAT_EQ(out.at({0, 1, 0, 0}), 0.3f);
  EXPECT_FLOAT_EQ(out.at({1, 2, 0, 1}), 0.2f);
}

TEST(AugmentClip, AlwaysProducesNetworkShape) {
  Rng rng(6);
  AugmentPolicy policy;
  policy.channel_means = {0.4f, 0.5f, 0.6f};
  for (int i = 0; i < 24; ++i) {
    const std::size_t t = 3 + rng.index(30), h = 20 + rng.index(120), w = 20 + rng.index(120);
    const Video v = random_video(rng, t, h, w);
    for (Mode mode : {Mode::train, Mode::eval}) {
      const Tensor clip = augment_clip(v, policy, rng, mode);
      ASSERT_EQ(clip.dims(), (Shape{3, 16, 112, 112})) << t << "x" << h << "x" << w;
      for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t k = 0; k < 16 * 112 * 112; k += 97) {
          const float x = clip[c * 16 * 112 * 112 + k] + policy.channel_means[c];
          ASSERT_GE(x, -1e-6f);
          ASSERT_LE(x, 1.0f + 1e-6f);
        }
      }
    }
  }
}

TEST(AugmentClip, TrainModeDrawOrder) {
  Rng gen(7);
  const Video v = random_video(gen, 24, 60, 80);
  AugmentPolicy policy;
  policy.out_size = 32;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng a(seed), b(seed);
    const Tensor got = augment_clip(v, policy, a, Mode::train);
    Tensor ref = sample_clip(v, 16, b);
    ref = hflip(ref, b, 0.5);
    const CropPosition pos = policy.crop_positions[b.index(5)];
    const double scale = policy.scale_set[b.index(4)];
    ref = resize_bilinear(corner_crop(ref, pos, scale), 32);
    EXPECT_EQ(a, b);
    for (std::size_t t = 0; t < 16; ++t)
      for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t y = 0; y < 32; y += 7)
          for (std::size_t x = 0; x < 32; x += 5) ASSERT_EQ(got.at({c, t, y, x}), ref.at({t, c, y, x}));
  }
}

TEST(AugmentClip, DeterministicGivenStream) {
  Rng gen(8);
  const Video v = random_video(gen, 12, 40, 40);
  AugmentPolicy policy;
  policy.out_size = 24;
  Rng a = clip_rng(3, 4, 5), b = clip_rng(3, 4, 5);
  EXPECT_EQ(augment_clip(v, policy, a, Mode::train), augment_clip(v, policy, b, Mode::train));
  Rng other = clip_rng(3, 4, 6);
  Rng same = clip_rng(3, 4, 5);
  EXPECT_FALSE(other == same);
}

TEST(AugmentClip, EvalModeIsCenteredAndLeavesRngAlone) {
  const Video v = coded_video(20, 30, 40);
  AugmentPolicy policy;
  policy.out_size = 30;
  Rng rng(9);
  const Rng before = rng;
  const Tensor clip = augment_clip(v, policy, rng, Mode::eval);
  EXPECT_EQ(rng, before);
  // Window starts at frame 2, crop is the central 30 x 30 square (x0 = 5).
  EXPECT_EQ(clip.at({1, 0, 0, 0}), v.frames.at({2, 1, 0, 5}));
  EXPECT_EQ(clip.at({2, 15, 29, 29}), v.frames.at({17, 2, 29, 34}));
  EXPECT_EQ(clip, eval_clip_at(v, policy, 2));
}

TEST(Validation, PolicyAndVideo) {
  AugmentPolicy p;
  p.out_size = 0;
  EXPECT_THROW(p.validate(), ConfigError);
  p = {};
  p.flip_prob = 1.5;
  EXPECT_THROW(p.validate(), ConfigError);
  p = {};
  p.scale_set = {0.0};
  EXPECT_THROW(p.validate(), ConfigError);
  Video bad;
  bad.frames = Tensor({4, 2, 8, 8});
  EXPECT_THROW(bad.validate(), InputError);
  Rng rng(1);
  EXPECT_THROW(augment_clip(bad, AugmentPolicy{}, rng, Mode::train), InputError);
}

TEST(CornerCrop, HalfScaleCenterOf224) {
  const Video v = coded_video(1, 224, 224);
  const Tensor crop = corner_crop(v.frames, CropPosition::center, 0.5);
  ASSERT_EQ(crop.dims(), (Shape{1, 3, 112, 112}));
  EXPECT_EQ(crop.at({0, 0, 0, 0}), v.frames.at({0, 0, 56, 56}));
  const Video s = coded_video(2, 112, 112);
  for (CropPosition p : AugmentPolicy{}.crop_positions) EXPECT_EQ(corner_crop(s.frames, p, 1.0), s.frames);
}

TEST(ResizeBilinear, SameSizeIsBitIdentical) {
  Rng rng(10);
  const Tensor s = rng_uniform<float>(rng, {2, 3, 112, 112});
  EXPECT_EQ(resize_bilinear(s, 112), s);
}

TEST(ResizeBilinear, CheckerboardUpsampleInterpolates) {
  Tensor board({1, 3, 2, 2});
  for (std::size_t c = 0; c < 3; ++c) {
    board.at({0, c, 0, 1}) = 1.0f;
    board.at({0, c, 1, 0}) = 1.0f;
  }
  const Tensor out = resize_bilinear(board, 4);
  for (std::size_t y = 1; y < 3; ++y)
    for (std::size_t x = 1; x < 3; ++x) {
      EXPECT_GT(out.at({0, 0, y, x}), 0.0f);
      EXPECT_LT(out.at({0, 0, y, x}), 1.0f);
    }
  // (0.25, 0.25) from the corner: 0.75*0.25 + 0.25*0.75 = 0.375.
  EXPECT_NEAR(out.at({0, 2, 1, 1}), 0.375f, 1e-7);
}

TEST(MeanSubtract, ZeroMeansAndMeansAsInput) {
  Rng rng(11);
  const Tensor s = rng_uniform<float>(rng, {2, 3, 4, 4});
  EXPECT_EQ(mean_subtract(s, {0.0f, 0.0f, 0.0f}), s);
  Tensor c({1, 3, 2, 2});
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t i = 0; i < 4; ++i) c[k * 4 + i] = 0.1f * static_cast<float>(k + 1);
  const Tensor zero = mean_subtract(c, {0.1f, 0.2f, 0.3f});
  for (float v : zero.values()) EXPECT_EQ(v, 0.0f);
}

TEST(SampleClip, SingleFrameRepeats) {
  const Video v = coded_video(1, 3, 3);
  Rng rng(12);
  const Tensor clip = sample_clip(v, 16, rng);
  for (std::size_t i = 0; i < 16; ++i) EXPECT_EQ(clip.at({i, 2, 1, 1}), v.frames.at({0, 2, 1, 1}));
}

}  // namespace
}  // namespace sf3cnn
