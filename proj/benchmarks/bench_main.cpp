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

// Micro benchmarks for the hot kernels: 3D convolution, the dense layer
// GEMMs, the angular loss and clip augmentation.

#include <benchmark/benchmark.h>

#include "sf3cnn/angular_softmax.hpp"
#include "sf3cnn/dataset.hpp"
#include "sf3cnn/layers.hpp"
#include "sf3cnn/model.hpp"
#include "sf3cnn/rng.hpp"
#include "sf3cnn/video.hpp"

namespace {

using namespace sf3cnn;

// (batch, channels, spatial extent) of a desk-scale stage.
void BM_Conv3dForward(benchmark::State& state) {
  const std::size_t b = state.range(0), c = state.range(1), s = state.range(2);
  Rng rng(1);
  const Tensor x = rng_normal<float>(rng, {b, c, 2, s, s}, 0.0f, 1.0f);
  Conv3dParams<float> p;
  p.weights = rng_normal<float>(rng, {c, c, 3, 3, 3}, 0.0f, 0.1f);
  p.padding = Extent3::cube(1);
  for (auto _ : state) benchmark::DoNotOptimize(conv3d_forward(x, p));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(b * c * c * 2 * s * s * 27));
}
BENCHMARK(BM_Conv3dForward)->Args({16, 16, 14})->Args({16, 32, 7})->Args({16, 64, 4})
    ->Unit(benchmark::kMillisecond);

void BM_Conv3dBackward(benchmark::State& state) {
  const std::size_t b = state.range(0), c = state.range(1), s = state.range(2);
  Rng rng(2);
  const Tensor x = rng_normal<float>(rng, {b, c, 2, s, s}, 0.0f, 1.0f);
  Conv3dParams<float> p;
  p.weights = rng_normal<float>(rng, {c, c, 3, 3, 3}, 0.0f, 0.1f);
  p.padding = Extent3::cube(1);
  const Tensor g = rng_normal<float>(rng, conv3d_output_shape(x.dims(), p.weights.dims(),
                                                               p.stride, p.padding),
                                     0.0f, 1.0f);
  for (auto _ : state) benchmark::DoNotOptimize(conv3d_backward(g, x, p));
  state.SetItemsProcessed(state.iterations() *
                          static_cast<int64_t>(2 * b * c * c * 2 * s * s * 27));
}
BENCHMARK(BM_Conv3dBackward)->Args({16, 16, 14})->Args({16, 64, 4})->Unit(benchmark::kMillisecond);

void BM_LinearForward(benchmark::State& state) {
  const std::size_t n = state.range(0), d = state.range(1);
  Rng rng(3);
  const Tensor x = rng_normal<float>(rng, {n, d}, 0.0f, 1.0f);
  const Tensor w = rng_normal<float>(rng, {d, d}, 0.0f, 0.1f);
  const Tensor b({d});
  for (auto _ : state) benchmark::DoNotOptimize(linear_forward(x, w, b));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(n * d * d));
}
BENCHMARK(BM_LinearForward)->Args({16, 128})->Args({256, 512});

void BM_AngularLoss(benchmark::State& state) {
  const std::size_t n = state.range(0), c = state.range(1), d = 64;
  Rng rng(4);
  FeatureBatch<float> batch{rng_normal<float>(rng, {n, d}, 0.0f, 1.0f), {}};
  for (std::size_t i = 0; i < n; ++i) batch.labels.push_back(i % c);
  const ClassifierWeights<float> w{rng_normal<float>(rng, {c, d}, 0.0f, 1.0f)};
  AngularLossConfig cfg;
  cfg.anneal_lambda = 10.0;
  for (auto _ : state) {
    const auto res = asoftmax_loss(batch, w, cfg);
    benchmark::DoNotOptimize(asoftmax_backward(batch, w, res.saved));
  }
}
BENCHMARK(BM_AngularLoss)->Args({16, 5})->Args({256, 100});

void BM_AugmentClip(benchmark::State& state) {
  SyntheticSpec spec;
  spec.num_classes = 2;
  spec.videos_per_class = 1;
  Rng rng(5);
  const std::vector<Video> videos = generate_synthetic(spec, rng);
  const AugmentPolicy policy;
  std::uint64_t i = 0;
  for (auto _ : state) {
    Rng r = clip_rng(5, 0, i++);
    benchmark::DoNotOptimize(augment_clip(videos[0], policy, r, Mode::train));
  }
}
BENCHMARK(BM_AugmentClip)->Unit(benchmark::kMillisecond);

void BM_DeskStep(benchmark::State& state) {
  ModelConfig cfg = model_preset("desk-resnet10-basic", 5);
  auto model = build_model<float>(cfg);
  Rng rng(6);
  model->init(rng);
  const Tensor clips = rng_normal<float>(rng, {16, 3, 16, 112, 112}, 0.0f, 0.5f);
  std::vector<std::size_t> labels(16);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = i % 5;
  for (auto _ : state) {
    Tape<float> tape;
    const Var x = tape.leaf(clips);
    const Var e = model->embed(tape, x, Mode::train);
    const HeadLoss<float> hl = model->head_loss(tape, e, labels, AngularLossConfig{});
    model->parameters().zero_grad();
    tape.backward(hl.loss, Tensor({1}, 1.0f));
  }
}
BENCHMARK(BM_DeskStep)->Unit(benchmark::kMillisecond)->Iterations(3);

}  // namespace

BENCHMARK_MAIN();
