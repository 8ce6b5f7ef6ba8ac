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

// Acceptance suite: one PASS/FAIL line per criterion.
//
//   sf3cnn_acceptance [--work DIR] [--report FILE] [--skip-training]
//
// Criteria 6, 7 and 10 train the reference benchmark (about half an hour on
// one core); --skip-training reports them as SKIP and exits non-zero.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdarg>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "sf3cnn/angular_softmax.hpp"
#include "sf3cnn/dataset.hpp"
#include "sf3cnn/gradcheck.hpp"
#include "sf3cnn/layers.hpp"
#include "sf3cnn/optim.hpp"
#include "sf3cnn/train.hpp"
#include "sf3cnn/video.hpp"

namespace fs = std::filesystem;
using namespace sf3cnn;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[1024];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof(buf), f, ap);
  va_end(ap);
  return buf;
}

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    if (!detail.empty()) detail += "; ";
    detail += what + (ok ? "" : " [x]");
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// ---------------------------------------------------------------------------

Outcome criterion1() {
  Outcome o;
  const auto t0 = Clock::now();
  const gradcheck::Report r = gradcheck::run("loss", {});
  double worst = 0.0;
  int margins = 0;
  for (int m = 1; m <= 4; ++m) {
    bool seen = false;
    for (const auto& g : r.groups) seen |= g.name.rfind("asoftmax.m" + std::to_string(m), 0) == 0;
    margins += seen;
  }
  for (const auto& g : r.groups) worst = std::max(worst, g.max_rel_err);
  const double secs = seconds_since(t0);
  o.require(margins == 4, fmt("margins 1-4 covered (%d)", margins));
  o.require(r.passed() && worst <= 1e-4, fmt("max rel err %.3g <= 1e-4 (64-bit)", worst));
  o.require(secs < 60.0, fmt("%.1fs < 60s", secs));
  return o;
}

Outcome criterion2() {
  Outcome o;
  const auto t0 = Clock::now();
  gradcheck::Options f64, f32;
  f32.precision = gradcheck::Precision::f32;
  double w64 = 0.0, w32 = 0.0;
  const gradcheck::Report r64 = gradcheck::run("layer:all", f64);
  const gradcheck::Report r32 = gradcheck::run("layer:all", f32);
  for (const auto& g : r64.groups) w64 = std::max(w64, g.max_rel_err);
  for (const auto& g : r32.groups) w32 = std::max(w32, g.max_rel_err);
  o.require(r64.passed() && w64 <= 1e-5, fmt("backward 64-bit %.3g <= 1e-5", w64));
  o.require(r32.passed() && w32 <= 1e-3, fmt("backward 32-bit %.3g <= 1e-3", w32));

  struct ConvCase {
    Shape x, w;
    Extent3 stride, pad;
  };
  const std::vector<ConvCase> cases = {
      {{2, 3, 4, 6, 5}, {4, 3, 3, 3, 3}, {1, 1, 1}, {1, 1, 1}},
      {{3, 2, 5, 7, 7}, {3, 2, 3, 3, 3}, {2, 2, 2}, {1, 1, 1}},
      {{2, 3, 8, 16, 16}, {4, 3, 3, 4, 4}, {2, 4, 4}, {1, 0, 0}},
      {{16, 8, 1, 2, 2}, {8, 8, 3, 3, 3}, {1, 1, 1}, {1, 1, 1}},
      {{2, 2, 3, 4, 4}, {2, 2, 1, 3, 2}, {1, 2, 1}, {0, 1, 0}},
  };
  Rng rng(2);
  double fwd = 0.0;
  for (const auto& c : cases) {
    Conv3dParams<double> p;
    const Tensor64 x = rng_uniform<double>(rng, c.x, -1, 1);
    p.weights = rng_uniform<double>(rng, c.w, -1, 1);
    p.bias = rng_uniform<double>(rng, {c.w[0]}, -1, 1);
    p.stride = c.stride;
    p.padding = c.pad;
    const Tensor64 y = conv3d_forward(x, p);
    const Tensor64 ref = oracle::conv3d(x, p.weights, &*p.bias, c.stride, c.pad);
    if (y.dims() != ref.dims()) {
      fwd = INFINITY;
      continue;
    }
    for (std::size_t i = 0; i < y.size(); ++i) {
      fwd = std::max(fwd, std::abs(y[i] - ref[i]) / std::max(std::abs(ref[i]), 1e-6));
    }
  }
  o.require(fwd <= 1e-5, fmt("conv3d forward vs loop oracle %.3g <= 1e-5", fwd));
  const double secs = seconds_since(t0);
  o.require(secs < 120.0, fmt("%.1fs < 120s", secs));
  return o;
}

Outcome criterion3() {
  Outcome o;
  Rng rng(3);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.index(16), c = 2 + rng.index(8), d = 2 + rng.index(16);
    const Tensor64 x = rng_normal<double>(rng, {n, d}, 0.0, 0.5 + trial % 4);
    const Tensor64 w = rng_normal<double>(rng, {c, d}, 0.0, 1.0);
    std::vector<std::size_t> labels(n);
    for (auto& l : labels) l = rng.index(c);
    AngularLossConfig cfg;
    cfg.margin = 1;
    cfg.anneal_lambda = 0.0;
    const FeatureBatch<double> batch{x, labels};
    const ClassifierWeights<double> cw{w};
    const auto res = asoftmax_loss(batch, cw, cfg);
    const auto g = asoftmax_backward(batch, cw, res.saved);
    const auto ref = oracle::modified_softmax({x.values().begin(), x.values().end()},
                                              {w.values().begin(), w.values().end()}, labels, d);
    worst = std::max(worst, std::abs(res.loss - ref.loss) / std::max(1.0, std::abs(ref.loss)));
    worst = std::max(worst, oracle::max_rel_err({g.grad_x.values().begin(), g.grad_x.values().end()},
                                                ref.grad_x, 1e-9));
    worst = std::max(worst, oracle::max_rel_err({g.grad_w.values().begin(), g.grad_w.values().end()},
                                                ref.grad_w, 1e-9));
  }
  o.require(worst <= 1e-6, fmt("100 batches, max rel err %.3g <= 1e-6", worst));
  return o;
}

Outcome criterion4() {
  Outcome o;
  double eq = 0.0;
  for (std::size_t c : {2, 3, 5, 10, 40}) {
    // Feature orthogonal to every class weight: all cosines are zero.
    Tensor64 w({c, c + 1});
    for (std::size_t j = 0; j < c; ++j) w.at({j, j}) = 0.5 + j;
    Tensor64 x({1, c + 1});
    x.at({0, c}) = 2.5;
    // All logits are zero only without a margin: psi(pi/2) != 0 for m > 1.
    AngularLossConfig cfg;
    cfg.margin = 1;
    const double l = asoftmax_loss(FeatureBatch<double>{x, {0}}, ClassifierWeights<double>{w}, cfg).loss;
    eq = std::max(eq, std::abs(l - std::log(static_cast<double>(c))));
  }
  o.require(eq <= 1e-6, fmt("equiangular |L - ln C| = %.2g", eq));
  double orth = 0.0;
  const Tensor64 w({2, 2}, {1, 0, 0, 1});
  const Tensor64 x({1, 2}, {1, 0});
  for (int m = 1; m <= 4; ++m) {
    AngularLossConfig cfg;
    cfg.margin = m;
    const double l = asoftmax_loss(FeatureBatch<double>{x, {0}}, ClassifierWeights<double>{w}, cfg).loss;
    orth = std::max(orth, std::abs(l - std::log1p(std::exp(-1.0))));
  }
  o.require(orth <= 1e-6, fmt("orthogonal two-class |L - ln(1+e^-1)| = %.2g (m=1..4)", orth));
  return o;
}

Outcome criterion5() {
  Outcome o;
  constexpr double pi = std::numbers::pi;
  double jump = 0.0;
  bool monotone = true;
  for (int m = 1; m <= 4; ++m) {
    for (int k = 1; k < m; ++k) {
      const double j = k * pi / m;
      jump = std::max(jump, std::abs(psi(j - 1e-9, m) - psi(j + 1e-9, m)));
    }
    double prev = psi(0.0, m);
    for (int i = 1; i < 10000; ++i) {
      const double v = psi(pi * i / 9999.0, m);
      monotone &= v < prev;
      prev = v;
    }
  }
  o.require(jump <= 1e-6, fmt("max jump at joints %.2g <= 1e-6", jump));
  o.require(monotone, "strictly decreasing on 10^4-point grids, m=1..4");
  return o;
}

Outcome criterion9() {
  Outcome o;
  Rng rng(9);
  double first = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    Tensor64 p = rng_normal<double>(rng, {256}, 0.0, 1.0);
    const Tensor64 g = rng_normal<double>(rng, {256}, 0.0, std::pow(10.0, trial % 6 - 3));
    const Tensor64 before = p;
    Tensor64 grad = g;
    std::vector<ParamRef<double>> refs = {{"p", &p, &grad}};
    AdamaxState<double> st;
    adamax_step(std::span<const ParamRef<double>>(refs), st);
    for (std::size_t k = 0; k < 256; ++k) {
      const double expect = -0.002 * (g[k] > 0 ? 1.0 : -1.0);
      // eps effect: the exact step is lr * |g| / (|g| + eps).
      const double eps_effect = 0.002 * 1e-8 / (std::abs(g[k]) + 1e-8);
      first = std::max(first, std::abs(p[k] - before[k] - expect) / (eps_effect + 1e-15));
    }
  }
  o.require(first <= 1.0 + 1e-6, fmt("first step = -lr*sign(g) within eps effects (ratio %.3f)", first));
  double bound = 0.0;
  for (int traj = 0; traj < 10; ++traj) {
    Tensor64 p = rng_normal<double>(rng, {128}, 0.0, 1.0);
    Tensor64 g({128});
    std::vector<ParamRef<double>> refs = {{"p", &p, &g}};
    AdamaxState<double> st;
    for (int t = 1; t <= 1000; ++t) {
      const double s = std::exp(2.0 * std::sin(0.013 * t * (traj + 1)));
      for (auto& v : g.values()) v = s * rng.normal();
      const Tensor64 before = p;
      adamax_step(std::span<const ParamRef<double>>(refs), st);
      const double lim = 0.002 / (1.0 - std::pow(0.9, t));
      for (std::size_t k = 0; k < 128; ++k) bound = std::max(bound, std::abs(p[k] - before[k]) / lim);
    }
  }
  o.require(bound <= 1.0, fmt("|step| / (lr/(1-b1^t)) max %.4f <= 1 over 10 x 1000 steps", bound));
  return o;
}

// ---------------------------------------------------------------------------
// Reference benchmark runs.

struct RunSummary {
  fs::path dir;
  std::vector<MetricsRow> rows;
  double seconds = 0.0;
};

TrainConfig reference_config(const fs::path& data, const std::string& model, int margin,
                             std::uint64_t seed) {
  TrainConfig c;
  c.dataset = data;
  c.model = model;
  c.margin = margin;
  c.seed = seed;
  c.epochs = 30;
  c.lambda.decay = 0.9;
  c.split_stratified = true;
  return c;
}

RunSummary run_reference(const TrainConfig& c, const fs::path& dir,
                         std::optional<std::size_t> stop_after = std::nullopt, bool resume = false) {
  if (!resume) fs::remove_all(dir);
  const auto t0 = Clock::now();
  TrainOptions o;
  o.out_dir = dir;
  o.stop_after_epoch = stop_after;
  o.resume = resume;
  const std::string tag = c.model + fmt(" m=%d seed=%llu", c.margin, static_cast<unsigned long long>(c.seed));
  o.on_epoch = [&](const MetricsRow& r) {
    std::fprintf(stderr, "  [%s] epoch %zu train_loss %.4f val_acc %.4f\n", tag.c_str(), r.epoch,
                 r.train_loss, r.val_acc);
  };
  const TrainResult res = train(c, o);
  return {dir, res.rows, seconds_since(t0)};
}

// Share of epochs whose trailing-5 train-loss average does not increase.
double trend_share(const std::vector<MetricsRow>& rows) {
  std::vector<double> tl;
  for (const auto& r : rows) tl.push_back(r.train_loss);
  const auto avg = trailing_mean(tl, 5);
  std::size_t ok = 0;
  for (std::size_t i = 1; i < avg.size(); ++i) ok += avg[i] <= avg[i - 1];
  return avg.size() > 1 ? static_cast<double>(ok) / static_cast<double>(avg.size() - 1) : 1.0;
}

}  // namespace

int main(int argc, char** argv) {
  fs::path work = fs::temp_directory_path() / "sf3cnn_acceptance";
  fs::path report_path;
  bool skip_training = false;
  for (int i = 1; i < argc; ++i) {
    if (!std::strcmp(argv[i], "--work") && i + 1 < argc) {
      work = argv[++i];
    } else if (!std::strcmp(argv[i], "--report") && i + 1 < argc) {
      report_path = argv[++i];
    } else if (!std::strcmp(argv[i], "--skip-training")) {
      skip_training = true;
    } else {
      std::fprintf(stderr, "usage: %s [--work DIR] [--report FILE] [--skip-training]\n", argv[0]);
      return 2;
    }
  }
  fs::create_directories(work);

  std::vector<std::string> lines;
  bool all_pass = true;
  auto report = [&](int n, const std::string& name, const Outcome& o) {
    all_pass &= o.pass;
    lines.push_back(fmt("criterion %2d %-28s %s  %s", n, name.c_str(), o.pass ? "PASS" : "FAIL",
                        o.detail.c_str()));
    std::printf("%s\n", lines.back().c_str());
    std::fflush(stdout);
  };
  auto guarded = [](const std::function<Outcome()>& f) {
    try {
      return f();
    } catch (const std::exception& e) {
      Outcome o;
      o.require(false, std::string("exception: ") + e.what());
      return o;
    }
  };

  report(1, "loss gradients", guarded(criterion1));
  report(2, "layer fidelity", guarded(criterion2));
  report(3, "degenerate margin", guarded(criterion3));
  report(4, "closed-form losses", guarded(criterion4));
  report(5, "psi properties", guarded(criterion5));

  // Reference synthetic benchmark: 5 classes x 64 videos, 20 frames of 48 x 48.
  const fs::path data = work / "reference_data";
  std::vector<Video> videos;
  {
    SyntheticSpec spec;
    Rng gen(12345);
    videos = generate_synthetic(spec, gen);
    fs::remove_all(data);
    write_dataset(data, videos);
  }

  report(8, "pipeline exactness", guarded([&] {
    Outcome o;
    SplitOptions explicit_counts;
    explicit_counts.train_count = 415;
    explicit_counts.val_count = 260;
    const DatasetSplit a = split_dataset(675, explicit_counts);
    o.require(a.train.size() == 415 && a.val.size() == 260, "override gives 415/260");
    const DatasetSplit b = split_dataset(675, SplitOptions{});
    o.require(b.train.size() == 405 && b.val.size() == 270, "ratio rule gives 405/270");
    Rng rng(8);
    const AugmentPolicy policy;
    bool shapes = true;
    for (int i = 0; i < 40; ++i) {
      Video v;
      v.frames = rng_uniform<float>(rng, {1 + rng.index(40), 3, 16 + rng.index(200), 16 + rng.index(200)});
      for (Mode mode : {Mode::train, Mode::eval}) {
        shapes &= augment_clip(v, policy, rng, mode).dims() == Shape{3, 16, 112, 112};
      }
    }
    o.require(shapes, "augment_clip always 3x16x112x112 (40 random videos)");
    // Short seeded runs on a small draw, twice.
    const fs::path small = work / "small_data";
    SyntheticSpec spec;
    spec.num_classes = 3;
    spec.videos_per_class = 8;
    spec.frames_per_video = 10;
    spec.height = 32;
    spec.width = 32;
    Rng g2(4);
    fs::remove_all(small);
    write_dataset(small, generate_synthetic(spec, g2));
    TrainConfig c;
    c.dataset = small;
    c.epochs = 2;
    c.batch_size = 8;
    c.clip_len = 8;
    c.out_size = 32;
    c.seed = 3;
    TrainOptions r1, r2;
    r1.out_dir = work / "small_a";
    r2.out_dir = work / "small_b";
    fs::remove_all(r1.out_dir);
    fs::remove_all(r2.out_dir);
    train(c, r1);
    train(c, r2);
    const std::string m1 = slurp(r1.out_dir / "metrics.csv");
    o.require(!m1.empty() && m1 == slurp(r2.out_dir / "metrics.csv"), "seeded runs byte-identical");
    return o;
  }));

  report(9, "adamax step properties", guarded(criterion9));

  if (skip_training) {
    for (int n : {6, 7, 10}) {
      all_pass = false;
      lines.push_back(fmt("criterion %2d %-28s SKIP  --skip-training", n, "reference benchmark"));
      std::printf("%s\n", lines.back().c_str());
    }
  } else {
    const std::vector<std::uint64_t> seeds = {0, 1, 2};
    std::vector<RunSummary> m4, m1, r18;
    double c6_seconds = 0.0;
    Outcome o6, o7, o10;
    try {
      for (std::uint64_t s : seeds) {
        m4.push_back(run_reference(reference_config(data, "desk-resnet10-basic", 4, s),
                                   work / fmt("r10_m4_s%llu", static_cast<unsigned long long>(s))));
        m1.push_back(run_reference(reference_config(data, "desk-resnet10-basic", 1, s),
                                   work / fmt("r10_m1_s%llu", static_cast<unsigned long long>(s))));
        c6_seconds += m4.back().seconds + m1.back().seconds;
      }
      for (std::size_t i = 0; i < seeds.size(); ++i) {
        const MetricsRow& a = m4[i].rows.back();
        const MetricsRow& b = m1[i].rows.back();
        o6.require(a.val_acc >= 0.95, fmt("seed %zu: m=4 acc %.4f >= 0.95", i, a.val_acc));
        o6.require(a.intra_mean < b.intra_mean,
                   fmt("intra %.4f < %.4f", a.intra_mean, b.intra_mean));
        o6.require(a.inter_min > b.inter_min, fmt("inter_min %.4f > %.4f", a.inter_min, b.inter_min));
      }
      o6.require(c6_seconds <= 1800.0, fmt("%.0fs <= 1800s", c6_seconds));
    } catch (const std::exception& e) {
      o6.require(false, std::string("exception: ") + e.what());
    }
    report(6, "margin vs m=1 comparison", o6);

    try {
      std::vector<double> a10, a18, diffs;
      for (std::size_t i = 0; i < seeds.size(); ++i) {
        r18.push_back(run_reference(reference_config(data, "desk-resnet18-basic", 4, seeds[i]),
                                    work / fmt("r18_m4_s%llu", static_cast<unsigned long long>(seeds[i]))));
        a10.push_back(m4.at(i).rows.back().val_acc);
        a18.push_back(r18.back().rows.back().val_acc);
        diffs.push_back(std::abs(a10.back() - a18.back()));
      }
      o7.require(median(diffs) <= 0.02, fmt("median |acc10 - acc18| = %.4f <= 0.02", median(diffs)));
      const double dm = std::abs(median(a10) - median(a18));
      o7.require(dm <= 0.02, fmt("|median acc10 %.4f - median acc18 %.4f| = %.4f <= 0.02", median(a10),
                                 median(a18), dm));
    } catch (const std::exception& e) {
      o7.require(false, std::string("exception: ") + e.what());
    }
    report(7, "depth insensitivity", o7);

    try {
      const RunSummary again = run_reference(reference_config(data, "desk-resnet10-basic", 4, 0),
                                             work / "r10_m4_s0_again");
      const std::string first = slurp(m4.at(0).dir / "metrics.csv");
      o10.require(!first.empty() && first == slurp(again.dir / "metrics.csv"),
                  "30-epoch metrics byte-identical across two runs");
      const TrainConfig c = reference_config(data, "desk-resnet10-basic", 4, 0);
      const fs::path dir = work / "r10_m4_s0_resume";
      run_reference(c, dir, 5);
      run_reference(c, dir, 6, true);
      // Header plus the first six rows must match the uninterrupted run.
      auto head = [](const std::string& text, int n) {
        std::size_t pos = 0;
        for (int i = 0; i < n && pos != std::string::npos; ++i) pos = text.find('\n', pos) + 1;
        return text.substr(0, pos);
      };
      const std::string resumed = slurp(dir / "metrics.csv");
      o10.require(resumed == head(first, 7), "save at epoch 5, reload, epoch 6 row bit-identical");
    } catch (const std::exception& e) {
      o10.require(false, std::string("exception: ") + e.what());
    }
    report(10, "determinism & checkpointing", o10);

    // Spec invariant outside the numbered criteria, reported for information.
    std::string trend;
    for (const auto* set : {&m4, &m1, &r18}) {
      for (const auto& r : *set) {
        if (r.rows.empty()) continue;
        trend += fmt(" %s=%.0f%%", r.dir.filename().c_str(), 100.0 * trend_share(r.rows));
      }
    }
    lines.push_back("info: epochs with non-increasing trailing-5 train loss (target >= 90%):" + trend);
    std::printf("%s\n", lines.back().c_str());
  }

  lines.push_back(all_pass ? "ACCEPTANCE PASS" : "ACCEPTANCE FAIL");
  std::printf("%s\n", lines.back().c_str());
  if (!report_path.empty()) {
    std::ofstream os(report_path);
    for (const auto& l : lines) os << l << "\n";
  }
  return all_pass ? 0 : 1;
}
