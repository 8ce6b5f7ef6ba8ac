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

// sf3cnn command line: train, evaluate, gradcheck, gen-data,
// extract-embeddings and presets.
//
// Exit codes: 0 success, 1 usage or configuration, 2 I/O, 3 numeric
// failure, 4 gradient check failure.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <utility>

#include "CLI11.hpp"
#include "sf3cnn/config.hpp"
#include "sf3cnn/dataset.hpp"
#include "sf3cnn/error.hpp"
#include "sf3cnn/gradcheck.hpp"
#include "sf3cnn/model.hpp"
#include "sf3cnn/train.hpp"

namespace fs = std::filesystem;
using namespace sf3cnn;

namespace {

enum Exit : int { kOk = 0, kUsage = 1, kIo = 2, kNumeric = 3, kVerify = 4 };

struct TrainArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string dataset;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> stop_after;
  bool resume = false;
  bool quiet = false;
};

struct EvalArgs {
  std::string checkpoint;
  std::string config;
  std::string dataset;
  std::string split = "val";
  std::string out;
};

struct GradArgs {
  std::string scope;
  std::string precision = "f64";
  std::uint64_t seed = 7;
  std::optional<double> tolerance;
  std::size_t max_entries = 48;
};

struct GenArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<std::size_t> classes, per_class, frames, height, width;
  std::optional<double> noise;
};

void print_eval(const EvalResult& r) {
  std::printf("count = %zu\naccuracy = %.10g\nloss = %.10g\n", r.count, r.accuracy, r.loss);
  std::fputs(format_angle_stats(r.stats).c_str(), stdout);
}

int run_train(const TrainArgs& a) {
  TrainConfig cfg = a.config.empty() ? TrainConfig{} : TrainConfig::load(a.config);
  if (a.seed) cfg.seed = *a.seed;
  if (!a.dataset.empty()) cfg.dataset = a.dataset;
  if (a.epochs) cfg.epochs = *a.epochs;
  cfg.validate();
  TrainOptions opts;
  opts.out_dir = a.out;
  opts.resume = a.resume;
  opts.stop_after_epoch = a.stop_after;
  if (!a.quiet) {
    opts.on_epoch = [header = true](const MetricsRow& row) mutable {
      if (std::exchange(header, false)) std::printf("%s\n", kMetricsHeader);
      std::printf("%s\n", format_metrics_row(row).c_str());
      std::fflush(stdout);
    };
  }
  const TrainResult res = train(cfg, opts);
  if (!a.quiet) std::printf("checkpoint: %s\n", res.checkpoint.string().c_str());
  return kOk;
}

int run_evaluate(const EvalArgs& a) {
  std::optional<TrainConfig> expected;
  if (!a.config.empty()) expected = TrainConfig::load(a.config);
  const EvalResult r =
      evaluate_checkpoint(a.checkpoint, a.dataset, parse_split_selector(a.split), expected);
  print_eval(r);
  return kOk;
}

int run_extract(const EvalArgs& a) {
  const EvalResult r =
      extract_embeddings(a.checkpoint, a.dataset, parse_split_selector(a.split), a.out);
  print_eval(r);
  return kOk;
}

int run_gradcheck(const GradArgs& a) {
  gradcheck::Options opts;
  opts.precision = gradcheck::parse_precision(a.precision);
  opts.seed = a.seed;
  opts.tolerance = a.tolerance;
  opts.max_entries = a.max_entries;
  const gradcheck::Report rep = gradcheck::run(a.scope, opts);
  std::fputs(gradcheck::format_report(rep).c_str(), stdout);
  return rep.passed() ? kOk : kVerify;
}

int run_gen_data(const GenArgs& a) {
  DataGenConfig cfg = a.config.empty() ? DataGenConfig{} : DataGenConfig::load(a.config);
  if (a.seed) cfg.seed = *a.seed;
  SyntheticSpec& s = cfg.spec;
  if (a.classes) s.num_classes = *a.classes;
  if (a.per_class) s.videos_per_class = *a.per_class;
  if (a.frames) s.frames_per_video = *a.frames;
  if (a.height) s.height = *a.height;
  if (a.width) s.width = *a.width;
  if (a.noise) s.noise_std = *a.noise;
  s.validate();
  Rng rng(cfg.seed);
  const std::vector<Video> videos = generate_synthetic(s, rng);
  write_dataset(a.out, videos);
  std::printf("wrote %zu videos in %zu classes to %s\n", videos.size(), s.num_classes,
              a.out.c_str());
  return kOk;
}

int run_presets() {
  for (const std::string& name : preset_names()) {
    const ModelPlan plan = plan_model(model_preset(name));
    std::printf("%-22s %12zu parameters\n", name.c_str(), plan.parameter_count);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"3D residual networks with an angular-margin softmax head"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "sf3cnn 0.1.0");

  TrainArgs ta;
  CLI::App* train_cmd = app.add_subcommand("train", "Train a model on a dataset");
  train_cmd->add_option("--config", ta.config, "key = value configuration file");
  train_cmd->add_option("--seed", ta.seed, "Override the configured seed");
  train_cmd->add_option("--out", ta.out, "Run directory (metrics.csv, checkpoint/)")->required();
  train_cmd->add_option("--dataset", ta.dataset, "Override the dataset root");
  train_cmd->add_option("--epochs", ta.epochs, "Override the epoch count");
  train_cmd->add_option("--stop-after", ta.stop_after, "Stop after this epoch");
  train_cmd->add_flag("--resume", ta.resume, "Continue from <out>/checkpoint");
  train_cmd->add_flag("-q,--quiet", ta.quiet, "Do not print metrics rows");

  EvalArgs ea;
  CLI::App* eval_cmd = app.add_subcommand("evaluate", "Evaluate a checkpoint on a split");
  eval_cmd->add_option("--checkpoint", ea.checkpoint, "Checkpoint directory")->required();
  eval_cmd->add_option("--config", ea.config, "Configuration the checkpoint must match");
  eval_cmd->add_option("--dataset", ea.dataset, "Dataset root (default: from checkpoint)");
  eval_cmd->add_option("--split", ea.split, "train, val or all")
      ->check(CLI::IsMember({"train", "val", "all"}));

  EvalArgs xa;
  CLI::App* extract_cmd =
      app.add_subcommand("extract-embeddings", "Write per-video embeddings and angle stats");
  extract_cmd->add_option("--checkpoint", xa.checkpoint, "Checkpoint directory")->required();
  extract_cmd->add_option("--out", xa.out, "Output directory")->required();
  extract_cmd->add_option("--dataset", xa.dataset, "Dataset root (default: from checkpoint)");
  extract_cmd->add_option("--split", xa.split, "train, val or all")
      ->check(CLI::IsMember({"train", "val", "all"}));

  GradArgs ga;
  CLI::App* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  std::string scope_help = "One of:";
  for (const std::string& s : gradcheck::scopes()) scope_help += " " + s;
  grad_cmd->add_option("scope", ga.scope, scope_help)->required();
  grad_cmd->add_option("--precision", ga.precision, "f64 (default) or f32");
  grad_cmd->add_option("--seed", ga.seed, "Seed for test data");
  grad_cmd->add_option("--tolerance", ga.tolerance, "Override the max relative error");
  grad_cmd->add_option("--max-entries", ga.max_entries, "Entries checked per tensor");

  GenArgs da;
  CLI::App* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic video dataset");
  gen_cmd->add_option("--config", da.config, "key = value data configuration file");
  gen_cmd->add_option("--seed", da.seed, "Generator seed");
  gen_cmd->add_option("--out", da.out, "Dataset root")->required();
  gen_cmd->add_option("--classes", da.classes);
  gen_cmd->add_option("--videos-per-class", da.per_class);
  gen_cmd->add_option("--frames", da.frames);
  gen_cmd->add_option("--height", da.height);
  gen_cmd->add_option("--width", da.width);
  gen_cmd->add_option("--noise", da.noise);

  app.add_subcommand("presets", "List model presets and parameter counts");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (train_cmd->parsed()) return run_train(ta);
    if (eval_cmd->parsed()) return run_evaluate(ea);
    if (extract_cmd->parsed()) return run_extract(xa);
    if (grad_cmd->parsed()) return run_gradcheck(ga);
    if (gen_cmd->parsed()) return run_gen_data(da);
    return run_presets();
  } catch (const IoError& e) {
    std::fprintf(stderr, "I/O error: %s\n", e.what());
    return kIo;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return kNumeric;
  } catch (const CompatibilityError& e) {
    std::fprintf(stderr, "incompatible checkpoint: %s\n", e.what());
    return kUsage;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const fs::filesystem_error& e) {
    std::fprintf(stderr, "I/O error: %s\n", e.what());
    return kIo;
  }
}
