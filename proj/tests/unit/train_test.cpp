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
#include <filesystem>
#include <fstream>
#include <sstream>

#include "sf3cnn/checkpoint.hpp"
#include "sf3cnn/error.hpp"
#include "sf3cnn/sten.hpp"
#include "sf3cnn/train.hpp"

namespace sf3cnn {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

class TrainTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = fs::temp_directory_path() / "sf3cnn_train_test";
    fs::remove_all(root_);
    SyntheticSpec spec;
    spec.num_classes = 3;
    spec.videos_per_class = 6;
    spec.frames_per_video = 6;
    spec.height = 24;
    spec.width = 24;
    Rng rng(1);
    write_dataset(root_ / "data", generate_synthetic(spec, rng));
  }
  static void TearDownTestSuite() { fs::remove_all(root_); }

  static TrainConfig tiny_config() {
    TrainConfig c;
    c.dataset = root_ / "data";
    c.clip_len = 8;
    c.out_size = 32;
    c.batch_size = 4;
    c.epochs = 3;
    c.seed = 5;
    c.lambda.decay = 0.9;
    return c;
  }
  static fs::path out(const std::string& name) {
    const fs::path p = root_ / name;
    fs::remove_all(p);
    return p;
  }

  static inline fs::path root_;
};

TEST(Metrics, RowFormatAndTrailingMean) {
  MetricsRow r;
  r.epoch = 3;
  r.train_loss = 0.5;
  r.val_loss = 1.0 / 3.0;
  r.val_acc = 1.0;
  EXPECT_EQ(format_metrics_row(r), "3,0.5,0.3333333333,0,1,0,0,0");
  EXPECT_EQ(trailing_mean({1, 2, 3, 4, 5, 6}, 3), (std::vector<double>{1, 1.5, 2, 3, 4, 5}));
  EXPECT_EQ(trailing_mean({4}, 5), (std::vector<double>{4}));
  EXPECT_THROW(trailing_mean({1}, 0), DomainError);
}

TEST(Metrics, ReadRejectsBadFiles) {
  const fs::path p = fs::temp_directory_path() / "sf3cnn_bad_metrics.csv";
  {
    std::ofstream os(p);
    os << "epoch,loss\n1,2\n";
  }
  EXPECT_THROW(read_metrics(p), IoError);
  {
    std::ofstream os(p);
    os << kMetricsHeader << "\n1,2,3\n";
  }
  EXPECT_THROW(read_metrics(p), IoError);
  fs::remove(p);
  EXPECT_THROW(read_metrics(p), IoError);
}

TEST(Streams, AugmentStreamIsPureFunction) {
  EXPECT_TRUE(augment_rng(1, 2, 3) == augment_rng(1, 2, 3));
  EXPECT_FALSE(augment_rng(1, 2, 3) == augment_rng(1, 3, 3));
  EXPECT_FALSE(stream_rng(1, Stream::init) == stream_rng(1, Stream::shuffle));
}

TEST_F(TrainTest, SeededRunsAreByteIdentical) {
  const TrainConfig c = tiny_config();
  TrainOptions a{out("run_a")}, b{out("run_b")};
  const TrainResult ra = train(c, a);
  train(c, b);
  ASSERT_EQ(ra.rows.size(), 3u);
  const std::string text = slurp(a.out_dir / "metrics.csv");
  EXPECT_EQ(text, slurp(b.out_dir / "metrics.csv"));
  EXPECT_EQ(text.substr(0, text.find('\n')), kMetricsHeader);

  TrainConfig other = c;
  other.seed = 6;
  TrainOptions o{out("run_other")};
  train(other, o);
  EXPECT_NE(slurp(o.out_dir / "metrics.csv"), text);

  // The val_loss_avg column is the trailing mean of val_loss.
  const auto rows = read_metrics(a.out_dir / "metrics.csv");
  std::vector<double> losses;
  for (const auto& r : rows) losses.push_back(r.val_loss);
  const auto avg = trailing_mean(losses, c.metrics_window);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_NEAR(rows[i].val_loss_avg, avg[i], 1e-9);
    EXPECT_EQ(rows[i].epoch, i + 1);
    EXPECT_TRUE(std::isfinite(rows[i].train_loss));
    EXPECT_GE(rows[i].val_acc, 0.0);
    EXPECT_LE(rows[i].val_acc, 1.0);
    EXPECT_EQ(rows[i].wall_time_s, 0.0);
  }
}

TEST_F(TrainTest, ResumeMatchesUninterruptedRun) {
  const TrainConfig c = tiny_config();
  TrainOptions full{out("full")};
  train(c, full);

  TrainOptions part{out("part")};
  part.stop_after_epoch = 1;
  EXPECT_EQ(train(c, part).rows.size(), 1u);
  LoadedCheckpoint ck = load_checkpoint(part.out_dir / "checkpoint");
  EXPECT_EQ(ck.meta.epoch, 1u);
  part.stop_after_epoch.reset();
  part.resume = true;
  std::vector<std::size_t> seen;
  part.on_epoch = [&](const MetricsRow& r) { seen.push_back(r.epoch); };
  train(c, part);
  EXPECT_EQ(seen, (std::vector<std::size_t>{2, 3}));
  EXPECT_EQ(slurp(part.out_dir / "metrics.csv"), slurp(full.out_dir / "metrics.csv"));
  // Final weights agree bit for bit.
  LoadedCheckpoint a = load_checkpoint(full.out_dir / "checkpoint");
  LoadedCheckpoint b = load_checkpoint(part.out_dir / "checkpoint");
  const auto& pa = a.model->parameters().params;
  const auto& pb = b.model->parameters().params;
  ASSERT_EQ(pa.size(), pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(*pa[i].value, *pb[i].value) << pa[i].name;
}

TEST_F(TrainTest, ResumeRejectsIncompatibleConfig) {
  TrainConfig c = tiny_config();
  c.epochs = 1;
  TrainOptions o{out("compat")};
  train(c, o);
  c.margin = 2;
  c.epochs = 2;
  o.resume = true;
  EXPECT_THROW(train(c, o), CompatibilityError);
  TrainOptions none{out("no_ckpt")};
  none.resume = true;
  EXPECT_THROW(train(tiny_config(), none), IoError);
}

TEST_F(TrainTest, EvaluateCheckpointReproducesLastRow) {
  const TrainConfig c = tiny_config();
  TrainOptions o{out("eval")};
  const TrainResult r = train(c, o);
  const EvalResult ev = evaluate_checkpoint(r.checkpoint, {}, SplitSelector::val);
  EXPECT_DOUBLE_EQ(ev.accuracy, r.rows.back().val_acc);
  EXPECT_DOUBLE_EQ(ev.loss, r.rows.back().val_loss);
  EXPECT_DOUBLE_EQ(ev.stats.intra_mean, r.rows.back().intra_mean);
  EXPECT_EQ(ev.count, 7u);  // 18 videos, round(0.4 * 18) on the val side
  EXPECT_EQ(evaluate_checkpoint(r.checkpoint, c.dataset, SplitSelector::all).count, 18u);
  TrainConfig wrong = c;
  wrong.model = "desk-resnet18-basic";
  EXPECT_THROW(evaluate_checkpoint(r.checkpoint, c.dataset, SplitSelector::val, wrong),
               CompatibilityError);
  EXPECT_THROW(evaluate_checkpoint(root_ / "nowhere", c.dataset, SplitSelector::val), IoError);
}

TEST_F(TrainTest, ExtractEmbeddingsWritesArtifacts) {
  TrainConfig c = tiny_config();
  c.epochs = 1;
  TrainOptions o{out("emb")};
  const TrainResult r = train(c, o);
  const fs::path dir = out("emb_out");
  const EvalResult ev = extract_embeddings(r.checkpoint, c.dataset, SplitSelector::all, dir);
  const Tensor e = sten::read(dir / "embeddings.sten");
  const Tensor l = sten::read(dir / "labels.sten");
  EXPECT_EQ(e.dims(), (Shape{18, 64}));
  EXPECT_EQ(l.dims(), (Shape{18}));
  EXPECT_EQ(e, ev.embeddings);
  for (std::size_t i = 0; i < 18; ++i) EXPECT_EQ(l[i], static_cast<float>(i / 6));
  const std::string stats = slurp(dir / "angle_stats.txt");
  EXPECT_NE(stats.find("intra_mean = "), std::string::npos);
  EXPECT_NE(stats.find("inter_min = "), std::string::npos);
}

TEST_F(TrainTest, MultiClipVotingRuns) {
  TrainConfig c = tiny_config();
  c.epochs = 1;
  c.eval_clips = 3;
  TrainOptions o{out("vote")};
  const auto rows = train(c, o).rows;
  EXPECT_GE(rows[0].val_acc, 0.0);
}

TEST_F(TrainTest, RandomWeightsScoreNearChance) {
  TrainConfig c = tiny_config();
  const std::vector<Video> videos = load_dataset(c.dataset);
  double acc = 0.0;
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    auto model = build_model<float>(c.model_config(3));
    Rng rng(seed);
    model->init(rng);
    std::vector<std::size_t> ids(videos.size());
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
    acc += evaluate_model(*model, videos, ids, c.augment_policy({0.5f, 0.5f, 0.5f}), eval_settings(c))
               .accuracy / 8.0;
  }
  EXPECT_NEAR(acc, 1.0 / 3.0, 0.2);
}

TEST_F(TrainTest, InputErrors) {
  TrainConfig c = tiny_config();
  auto model = build_model<float>(c.model_config(3));
  const std::vector<Video> videos = load_dataset(c.dataset);
  EXPECT_THROW(evaluate_model(*model, videos, {}, c.augment_policy({}), eval_settings(c)),
               InputError);
  c.dataset = root_ / "missing";
  TrainOptions o{out("missing")};
  EXPECT_THROW(train(c, o), IoError);
  c.dataset.clear();
  EXPECT_THROW(train(c, o), ConfigError);
}

TEST_F(TrainTest, DivergenceAbortsAndKeepsLastCheckpoint) {
  TrainConfig c = tiny_config();
  c.epochs = 1;
  TrainOptions o{out("diverge")};
  train(c, o);
  c.epochs = 3;
  c.optimizer = OptimizerKind::sgd;
  c.sgd = {1e30, 0.0, 0.0};
  o.resume = true;
  try {
    train(c, o);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    SUCCEED() << e.what();
  }
  const LoadedCheckpoint ck = load_checkpoint(o.out_dir / "checkpoint");
  EXPECT_EQ(ck.meta.epoch, 1u);
  EXPECT_EQ(read_metrics(o.out_dir / "metrics.csv").size(), 1u);
}

TEST(SplitSelector, Names) {
  EXPECT_EQ(parse_split_selector("val"), SplitSelector::val);
  EXPECT_EQ(parse_split_selector("all"), SplitSelector::all);
  EXPECT_THROW(parse_split_selector("test"), ConfigError);
}

}  // namespace
}  // namespace sf3cnn
