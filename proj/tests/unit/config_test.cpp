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

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "sf3cnn/config.hpp"
#include "sf3cnn/error.hpp"

namespace sf3cnn {
namespace {

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

TEST(KeyValues, CommentsBlanksAndWhitespace) {
  const KeyValues kv = parse_key_values("# header\n\n  epochs =  7  # trailing\nseed=3\n");
  EXPECT_EQ(kv.values.at("epochs"), "7");
  EXPECT_EQ(kv.values.at("seed"), "3");
  EXPECT_EQ(kv.lines.at("epochs"), 3u);
  EXPECT_EQ(kv.lines.at("seed"), 4u);
}

TEST(KeyValues, Errors) {
  EXPECT_NE(error_of([] { parse_key_values("a = 1\nnot a pair\n", "f.cfg"); }).find("f.cfg:2"),
            std::string::npos);
  EXPECT_NE(error_of([] { parse_key_values("a = 1\nb = 2\na = 3\n"); }).find("duplicate"),
            std::string::npos);
  EXPECT_THROW(parse_key_values(" = 4\n"), ConfigError);
  EXPECT_THROW(read_key_values("/nonexistent/sf3cnn.cfg"), IoError);
}

TEST(TrainConfig, DefaultsMirrorReferenceSettings) {
  const TrainConfig c;
  EXPECT_EQ(c.model, "desk-resnet10-basic");
  EXPECT_EQ(c.loss, HeadKind::asoftmax);
  EXPECT_EQ(c.margin, 4);
  EXPECT_EQ(c.optimizer, OptimizerKind::adamax);
  EXPECT_DOUBLE_EQ(c.adamax.lr, 0.002);
  EXPECT_EQ(c.clip_len, 16u);
  EXPECT_EQ(c.out_size, 112u);
  EXPECT_DOUBLE_EQ(c.flip_prob, 0.5);
  EXPECT_DOUBLE_EQ(c.split_ratio, 0.6);
  EXPECT_EQ(c.metrics_window, 5u);
  EXPECT_NO_THROW(c.validate());
}

TEST(TrainConfig, ParsesEveryKindOfField) {
  const TrainConfig c = TrainConfig::from_text(
      "model = desk-resnet18-basic\nactivation = relu\nloss = cross_entropy\nmargin = 2\n"
      "anneal = false\nlambda_decay = 0.9\noptimizer = sgd\nsgd_lr = 0.05\nsgd_momentum = 0.8\n"
      "batch_size = 4\nepochs = 3\nseed = 99\nsplit_train = 30\nsplit_val = 10\n"
      "clip_len = 8\nout_size = 32\ndataset = /tmp/x\nembedding_dim = 16\n");
  EXPECT_EQ(c.model, "desk-resnet18-basic");
  EXPECT_EQ(c.activation, ActivationKind::relu);
  EXPECT_EQ(c.loss, HeadKind::cross_entropy);
  EXPECT_EQ(c.margin, 2);
  EXPECT_FALSE(c.anneal);
  EXPECT_DOUBLE_EQ(c.lambda.decay, 0.9);
  EXPECT_EQ(c.optimizer, OptimizerKind::sgd);
  EXPECT_DOUBLE_EQ(c.sgd.lr, 0.05);
  EXPECT_EQ(c.batch_size, 4u);
  EXPECT_EQ(c.seed, 99u);
  EXPECT_EQ(c.split_train, 30u);
  EXPECT_EQ(c.dataset, "/tmp/x");
  EXPECT_EQ(c.model_config(3).embedding_dim, 16u);
  EXPECT_EQ(c.model_config(3).activation, ActivationKind::relu);
  EXPECT_EQ(c.model_config(3).input.t, 8u);
}

TEST(TrainConfig, RejectsUnknownKeysWithLine) {
  const std::string msg = error_of([] { TrainConfig::from_text("epochs = 2\n\nlearning_rate = 1\n"); });
  EXPECT_NE(msg.find("learning_rate"), std::string::npos);
  EXPECT_NE(msg.find("line 3"), std::string::npos);
}

TEST(TrainConfig, RejectsInvalidValues) {
  for (const char* text : {"epochs = 0", "batch_size = 0", "margin = 7", "loss = hinge",
                           "adamax_lr = -1", "split_ratio = 1.5", "split_train = 10",
                           "model = resnet-9000", "flip_prob = 2", "epochs = abc",
                           "epochs = -3", "anneal = maybe", "activation = tanh"}) {
    EXPECT_THROW(TrainConfig::from_text(text), ConfigError) << text;
  }
}

TEST(TrainConfig, TextRoundTrip) {
  TrainConfig c;
  c.seed = 12345;
  c.adamax.lr = 0.1 + 0.2;  // not representable in short decimal
  c.lambda.decay = 0.97;
  c.split_train = 415;
  c.split_val = 260;
  c.dataset = "/data/videos";
  c.widen = 2;
  const TrainConfig back = TrainConfig::from_text(c.to_text());
  EXPECT_EQ(back.to_text(), c.to_text());
  EXPECT_EQ(back.adamax.lr, c.adamax.lr);
  EXPECT_EQ(back.split_train, 415u);
  EXPECT_EQ(config_hash(back), config_hash(c));
}

TEST(TrainConfig, LoadFromFile) {
  const auto path = std::filesystem::temp_directory_path() / "sf3cnn_cfg_test.cfg";
  {
    std::ofstream os(path);
    os << "epochs = 4\nseed = 2\n";
  }
  const TrainConfig c = TrainConfig::load(path);
  EXPECT_EQ(c.epochs, 4u);
  std::filesystem::remove(path);
  EXPECT_THROW(TrainConfig::load(path), IoError);
}

// FNV-1a 64 written out independently.
std::string fnv1a(const std::string& s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) h = (h ^ c) * 1099511628211ULL;
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

TEST(ConfigHash, ArchitectureFieldsOnly) {
  const TrainConfig base;
  EXPECT_EQ(config_hash(base),
            fnv1a("model=desk-resnet10-basic\nloss=asoftmax\nmargin=4\nclip_len=16\nout_size=112\n"));
  TrainConfig t = base;
  t.seed = 9;
  t.epochs = 3;
  t.adamax.lr = 0.01;
  t.batch_size = 2;
  t.dataset = "/elsewhere";
  t.lambda.decay = 0.5;
  EXPECT_EQ(config_hash(t), config_hash(base));
  for (auto mutate : std::vector<std::function<void(TrainConfig&)>>{
           [](TrainConfig& c) { c.margin = 2; },
           [](TrainConfig& c) { c.model = "desk-resnet18-basic"; },
           [](TrainConfig& c) { c.loss = HeadKind::cross_entropy; },
           [](TrainConfig& c) { c.activation = ActivationKind::relu; },
           [](TrainConfig& c) { c.embedding_dim = 32; },
           [](TrainConfig& c) { c.out_size = 64; }}) {
    TrainConfig m = base;
    mutate(m);
    EXPECT_NE(config_hash(m), config_hash(base));
  }
}

TEST(DataGenConfig, KeysAndErrors) {
  const DataGenConfig d = DataGenConfig::from_key_values(parse_key_values(
      "classes = 3\nvideos_per_class = 4\nframes = 5\nheight = 6\nwidth = 7\nnoise_std = 0.1\nseed = 8\n"));
  EXPECT_EQ(d.spec.num_classes, 3u);
  EXPECT_EQ(d.spec.videos_per_class, 4u);
  EXPECT_EQ(d.spec.frames_per_video, 5u);
  EXPECT_EQ(d.spec.height, 6u);
  EXPECT_EQ(d.spec.width, 7u);
  EXPECT_DOUBLE_EQ(d.spec.noise_std, 0.1);
  EXPECT_EQ(d.seed, 8u);
  const std::string msg = error_of([] { DataGenConfig::from_key_values(parse_key_values("classes = 3\ncolour = red\n")); });
  EXPECT_NE(msg.find("line 2"), std::string::npos);
  EXPECT_THROW(DataGenConfig::from_key_values(parse_key_values("classes = 1\n")), ConfigError);
}

}  // namespace
}  // namespace sf3cnn
