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

#include "sf3cnn/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

#include "sf3cnn/error.hpp"

namespace sf3cnn {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

std::size_t parse_size(const std::string& key, const std::string& v) {
  return static_cast<std::size_t>(parse_u64(key, v));
}

double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

// Shortest text that parses back to the same double.
std::string fmt(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, p);
}

std::string fmt(std::uint64_t v) { return std::to_string(v); }
std::string fmt(bool v) { return v ? "true" : "false"; }

struct Field {
  const char* key;
  bool architecture;  // part of config_hash
  std::function<void(TrainConfig&, const std::string&)> set;
  std::function<std::optional<std::string>(const TrainConfig&)> get;
};

OptimizerKind parse_optimizer(const std::string& v) {
  if (v == "adamax") return OptimizerKind::adamax;
  if (v == "sgd") return OptimizerKind::sgd;
  throw ConfigError("optimizer: expected adamax or sgd, got '" + v + "'");
}

// Canonical key order; to_text() and config_hash() follow it.
const std::vector<Field>& fields() {
  using C = TrainConfig;
  using S = std::optional<std::string>;
  static const std::vector<Field> table = {
      {"model", true, [](C& c, const std::string& v) { c.model = v; },
       [](const C& c) -> S { return c.model; }},
      {"activation", true,
       [](C& c, const std::string& v) { c.activation = parse_activation(v); },
       [](const C& c) -> S {
         return c.activation ? S(to_string(*c.activation)) : std::nullopt;
       }},
      {"base_width", true,
       [](C& c, const std::string& v) { c.base_width = parse_size("base_width", v); },
       [](const C& c) -> S { return c.base_width ? S(fmt(*c.base_width)) : std::nullopt; }},
      {"widen", true, [](C& c, const std::string& v) { c.widen = parse_size("widen", v); },
       [](const C& c) -> S { return c.widen ? S(fmt(*c.widen)) : std::nullopt; }},
      {"embedding_dim", true,
       [](C& c, const std::string& v) { c.embedding_dim = parse_size("embedding_dim", v); },
       [](const C& c) -> S {
         return c.embedding_dim ? S(fmt(*c.embedding_dim)) : std::nullopt;
       }},
      {"loss", true, [](C& c, const std::string& v) { c.loss = parse_head_kind(v); },
       [](const C& c) -> S { return to_string(c.loss); }},
      {"margin", true,
       [](C& c, const std::string& v) {
         c.margin = static_cast<int>(parse_u64("margin", v));
       },
       [](const C& c) -> S { return std::to_string(c.margin); }},
      {"anneal", false, [](C& c, const std::string& v) { c.anneal = parse_bool("anneal", v); },
       [](const C& c) -> S { return fmt(c.anneal); }},
      {"lambda_initial", false,
       [](C& c, const std::string& v) { c.lambda.initial = parse_double("lambda_initial", v); },
       [](const C& c) -> S { return fmt(c.lambda.initial); }},
      {"lambda_floor", false,
       [](C& c, const std::string& v) { c.lambda.floor = parse_double("lambda_floor", v); },
       [](const C& c) -> S { return fmt(c.lambda.floor); }},
      {"lambda_decay", false,
       [](C& c, const std::string& v) { c.lambda.decay = parse_double("lambda_decay", v); },
       [](const C& c) -> S { return fmt(c.lambda.decay); }},
      {"optimizer", false, [](C& c, const std::string& v) { c.optimizer = parse_optimizer(v); },
       [](const C& c) -> S { return to_string(c.optimizer); }},
      {"adamax_lr", false,
       [](C& c, const std::string& v) { c.adamax.lr = parse_double("adamax_lr", v); },
       [](const C& c) -> S { return fmt(c.adamax.lr); }},
      {"adamax_beta1", false,
       [](C& c, const std::string& v) { c.adamax.beta1 = parse_double("adamax_beta1", v); },
       [](const C& c) -> S { return fmt(c.adamax.beta1); }},
      {"adamax_beta2", false,
       [](C& c, const std::string& v) { c.adamax.beta2 = parse_double("adamax_beta2", v); },
       [](const C& c) -> S { return fmt(c.adamax.beta2); }},
      {"adamax_eps", false,
       [](C& c, const std::string& v) { c.adamax.eps = parse_double("adamax_eps", v); },
       [](const C& c) -> S { return fmt(c.adamax.eps); }},
      {"adamax_weight_decay", false,
       [](C& c, const std::string& v) {
         c.adamax.weight_decay = parse_double("adamax_weight_decay", v);
       },
       [](const C& c) -> S { return fmt(c.adamax.weight_decay); }},
      {"sgd_lr", false, [](C& c, const std::string& v) { c.sgd.lr = parse_double("sgd_lr", v); },
       [](const C& c) -> S { return fmt(c.sgd.lr); }},
      {"sgd_momentum", false,
       [](C& c, const std::string& v) { c.sgd.momentum = parse_double("sgd_momentum", v); },
       [](const C& c) -> S { return fmt(c.sgd.momentum); }},
      {"sgd_weight_decay", false,
       [](C& c, const std::string& v) {
         c.sgd.weight_decay = parse_double("sgd_weight_decay", v);
       },
       [](const C& c) -> S { return fmt(c.sgd.weight_decay); }},
      {"batch_size", false,
       [](C& c, const std::string& v) { c.batch_size = parse_size("batch_size", v); },
       [](const C& c) -> S { return fmt(c.batch_size); }},
      {"epochs", false, [](C& c, const std::string& v) { c.epochs = parse_size("epochs", v); },
       [](const C& c) -> S { return fmt(c.epochs); }},
      {"seed", false, [](C& c, const std::string& v) { c.seed = parse_u64("seed", v); },
       [](const C& c) -> S { return fmt(c.seed); }},
      {"metrics_window", false,
       [](C& c, const std::string& v) { c.metrics_window = parse_size("metrics_window", v); },
       [](const C& c) -> S { return fmt(c.metrics_window); }},
      {"eval_clips", false,
       [](C& c, const std::string& v) { c.eval_clips = parse_size("eval_clips", v); },
       [](const C& c) -> S { return fmt(c.eval_clips); }},
      {"log_wall_time", false,
       [](C& c, const std::string& v) { c.log_wall_time = parse_bool("log_wall_time", v); },
       [](const C& c) -> S { return fmt(c.log_wall_time); }},
      {"dataset", false, [](C& c, const std::string& v) { c.dataset = v; },
       [](const C& c) -> S { return c.dataset.string(); }},
      {"split_ratio", false,
       [](C& c, const std::string& v) { c.split_ratio = parse_double("split_ratio", v); },
       [](const C& c) -> S { return fmt(c.split_ratio); }},
      {"split_train", false,
       [](C& c, const std::string& v) { c.split_train = parse_size("split_train", v); },
       [](const C& c) -> S { return c.split_train ? S(fmt(*c.split_train)) : std::nullopt; }},
      {"split_val", false,
       [](C& c, const std::string& v) { c.split_val = parse_size("split_val", v); },
       [](const C& c) -> S { return c.split_val ? S(fmt(*c.split_val)) : std::nullopt; }},
      {"split_stratified", false,
       [](C& c, const std::string& v) {
         c.split_stratified = parse_bool("split_stratified", v);
       },
       [](const C& c) -> S { return fmt(c.split_stratified); }},
      {"clip_len", true,
       [](C& c, const std::string& v) { c.clip_len = parse_size("clip_len", v); },
       [](const C& c) -> S { return fmt(c.clip_len); }},
      {"out_size", true,
       [](C& c, const std::string& v) { c.out_size = parse_size("out_size", v); },
       [](const C& c) -> S { return fmt(c.out_size); }},
      {"flip_prob", false,
       [](C& c, const std::string& v) { c.flip_prob = parse_double("flip_prob", v); },
       [](const C& c) -> S { return fmt(c.flip_prob); }},
  };
  return table;
}

}  // namespace

KeyValues parse_key_values(const std::string& text, const std::string& origin) {
  KeyValues kv;
  std::istringstream is(text);
  std::string line;
  std::size_t n = 0;
  while (std::getline(is, line)) {
    ++n;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(n) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(origin + ":" + std::to_string(n) + ": empty key");
    if (kv.values.count(key)) {
      throw ConfigError(origin + ":" + std::to_string(n) + ": duplicate key '" + key +
                        "' (first on line " + std::to_string(kv.lines[key]) + ")");
    }
    kv.values[key] = value;
    kv.lines[key] = n;
  }
  return kv;
}

KeyValues read_key_values(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_key_values(ss.str(), path.string());
}

const char* to_string(OptimizerKind kind) {
  return kind == OptimizerKind::adamax ? "adamax" : "sgd";
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (epochs == 0) throw ConfigError("epochs must be >= 1");
  if (metrics_window == 0) throw ConfigError("metrics_window must be >= 1");
  if (eval_clips == 0) throw ConfigError("eval_clips must be >= 1");
  if (optimizer == OptimizerKind::adamax) adamax.validate();
  if (optimizer == OptimizerKind::sgd) sgd.validate();
  loss_config().validate();
  split_options().validate();
  augment_policy({0.0f, 0.0f, 0.0f}).validate();
  model_config(2).validate();
}

ModelConfig TrainConfig::model_config(std::size_t num_classes) const {
  ModelConfig m = model_preset(model, num_classes);
  if (activation) m.activation = *activation;
  if (base_width) m.base_width = *base_width;
  if (widen) m.widen = *widen;
  if (embedding_dim) m.embedding_dim = *embedding_dim;
  m.head = loss;
  m.input = {clip_len, out_size, out_size};
  return m;
}

AngularLossConfig TrainConfig::loss_config() const {
  AngularLossConfig c;
  c.margin = margin;
  c.schedule = lambda;
  c.anneal_lambda = anneal ? lambda.initial : 0.0;
  return c;
}

SplitOptions TrainConfig::split_options() const {
  SplitOptions o;
  o.ratio = split_ratio;
  o.seed = seed;
  o.train_count = split_train;
  o.val_count = split_val;
  o.stratified = split_stratified;
  return o;
}

AugmentPolicy TrainConfig::augment_policy(const std::array<float, 3>& channel_means) const {
  AugmentPolicy p;
  p.clip_len = clip_len;
  p.out_size = out_size;
  p.flip_prob = flip_prob;
  p.channel_means = channel_means;
  return p;
}

std::string TrainConfig::to_text() const {
  std::string out;
  for (const Field& f : fields()) {
    if (auto v = f.get(*this)) out += std::string(f.key) + " = " + *v + "\n";
  }
  return out;
}

TrainConfig TrainConfig::from_key_values(const KeyValues& kv) {
  TrainConfig cfg;
  for (const auto& [key, value] : kv.values) {
    const Field* field = nullptr;
    for (const Field& f : fields()) {
      if (key == f.key) field = &f;
    }
    if (!field) {
      throw ConfigError("unknown config key '" + key + "' (line " +
                        std::to_string(kv.lines.at(key)) + ")");
    }
    field->set(cfg, value);
  }
  cfg.validate();
  return cfg;
}

TrainConfig TrainConfig::from_text(const std::string& text) {
  return from_key_values(parse_key_values(text));
}

TrainConfig TrainConfig::load(const std::filesystem::path& path) {
  return from_key_values(read_key_values(path));
}

DataGenConfig DataGenConfig::from_key_values(const KeyValues& kv) {
  DataGenConfig cfg;
  SyntheticSpec& s = cfg.spec;
  for (const auto& [key, value] : kv.values) {
    if (key == "classes") {
      s.num_classes = parse_size(key, value);
    } else if (key == "videos_per_class") {
      s.videos_per_class = parse_size(key, value);
    } else if (key == "frames") {
      s.frames_per_video = parse_size(key, value);
    } else if (key == "height") {
      s.height = parse_size(key, value);
    } else if (key == "width") {
      s.width = parse_size(key, value);
    } else if (key == "noise_std") {
      s.noise_std = parse_double(key, value);
    } else if (key == "seed") {
      cfg.seed = parse_u64(key, value);
    } else {
      throw ConfigError("unknown data key '" + key + "' (line " +
                        std::to_string(kv.lines.at(key)) + ")");
    }
  }
  s.validate();
  return cfg;
}

DataGenConfig DataGenConfig::load(const std::filesystem::path& path) {
  return from_key_values(read_key_values(path));
}

std::string config_hash(const TrainConfig& cfg) {
  std::string text;
  for (const Field& f : fields()) {
    if (!f.architecture) continue;
    if (auto v = f.get(cfg)) text += std::string(f.key) + "=" + *v + "\n";
  }
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace sf3cnn
