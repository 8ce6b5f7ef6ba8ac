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

#include "sf3cnn/checkpoint.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "sf3cnn/error.hpp"
#include "sf3cnn/sten.hpp"

namespace sf3cnn {

namespace fs = std::filesystem;

namespace {

constexpr const char* kFormat = "sf3cnn-checkpoint-1";

std::string hex(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%a", v);
  return buf;
}

double parse_hex(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) throw IoError("bad number '" + s + "' in manifest");
  return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  if (s.empty()) return out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, sep)) out.push_back(item);
  return out;
}

std::uint64_t parse_u64(const KeyValues& kv, const std::string& key) {
  const auto it = kv.values.find(key);
  if (it == kv.values.end()) throw IoError("manifest lacks '" + key + "'");
  try {
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument(key);
    return v;
  } catch (const std::logic_error&) {
    throw IoError("manifest '" + key + "' is not an integer");
  }
}

const std::string& field(const KeyValues& kv, const std::string& key) {
  const auto it = kv.values.find(key);
  if (it == kv.values.end()) throw IoError("manifest lacks '" + key + "'");
  return it->second;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  os << text;
  if (!os) throw IoError("failed writing " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void load_into(const fs::path& file, Tensor& dst, const std::string& name) {
  Tensor t = sten::read(file);
  if (t.dims() != dst.dims()) {
    throw CompatibilityError("checkpoint tensor " + name + " has shape " +
                             shape_string(t.dims()) + ", model expects " +
                             shape_string(dst.dims()));
  }
  dst = std::move(t);
}

}  // namespace

void save_checkpoint(const fs::path& dir, const TrainConfig& cfg, const CheckpointMeta& meta,
                     Model<float>& model, const OptimizerSlots& optim) {
  fs::path tmp = dir;
  tmp += ".tmp";
  std::error_code ec;
  fs::remove_all(tmp, ec);
  for (const char* sub : {"params", "buffers", "optim"}) {
    fs::create_directories(tmp / sub, ec);
    if (ec) throw IoError("cannot create " + (tmp / sub).string() + ": " + ec.message());
  }

  ParamList<float>& pl = model.parameters();
  for (const auto& p : pl.params) sten::write(tmp / "params" / (p.name + ".sten"), *p.value);
  for (const auto& b : pl.buffers) sten::write(tmp / "buffers" / (b.name + ".sten"), *b.value);
  const auto save_slots = [&](const char* slot, const std::vector<Tensor>& values) {
    for (std::size_t i = 0; i < values.size(); ++i) {
      sten::write(tmp / "optim" / (std::string(slot) + "." + pl.params[i].name + ".sten"),
                  values[i]);
    }
  };
  save_slots("m", optim.adamax.m);
  save_slots("u", optim.adamax.u);
  save_slots("velocity", optim.sgd.velocity);

  std::string vl;
  for (std::size_t i = 0; i < meta.val_losses.size(); ++i) {
    vl += (i ? "," : "") + hex(meta.val_losses[i]);
  }
  std::ostringstream m;
  m << "format = " << kFormat << "\n"
    << "config_hash = " << meta.config_hash << "\n"
    << "num_classes = " << meta.num_classes << "\n"
    << "epoch = " << meta.epoch << "\n"
    << "iteration = " << meta.iteration << "\n"
    << "adamax_t = " << optim.adamax.t << "\n"
    << "adamax_slots = " << optim.adamax.m.size() << "\n"
    << "sgd_t = " << optim.sgd.t << "\n"
    << "sgd_slots = " << optim.sgd.velocity.size() << "\n"
    << "channel_means = " << hex(meta.channel_means[0]) << "," << hex(meta.channel_means[1])
    << "," << hex(meta.channel_means[2]) << "\n"
    << "val_losses = " << vl << "\n"
    << "shuffle_rng = " << meta.shuffle_rng << "\n";
  write_text(tmp / "manifest.txt", m.str());
  write_text(tmp / "config.txt", cfg.to_text());

  fs::remove_all(dir, ec);
  fs::rename(tmp, dir, ec);
  if (ec) throw IoError("cannot move checkpoint into " + dir.string() + ": " + ec.message());
}

LoadedCheckpoint load_checkpoint(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("checkpoint " + dir.string() + " not found");
  const KeyValues kv = parse_key_values(read_text(dir / "manifest.txt"),
                                        (dir / "manifest.txt").string());
  if (field(kv, "format") != kFormat) {
    throw CompatibilityError("unsupported checkpoint format '" + field(kv, "format") + "'");
  }
  LoadedCheckpoint ck;
  ck.config = TrainConfig::from_text(read_text(dir / "config.txt"));
  CheckpointMeta& meta = ck.meta;
  meta.config_hash = field(kv, "config_hash");
  if (meta.config_hash != config_hash(ck.config)) {
    throw CompatibilityError("checkpoint config.txt does not match its recorded hash");
  }
  meta.num_classes = parse_u64(kv, "num_classes");
  meta.epoch = parse_u64(kv, "epoch");
  meta.iteration = parse_u64(kv, "iteration");
  meta.shuffle_rng = field(kv, "shuffle_rng");
  const auto means = split(field(kv, "channel_means"), ',');
  if (means.size() != 3) throw IoError("manifest channel_means needs 3 values");
  for (std::size_t c = 0; c < 3; ++c) meta.channel_means[c] = static_cast<float>(parse_hex(means[c]));
  for (const auto& v : split(field(kv, "val_losses"), ',')) meta.val_losses.push_back(parse_hex(v));

  ck.model = build_model<float>(ck.config.model_config(meta.num_classes));
  ParamList<float>& pl = ck.model->parameters();
  for (auto& p : pl.params) load_into(dir / "params" / (p.name + ".sten"), *p.value, p.name);
  for (auto& b : pl.buffers) load_into(dir / "buffers" / (b.name + ".sten"), *b.value, b.name);

  const auto load_slots = [&](const char* slot, std::size_t count, std::vector<Tensor>& out) {
    if (count != 0 && count != pl.params.size()) {
      throw CompatibilityError(std::string("checkpoint has ") + std::to_string(count) + " " +
                               slot + " slots for " + std::to_string(pl.params.size()) +
                               " parameters");
    }
    out.clear();
    for (std::size_t i = 0; i < count; ++i) {
      out.emplace_back(pl.params[i].value->dims());
      load_into(dir / "optim" / (std::string(slot) + "." + pl.params[i].name + ".sten"), out.back(),
                pl.params[i].name);
    }
  };
  ck.optim.adamax.config = ck.config.adamax;
  ck.optim.adamax.t = parse_u64(kv, "adamax_t");
  load_slots("m", parse_u64(kv, "adamax_slots"), ck.optim.adamax.m);
  load_slots("u", parse_u64(kv, "adamax_slots"), ck.optim.adamax.u);
  ck.optim.sgd.config = ck.config.sgd;
  ck.optim.sgd.t = parse_u64(kv, "sgd_t");
  load_slots("velocity", parse_u64(kv, "sgd_slots"), ck.optim.sgd.velocity);
  return ck;
}

void check_compatible(const LoadedCheckpoint& ckpt, const TrainConfig& expected) {
  const std::string h = config_hash(expected);
  if (h != ckpt.meta.config_hash) {
    throw CompatibilityError("config hash " + h + " does not match checkpoint hash " +
                             ckpt.meta.config_hash);
  }
}

}  // namespace sf3cnn
