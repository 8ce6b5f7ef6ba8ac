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

#include "sf3cnn/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "sf3cnn/error.hpp"
#include "sf3cnn/sten.hpp"

namespace sf3cnn {

namespace fs = std::filesystem;

namespace {

// Activations are large, short-lived buffers; keeping them on the heap
// instead of fresh mmap()s avoids page-fault churn on every step.
void tune_allocator() {
#if defined(__GLIBC__)
  static const bool once = [] {
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
    return true;
  }();
  (void)once;
#endif
}

void shuffle_ids(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.index(i)]);
}

std::size_t count_classes(const std::vector<Video>& videos) {
  std::size_t c = 0;
  for (const Video& v : videos) c = std::max(c, v.label + 1);
  return c;
}

std::vector<std::size_t> labels_of(const std::vector<Video>& videos) {
  std::vector<std::size_t> labels;
  labels.reserve(videos.size());
  for (const Video& v : videos) labels.push_back(v.label);
  return labels;
}

// Stacks 3 x T x S x S clips into B x 3 x T x S x S.
Tensor stack_clips(const std::vector<Tensor>& clips) {
  Shape dims = clips.front().dims();
  dims.insert(dims.begin(), clips.size());
  Tensor out(dims);
  const std::size_t n = clips.front().size();
  for (std::size_t i = 0; i < clips.size(); ++i) {
    std::copy_n(clips[i].data(), n, out.data() + i * n);
  }
  return out;
}

double parse_double_field(const std::string& s, const fs::path& file) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) {
    throw IoError(file.string() + ": bad metrics value '" + s + "'");
  }
  return v;
}

void write_metrics(const fs::path& file, const std::vector<MetricsRow>& rows) {
  std::ofstream os(file, std::ios::trunc);
  if (!os) throw IoError("cannot write " + file.string());
  os << kMetricsHeader << "\n";
  for (const MetricsRow& r : rows) os << format_metrics_row(r) << "\n";
  if (!os) throw IoError("failed writing " + file.string());
}

void append_metrics(const fs::path& file, const MetricsRow& row) {
  std::ofstream os(file, std::ios::app);
  if (!os) throw IoError("cannot append to " + file.string());
  os << format_metrics_row(row) << "\n";
  os.flush();
  if (!os) throw IoError("failed writing " + file.string());
}

}  // namespace

std::string format_metrics_row(const MetricsRow& r) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), "%zu,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g", r.epoch,
                r.train_loss, r.val_loss, r.val_loss_avg, r.val_acc, r.intra_mean, r.inter_min,
                r.wall_time_s);
  return buf;
}

std::vector<MetricsRow> read_metrics(const fs::path& csv) {
  std::ifstream is(csv);
  if (!is) throw IoError("cannot open " + csv.string());
  std::string line;
  if (!std::getline(is, line) || line != kMetricsHeader) {
    throw IoError(csv.string() + ": unexpected metrics header");
  }
  std::vector<MetricsRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::string item;
    std::istringstream ls(line);
    while (std::getline(ls, item, ',')) f.push_back(item);
    if (f.size() != 8) throw IoError(csv.string() + ": metrics row needs 8 fields");
    MetricsRow r;
    r.epoch = static_cast<std::size_t>(parse_double_field(f[0], csv));
    r.train_loss = parse_double_field(f[1], csv);
    r.val_loss = parse_double_field(f[2], csv);
    r.val_loss_avg = parse_double_field(f[3], csv);
    r.val_acc = parse_double_field(f[4], csv);
    r.intra_mean = parse_double_field(f[5], csv);
    r.inter_min = parse_double_field(f[6], csv);
    r.wall_time_s = parse_double_field(f[7], csv);
    rows.push_back(r);
  }
  return rows;
}

std::vector<double> trailing_mean(const std::vector<double>& xs, std::size_t window) {
  if (window == 0) throw DomainError("running-average window must be >= 1");
  std::vector<double> out(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const std::size_t lo = i + 1 >= window ? i + 1 - window : 0;
    double s = 0.0;
    for (std::size_t j = lo; j <= i; ++j) s += xs[j];
    out[i] = s / static_cast<double>(i - lo + 1);
  }
  return out;
}

Rng stream_rng(std::uint64_t seed, Stream stream) {
  return Rng::derive(seed, {static_cast<std::uint64_t>(stream)});
}

Rng augment_rng(std::uint64_t seed, std::size_t epoch, std::size_t video_id) {
  return Rng::derive(seed, {static_cast<std::uint64_t>(Stream::augment), epoch, video_id});
}

EvalSettings eval_settings(const TrainConfig& cfg) {
  EvalSettings s;
  s.batch_size = cfg.batch_size;
  s.eval_clips = cfg.eval_clips;
  s.loss = cfg.loss_config();
  s.loss.anneal_lambda = 0.0;
  return s;
}

EvalResult evaluate_model(Model<float>& model, const std::vector<Video>& videos,
                          const std::vector<std::size_t>& ids, const AugmentPolicy& policy,
                          const EvalSettings& settings) {
  if (ids.empty()) throw InputError("cannot evaluate an empty split");
  if (settings.batch_size == 0) throw ConfigError("eval batch size must be >= 1");
  AngularLossConfig loss = settings.loss;
  loss.anneal_lambda = 0.0;
  const std::size_t n = ids.size();
  const std::size_t d = model.config().embedding_dim;
  const std::size_t c = model.config().num_classes;

  EvalResult res;
  res.count = n;
  res.embeddings = Tensor({n, d});
  res.labels.resize(n);
  res.predictions.resize(n);
  double loss_sum = 0.0;
  for (std::size_t b0 = 0; b0 < n; b0 += settings.batch_size) {
    const std::size_t bs = std::min(settings.batch_size, n - b0);
    std::vector<Tensor> clips;
    std::vector<std::size_t> labels;
    for (std::size_t i = b0; i < b0 + bs; ++i) {
      const Video& v = videos.at(ids[i]);
      clips.push_back(
          eval_clip_at(v, policy, eval_clip_starts(v.num_frames(), policy.clip_len, 1)[0]));
      labels.push_back(v.label);
    }
    Tape<float> tape;
    const Var x = tape.leaf(stack_clips(clips));
    const Var e = model.embed(tape, x, Mode::eval);
    const HeadLoss<float> hl = model.head_loss(tape, e, labels, loss);
    loss_sum += hl.value * static_cast<double>(bs);
    const Tensor& emb = tape.value(e);
    std::copy_n(emb.data(), bs * d, res.embeddings.data() + b0 * d);
    const std::vector<std::size_t> pred = model.predict(emb);
    for (std::size_t i = 0; i < bs; ++i) {
      res.labels[b0 + i] = labels[i];
      res.predictions[b0 + i] = pred[i];
    }

    if (settings.eval_clips > 1) {
      std::vector<std::vector<std::size_t>> votes(bs, std::vector<std::size_t>(c, 0));
      for (std::size_t k = 0; k < settings.eval_clips; ++k) {
        std::vector<Tensor> kc;
        for (std::size_t i = b0; i < b0 + bs; ++i) {
          const Video& v = videos.at(ids[i]);
          kc.push_back(eval_clip_at(
              v, policy, eval_clip_starts(v.num_frames(), policy.clip_len, settings.eval_clips)[k]));
        }
        const std::vector<std::size_t> p = model.predict(model.embed_eval(stack_clips(kc)));
        for (std::size_t i = 0; i < bs; ++i) ++votes[i][p[i]];
      }
      for (std::size_t i = 0; i < bs; ++i) {
        res.predictions[b0 + i] = static_cast<std::size_t>(
            std::max_element(votes[i].begin(), votes[i].end()) - votes[i].begin());
      }
    }
  }
  if (!std::isfinite(loss_sum)) throw NumericError("non-finite evaluation loss");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) correct += res.predictions[i] == res.labels[i];
  res.accuracy = static_cast<double>(correct) / static_cast<double>(n);
  res.loss = loss_sum / static_cast<double>(n);
  res.stats = angle_stats(FeatureBatch<float>{res.embeddings, res.labels},
                          ClassifierWeights<float>{model.class_directions()});
  return res;
}

TrainResult train(const TrainConfig& cfg, const TrainOptions& opts) {
  cfg.validate();
  tune_allocator();
  if (cfg.dataset.empty()) throw ConfigError("dataset path is not set");
  if (opts.out_dir.empty()) throw ConfigError("output directory is not set");
  const auto t_start = std::chrono::steady_clock::now();

  const std::vector<Video> videos = load_dataset(cfg.dataset);
  const std::size_t num_classes = count_classes(videos);
  const std::vector<std::size_t> labels = labels_of(videos);
  const DatasetSplit split = split_dataset(labels, cfg.split_options());

  std::error_code ec;
  fs::create_directories(opts.out_dir, ec);
  if (ec) throw IoError("cannot create " + opts.out_dir.string() + ": " + ec.message());
  const fs::path ckpt_dir = opts.out_dir / "checkpoint";
  const fs::path metrics_file = opts.out_dir / "metrics.csv";

  std::unique_ptr<Model<float>> model;
  OptimizerSlots optim;
  CheckpointMeta meta;
  Rng shuffle_rng;
  std::vector<MetricsRow> rows;
  if (opts.resume) {
    LoadedCheckpoint ck = load_checkpoint(ckpt_dir);
    check_compatible(ck, cfg);
    if (ck.meta.num_classes != num_classes) {
      throw CompatibilityError("checkpoint has " + std::to_string(ck.meta.num_classes) +
                               " classes, dataset has " + std::to_string(num_classes));
    }
    model = std::move(ck.model);
    optim = std::move(ck.optim);
    meta = std::move(ck.meta);
    shuffle_rng = Rng::restore(meta.shuffle_rng);
    rows = read_metrics(metrics_file);
    rows.erase(std::remove_if(rows.begin(), rows.end(),
                              [&](const MetricsRow& r) { return r.epoch > meta.epoch; }),
               rows.end());
    if (rows.size() != meta.epoch) {
      throw IoError(metrics_file.string() + " does not cover the checkpointed epochs");
    }
    write_metrics(metrics_file, rows);
  } else {
    model = build_model<float>(cfg.model_config(num_classes));
    Rng init = stream_rng(cfg.seed, Stream::init);
    model->init(init);
    shuffle_rng = stream_rng(cfg.seed, Stream::shuffle);
    meta.config_hash = config_hash(cfg);
    meta.num_classes = num_classes;
    meta.channel_means = compute_channel_means(videos, split.train);
    write_metrics(metrics_file, rows);
  }
  optim.adamax.config = cfg.adamax;
  optim.sgd.config = cfg.sgd;
  const AugmentPolicy policy = cfg.augment_policy(meta.channel_means);
  const EvalSettings eval = eval_settings(cfg);

  std::size_t last = cfg.epochs;
  if (opts.stop_after_epoch) last = std::min(last, *opts.stop_after_epoch);
  ParamList<float>& params = model->parameters();
  for (std::size_t epoch = meta.epoch + 1; epoch <= last; ++epoch) {
    std::vector<std::size_t> order = split.train;
    shuffle_ids(order, shuffle_rng);
    double loss_sum = 0.0;
    for (std::size_t b0 = 0, bs = 0; b0 < order.size(); b0 += bs) {
      bs = std::min(cfg.batch_size, order.size() - b0);
      // A trailing single clip joins this batch; train-mode batch norm
      // cannot normalize one sample whose deep feature maps are 1x1x1.
      if (order.size() - b0 - bs == 1) ++bs;
      std::vector<Tensor> clips;
      std::vector<std::size_t> batch_labels;
      for (std::size_t i = b0; i < b0 + bs; ++i) {
        Rng rng = augment_rng(cfg.seed, epoch, order[i]);
        clips.push_back(augment_clip(videos[order[i]], policy, rng, Mode::train));
        batch_labels.push_back(videos[order[i]].label);
      }
      AngularLossConfig lc = cfg.loss_config();
      lc.anneal_lambda = cfg.anneal ? cfg.lambda.at(meta.iteration) : 0.0;

      Tape<float> tape;
      const Var x = tape.leaf(stack_clips(clips));
      const Var e = model->embed(tape, x, Mode::train);
      const HeadLoss<float> hl = model->head_loss(tape, e, batch_labels, lc);
      if (!std::isfinite(hl.value)) {
        throw NumericError("non-finite training loss at epoch " + std::to_string(epoch) +
                           ", iteration " + std::to_string(meta.iteration) +
                           "; last good checkpoint kept in " + ckpt_dir.string());
      }
      params.zero_grad();
      tape.backward(hl.loss, Tensor({1}, 1.0f));
      if (cfg.optimizer == OptimizerKind::adamax) {
        adamax_step<float>(params.params, optim.adamax);
      } else {
        sgd_step<float>(params.params, optim.sgd);
      }
      loss_sum += hl.value * static_cast<double>(bs);
      ++meta.iteration;
    }

    const EvalResult ev = evaluate_model(*model, videos, split.val, policy, eval);
    meta.val_losses.push_back(ev.loss);
    MetricsRow row;
    row.epoch = epoch;
    row.train_loss = loss_sum / static_cast<double>(order.size());
    row.val_loss = ev.loss;
    row.val_loss_avg = trailing_mean(meta.val_losses, cfg.metrics_window).back();
    row.val_acc = ev.accuracy;
    row.intra_mean = ev.stats.intra_mean;
    row.inter_min = ev.stats.inter_min.value_or(0.0);
    if (cfg.log_wall_time) {
      row.wall_time_s =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    }
    append_metrics(metrics_file, row);
    rows.push_back(row);

    meta.epoch = epoch;
    meta.shuffle_rng = shuffle_rng.save();
    save_checkpoint(ckpt_dir, cfg, meta, *model, optim);
    if (opts.on_epoch) opts.on_epoch(row);
  }
  return {rows, ckpt_dir};
}

SplitSelector parse_split_selector(const std::string& name) {
  if (name == "train") return SplitSelector::train;
  if (name == "val") return SplitSelector::val;
  if (name == "all") return SplitSelector::all;
  throw ConfigError("unknown split '" + name + "' (expected train, val or all)");
}

std::vector<std::size_t> select_split(const TrainConfig& cfg, const std::vector<Video>& videos,
                                      SplitSelector which) {
  if (which == SplitSelector::all) {
    std::vector<std::size_t> ids(videos.size());
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
    return ids;
  }
  const DatasetSplit split = split_dataset(labels_of(videos), cfg.split_options());
  return which == SplitSelector::train ? split.train : split.val;
}

EvalResult evaluate_checkpoint(const fs::path& checkpoint, const fs::path& dataset,
                               SplitSelector which, const std::optional<TrainConfig>& expected) {
  tune_allocator();
  LoadedCheckpoint ck = load_checkpoint(checkpoint);
  if (expected) check_compatible(ck, *expected);
  const std::vector<Video> videos = load_dataset(dataset.empty() ? ck.config.dataset : dataset);
  if (count_classes(videos) != ck.meta.num_classes) {
    throw CompatibilityError("dataset has " + std::to_string(count_classes(videos)) +
                             " classes, checkpoint expects " +
                             std::to_string(ck.meta.num_classes));
  }
  const std::vector<std::size_t> ids = select_split(ck.config, videos, which);
  return evaluate_model(*ck.model, videos, ids, ck.config.augment_policy(ck.meta.channel_means),
                        eval_settings(ck.config));
}

std::string format_angle_stats(const AngleStats& s) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "intra_mean = %.10g\nintra_max = %.10g\ninter_min = %.10g\ninter_mean = %.10g\n",
                s.intra_mean, s.intra_max, s.inter_min.value_or(0.0), s.inter_mean.value_or(0.0));
  return buf;
}

EvalResult extract_embeddings(const fs::path& checkpoint, const fs::path& dataset,
                              SplitSelector which, const fs::path& out_dir) {
  EvalResult res = evaluate_checkpoint(checkpoint, dataset, which);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  sten::write(out_dir / "embeddings.sten", res.embeddings);
  Tensor labels({res.labels.size()});
  for (std::size_t i = 0; i < res.labels.size(); ++i) labels[i] = static_cast<float>(res.labels[i]);
  sten::write(out_dir / "labels.sten", labels);
  std::ofstream os(out_dir / "angle_stats.txt", std::ios::trunc);
  if (!os) throw IoError("cannot write " + (out_dir / "angle_stats.txt").string());
  os << format_angle_stats(res.stats) << "count = " << res.count << "\n"
     << "accuracy = " << res.accuracy << "\n";
  return res;
}

}  // namespace sf3cnn
