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

#include "sf3cnn/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>

#include "sf3cnn/error.hpp"
#include "sf3cnn/sten.hpp"

namespace sf3cnn {

namespace fs = std::filesystem;

namespace {

// Fisher-Yates with the portable index draw, so splits match across
// standard libraries.
void shuffle(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.index(i)]);
}

std::size_t round_count(double ratio, std::size_t n) {
  return static_cast<std::size_t>(std::lround(ratio * static_cast<double>(n)));
}

}  // namespace

void SplitOptions::validate() const {
  if (train_count.has_value() != val_count.has_value()) {
    throw ConfigError("train and val counts must be given together");
  }
  if (train_count && stratified) {
    throw ConfigError("explicit split counts cannot be combined with stratified splitting");
  }
  if (!train_count && !(ratio > 0.0 && ratio < 1.0)) {
    throw ConfigError("split ratio must be in (0, 1)");
  }
}

DatasetSplit split_dataset(std::span<const std::size_t> labels, const SplitOptions& opts) {
  opts.validate();
  const std::size_t n = labels.size();
  if (n == 0) throw InputError("cannot split an empty dataset");
  if (n < 2) throw InputError("need at least 2 ids to split");

  DatasetSplit split;
  split.ratio = opts.ratio;
  split.seed = opts.seed;
  if (opts.stratified) {
    std::map<std::size_t, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < n; ++i) by_class[labels[i]].push_back(i);
    for (auto& [label, ids] : by_class) {
      Rng rng = Rng::derive(opts.seed, {label});
      shuffle(ids, rng);
      const std::size_t k = round_count(opts.ratio, ids.size());
      split.train.insert(split.train.end(), ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k));
      split.val.insert(split.val.end(), ids.begin() + static_cast<std::ptrdiff_t>(k), ids.end());
    }
  } else {
    std::size_t k = round_count(opts.ratio, n);
    if (opts.train_count) {
      if (*opts.train_count + *opts.val_count != n) {
        throw ConfigError("split counts " + std::to_string(*opts.train_count) + " + " +
                          std::to_string(*opts.val_count) + " do not cover " +
                          std::to_string(n) + " videos");
      }
      k = *opts.train_count;
    }
    std::vector<std::size_t> ids(n);
    for (std::size_t i = 0; i < n; ++i) ids[i] = i;
    Rng rng(opts.seed);
    shuffle(ids, rng);
    split.train.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k));
    split.val.assign(ids.begin() + static_cast<std::ptrdiff_t>(k), ids.end());
  }
  if (split.train.empty() || split.val.empty()) {
    throw ConfigError("split leaves the train or validation side empty");
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.val.begin(), split.val.end());
  return split;
}

DatasetSplit split_dataset(std::size_t n, const SplitOptions& opts) {
  const std::vector<std::size_t> labels(n, 0);
  return split_dataset(labels, opts);
}

std::array<float, 3> compute_channel_means(std::span<const Video> videos,
                                           std::span<const std::size_t> ids) {
  if (ids.empty()) throw InputError("channel means need at least one video");
  std::array<double, 3> sum = {0, 0, 0};
  std::size_t count = 0;
  for (std::size_t id : ids) {
    if (id >= videos.size()) throw InputError("video id " + std::to_string(id) + " out of range");
    const Video& v = videos[id];
    v.validate();
    const std::size_t plane = v.height() * v.width();
    for (std::size_t f = 0; f < v.num_frames(); ++f) {
      for (std::size_t c = 0; c < 3; ++c) {
        const float* p = v.frames.data() + (f * 3 + c) * plane;
        double s = 0.0;
        for (std::size_t i = 0; i < plane; ++i) s += p[i];
        sum[c] += s;
      }
    }
    count += v.num_frames() * plane;
  }
  return {static_cast<float>(sum[0] / static_cast<double>(count)),
          static_cast<float>(sum[1] / static_cast<double>(count)),
          static_cast<float>(sum[2] / static_cast<double>(count))};
}

std::vector<ClassPattern> standard_patterns(std::size_t num_classes) {
  constexpr double pi = std::numbers::pi;
  std::vector<ClassPattern> out(num_classes);
  const double c = static_cast<double>(num_classes);
  for (std::size_t k = 0; k < num_classes; ++k) {
    const double kd = static_cast<double>(k);
    ClassPattern& p = out[k];
    p.orientation = pi * kd / c;
    p.frequency = 2.0 + 0.5 * static_cast<double>(k % 4);
    p.drift = (k % 2 == 0 ? 0.35 : -0.35) * (1.0 + 0.25 * kd);
    for (std::size_t ch = 0; ch < 3; ++ch) {
      p.tint[ch] = 0.6 + 0.4 * std::cos(2.0 * pi * kd / c + 2.0 * pi * static_cast<double>(ch) / 3.0);
    }
    p.blob_velocity = {1.5 * std::sin(2.0 * pi * kd / c), 1.5 * std::cos(2.0 * pi * kd / c)};
  }
  return out;
}

void SyntheticSpec::validate() const {
  if (num_classes < 2) throw ConfigError("synthetic data needs at least 2 classes");
  if (videos_per_class == 0 || frames_per_video == 0 || height == 0 || width == 0) {
    throw ConfigError("synthetic extents must all be >= 1");
  }
  if (!(noise_std >= 0.0)) throw ConfigError("noise_std must be >= 0");
  if (!patterns.empty() && patterns.size() != num_classes) {
    throw ConfigError("expected " + std::to_string(num_classes) + " class patterns, got " +
                      std::to_string(patterns.size()));
  }
  const std::vector<ClassPattern> ps = resolved_patterns();
  for (std::size_t a = 0; a < ps.size(); ++a) {
    for (std::size_t b = a + 1; b < ps.size(); ++b) {
      if (ps[a] == ps[b]) {
        throw ConfigError("classes " + std::to_string(a) + " and " + std::to_string(b) +
                          " share identical pattern parameters");
      }
    }
  }
}

std::vector<ClassPattern> SyntheticSpec::resolved_patterns() const {
  return patterns.empty() ? standard_patterns(num_classes) : patterns;
}

std::vector<Video> generate_synthetic(const SyntheticSpec& spec, Rng& rng) {
  constexpr double pi = std::numbers::pi;
  spec.validate();
  const std::vector<ClassPattern> patterns = spec.resolved_patterns();
  const std::uint64_t base = rng.next_u64();
  const std::size_t t_len = spec.frames_per_video, h = spec.height, w = spec.width;
  const double hd = static_cast<double>(h), wd = static_cast<double>(w);
  const double sigma = 0.1 * static_cast<double>(std::min(h, w));

  std::vector<Video> videos;
  videos.reserve(spec.num_classes * spec.videos_per_class);
  for (std::size_t label = 0; label < spec.num_classes; ++label) {
    const ClassPattern& p = patterns[label];
    const double tint_mean = (p.tint[0] + p.tint[1] + p.tint[2]) / 3.0;
    for (std::size_t i = 0; i < spec.videos_per_class; ++i) {
      Rng vr = Rng::derive(base, {label, i});
      // Per-video nuisance: phase, small orientation/speed jitter, blob start,
      // global brightness.
      const double phase = vr.uniform(0.0, 2.0 * pi);
      const double theta = p.orientation + vr.uniform(-0.15, 0.15);
      const double speed = 1.0 + vr.uniform(-0.2, 0.2);
      const double by0 = vr.uniform(0.0, hd), bx0 = vr.uniform(0.0, wd);
      const double bright = vr.uniform(-0.05, 0.05);
      const double ct = std::cos(theta), st = std::sin(theta);

      Tensor frames({t_len, 3, h, w});
      for (std::size_t t = 0; t < t_len; ++t) {
        const double td = static_cast<double>(t);
        const double by = by0 + speed * p.blob_velocity[0] * td;
        const double bx = bx0 + speed * p.blob_velocity[1] * td;
        for (std::size_t y = 0; y < h; ++y) {
          for (std::size_t x = 0; x < w; ++x) {
            const double yd = static_cast<double>(y), xd = static_cast<double>(x);
            const double u = (xd * ct + yd * st) / wd;
            const double g = std::sin(2.0 * pi * p.frequency * u + phase + speed * p.drift * td);
            // Toroidal distance so the blob wraps around the frame edges.
            double dy = std::remainder(yd - by, hd), dx = std::remainder(xd - bx, wd);
            const double blob = std::exp(-(dy * dy + dx * dx) / (2.0 * sigma * sigma));
            for (std::size_t ch = 0; ch < 3; ++ch) {
              double v = 0.5 + bright + 0.04 * (p.tint[ch] - tint_mean) +
                         0.25 * g * p.tint[ch] + 0.3 * blob;
              if (spec.noise_std > 0.0) v += spec.noise_std * vr.normal();
              frames.data()[((t * 3 + ch) * h + y) * w + x] =
                  static_cast<float>(std::clamp(v, 0.0, 1.0));
            }
          }
        }
      }
      char id[32];
      std::snprintf(id, sizeof(id), "%04zu", i);
      videos.push_back(Video{std::move(frames), label, class_dir_name(label) + "/" + id});
    }
  }
  return videos;
}

std::string class_dir_name(std::size_t label) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "class_%02zu", label);
  return buf;
}

void write_dataset(const fs::path& root, std::span<const Video> videos) {
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw IoError("cannot create " + root.string() + ": " + ec.message());
  for (const Video& v : videos) {
    v.validate();
    const std::string id = v.source_id.empty()
                               ? class_dir_name(v.label) + "/video"
                               : v.source_id;
    const fs::path file = root / (id + ".vten");
    fs::create_directories(file.parent_path(), ec);
    if (ec) throw IoError("cannot create " + file.parent_path().string() + ": " + ec.message());
    sten::write(file, v.frames);
  }
}

std::vector<std::string> dataset_classes(const fs::path& root) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) throw IoError("dataset root " + root.string() + " not found");
  std::vector<std::string> classes;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory()) classes.push_back(entry.path().filename().string());
  }
  if (classes.empty()) throw IoError("dataset root " + root.string() + " has no class directories");
  std::sort(classes.begin(), classes.end());
  return classes;
}

std::vector<Video> load_dataset(const fs::path& root) {
  const std::vector<std::string> classes = dataset_classes(root);
  std::vector<Video> videos;
  for (std::size_t label = 0; label < classes.size(); ++label) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(root / classes[label])) {
      if (entry.is_regular_file() && entry.path().extension() == ".vten") {
        files.push_back(entry.path());
      }
    }
    std::sort(files.begin(), files.end());
    for (const fs::path& f : files) {
      Video v{sten::read(f), label, classes[label] + "/" + f.stem().string()};
      try {
        v.validate();
      } catch (const InputError& e) {
        throw IoError(f.string() + ": " + e.what());
      }
      videos.push_back(std::move(v));
    }
  }
  if (videos.empty()) throw IoError("dataset root " + root.string() + " holds no .vten files");
  return videos;
}

}  // namespace sf3cnn
