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

#include "sf3cnn/angular_softmax.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "sf3cnn/error.hpp"

namespace sf3cnn {

namespace {

constexpr double kPi = std::numbers::pi;

// Chebyshev polynomials of the first kind: T_m(c) and T_m'(c) = m U_{m-1}(c).
double chebyshev(int m, double c) {
  double prev = 1.0;
  double cur = c;
  if (m == 0) return 1.0;
  for (int k = 1; k < m; ++k) {
    const double next = 2.0 * c * cur - prev;
    prev = cur;
    cur = next;
  }
  return cur;
}

double chebyshev_derivative(int m, double c) {
  // U_{m-1}(c) by the same recurrence with U_0 = 1, U_1 = 2c.
  if (m == 0) return 0.0;
  double prev = 1.0;
  double cur = 2.0 * c;
  if (m == 1) return 1.0;
  for (int k = 2; k < m; ++k) {
    const double next = 2.0 * c * cur - prev;
    prev = cur;
    cur = next;
  }
  return static_cast<double>(m) * cur;
}

struct Segment {
  int k;           // segment holding the value
  int k_derivative;  // left segment at a joint
};

Segment segment_of(double theta, int m) {
  const double scaled = theta * static_cast<double>(m) / kPi;
  int k = static_cast<int>(std::floor(scaled));
  k = std::clamp(k, 0, m - 1);
  int kd = k;
  if (k > 0 && scaled == static_cast<double>(k)) kd = k - 1;
  return {k, kd};
}

double sign_of(int k) { return (k % 2 == 0) ? 1.0 : -1.0; }

double checked_cos(double raw, double eps, std::size_t row) {
  if (!std::isfinite(raw)) {
    throw NumericError("non-finite cosine for feature row " + std::to_string(row));
  }
  if (std::abs(raw) > 1.0 + eps) {
    throw NumericError("cosine " + std::to_string(raw) + " outside [-1, 1] for feature row " +
                       std::to_string(row));
  }
  return std::clamp(raw, -1.0, 1.0);
}

template <typename T>
struct Normalized {
  std::size_t n, c, d;
  std::vector<double> w_hat;
  std::vector<double> w_norm;
  std::vector<double> x_norm;
  std::vector<double> cosines;
};

template <typename T>
Normalized<T> normalize(const BasicTensor<T>& x, const ClassifierWeights<T>& w, double eps) {
  if (x.rank() != 2 || w.w.rank() != 2 || x.dim(1) != w.w.dim(1)) {
    throw ShapeError("features " + shape_string(x.dims()) + " and class weights " +
                     shape_string(w.w.dims()) + " disagree on D");
  }
  Normalized<T> out{x.dim(0), w.w.dim(0), x.dim(1), {}, {}, {}, {}};
  const std::size_t n = out.n, c = out.c, d = out.d;
  out.w_hat.resize(c * d);
  out.w_norm.resize(c);
  for (std::size_t j = 0; j < c; ++j) {
    double s = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      const double v = w.w[j * d + k];
      s += v * v;
    }
    const double norm = std::sqrt(s);
    if (!std::isfinite(norm)) throw NumericError("non-finite class weight row " + std::to_string(j));
    if (norm == 0.0) throw DegenerateInputError("class weight row " + std::to_string(j) + " has zero norm");
    out.w_norm[j] = norm;
    for (std::size_t k = 0; k < d; ++k) out.w_hat[j * d + k] = w.w[j * d + k] / norm;
  }
  out.x_norm.resize(n);
  out.cosines.resize(n * c);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      const double v = x[i * d + k];
      s += v * v;
    }
    const double r = std::sqrt(s);
    if (!std::isfinite(r)) throw NumericError("non-finite feature row " + std::to_string(i));
    if (r == 0.0) throw DegenerateInputError("feature row " + std::to_string(i) + " has zero norm");
    out.x_norm[i] = r;
    for (std::size_t j = 0; j < c; ++j) {
      double dp = 0.0;
      for (std::size_t k = 0; k < d; ++k) dp += out.w_hat[j * d + k] * x[i * d + k];
      out.cosines[i * c + j] = checked_cos(dp / r, eps, i);
    }
  }
  return out;
}

void check_labels(const std::vector<std::size_t>& labels, std::size_t n, std::size_t c) {
  if (n == 0) throw InputError("empty feature batch");
  if (labels.size() != n) {
    throw InputError("batch has " + std::to_string(n) + " rows but " +
                     std::to_string(labels.size()) + " labels");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] >= c) {
      throw InputError("label " + std::to_string(labels[i]) + " at row " + std::to_string(i) +
                       " is not below C = " + std::to_string(c));
    }
  }
}

}  // namespace

double LambdaSchedule::at(std::uint64_t iteration) const {
  return std::max(floor, initial * std::pow(decay, static_cast<double>(iteration)));
}

void AngularLossConfig::validate() const {
  if (margin < 1 || margin > 4) {
    throw ConfigError("angular margin m must be in {1,2,3,4}, got " + std::to_string(margin));
  }
  if (!(anneal_lambda >= 0.0)) throw ConfigError("anneal_lambda must be >= 0");
  if (!(schedule.floor >= 0.0)) throw ConfigError("lambda floor must be >= 0");
  if (!(schedule.initial >= schedule.floor)) throw ConfigError("lambda initial must be >= floor");
  if (!(schedule.decay > 0.0 && schedule.decay <= 1.0)) {
    throw ConfigError("lambda decay must be in (0, 1]");
  }
  if (anneal_lambda > 0.0 && anneal_lambda < schedule.floor) {
    throw ConfigError("anneal_lambda must be >= the schedule floor");
  }
  if (!(eps_angle >= 0.0)) throw ConfigError("eps_angle must be >= 0");
}

double psi(double theta, int m) {
  if (m < 1) throw DomainError("psi needs m >= 1");
  if (!(theta >= 0.0 && theta <= kPi)) {
    throw DomainError("psi argument " + std::to_string(theta) + " outside [0, pi]");
  }
  const int k = segment_of(theta, m).k;
  return sign_of(k) * std::cos(static_cast<double>(m) * theta) - 2.0 * k;
}

double psi_derivative_wrt_cos(double cos_theta, int m) {
  const double c = std::clamp(cos_theta, -1.0, 1.0);
  const int k = segment_of(std::acos(c), m).k_derivative;
  return sign_of(k) * chebyshev_derivative(m, c);
}

namespace {

// psi evaluated from the cosine; the segment index comes from acos(c).
double psi_from_cos(double c, int m) {
  const int k = segment_of(std::acos(c), m).k;
  return sign_of(k) * chebyshev(m, c) - 2.0 * k;
}

}  // namespace

template <typename T>
BasicTensor<T> angles(const FeatureBatch<T>& batch, const ClassifierWeights<T>& w) {
  const Normalized<T> nz = normalize(batch.x, w, 1e-6);
  BasicTensor<T> out({nz.n, nz.c});
  for (std::size_t i = 0; i < nz.n * nz.c; ++i) out[i] = static_cast<T>(std::acos(nz.cosines[i]));
  return out;
}

template <typename T>
AngularLossResult<T> asoftmax_loss(const FeatureBatch<T>& batch, const ClassifierWeights<T>& w,
                                   const AngularLossConfig& cfg) {
  cfg.validate();
  Normalized<T> nz = normalize(batch.x, w, cfg.eps_angle);
  check_labels(batch.labels, nz.n, nz.c);
  const std::size_t n = nz.n, c = nz.c;
  const double lambda = cfg.anneal_lambda;

  AngularLossResult<T> res;
  res.logits = BasicTensor<T>({n, c});
  AngularSaved& s = res.saved;
  s.n = n;
  s.c = c;
  s.d = nz.d;
  s.probs.resize(n * c);
  s.f_value.resize(n);
  s.f_slope.resize(n);

  std::vector<double> z(c);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = nz.x_norm[i];
    const std::size_t y = batch.labels[i];
    for (std::size_t j = 0; j < c; ++j) z[j] = r * nz.cosines[i * c + j];
    const double cy = nz.cosines[i * c + y];
    const double f = (lambda * cy + psi_from_cos(cy, cfg.margin)) / (1.0 + lambda);
    s.f_value[i] = f;
    s.f_slope[i] = (lambda + psi_derivative_wrt_cos(cy, cfg.margin)) / (1.0 + lambda);
    z[y] = r * f;
    const double zmax = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (std::size_t j = 0; j < c; ++j) sum += std::exp(z[j] - zmax);
    const double lse = zmax + std::log(sum);
    total += lse - z[y];
    for (std::size_t j = 0; j < c; ++j) {
      s.probs[i * c + j] = std::exp(z[j] - lse);
      res.logits[i * c + j] = static_cast<T>(z[j]);
    }
  }
  res.loss = total / static_cast<double>(n);
  if (!std::isfinite(res.loss)) throw NumericError("A-softmax loss is not finite");
  s.w_hat = std::move(nz.w_hat);
  s.w_norm = std::move(nz.w_norm);
  s.x_norm = std::move(nz.x_norm);
  s.cosines = std::move(nz.cosines);
  return res;
}

template <typename T>
AngularGrads<T> asoftmax_backward(const FeatureBatch<T>& batch, const ClassifierWeights<T>& w,
                                  const AngularSaved& s, double scale) {
  const std::size_t n = s.n, c = s.c, d = s.d;
  if (batch.x.dims() != Shape{n, d} || w.w.dims() != Shape{c, d}) {
    throw ShapeError("asoftmax_backward operands do not match the saved forward state");
  }
  std::vector<double> gx(n * d, 0.0);
  std::vector<double> gw_hat(c * d, 0.0);
  const double inv_n = scale / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t y = batch.labels[i];
    const double r = s.x_norm[i];
    double coef_x = 0.0;  // multiplies x_i / r
    for (std::size_t j = 0; j < c; ++j) {
      const double dz = (s.probs[i * c + j] - (j == y ? 1.0 : 0.0)) * inv_n;
      if (dz == 0.0) continue;
      const double cj = s.cosines[i * c + j];
      const double g = j == y ? s.f_value[i] : cj;
      const double gp = j == y ? s.f_slope[i] : 1.0;
      coef_x += dz * (g - gp * cj);
      const double a = dz * gp;
      for (std::size_t k = 0; k < d; ++k) {
        gx[i * d + k] += a * s.w_hat[j * d + k];
        gw_hat[j * d + k] += a * batch.x[i * d + k];
      }
    }
    for (std::size_t k = 0; k < d; ++k) gx[i * d + k] += coef_x * batch.x[i * d + k] / r;
  }
  AngularGrads<T> out{BasicTensor<T>({n, d}), BasicTensor<T>({c, d})};
  for (std::size_t i = 0; i < n * d; ++i) out.grad_x[i] = static_cast<T>(gx[i]);
  for (std::size_t j = 0; j < c; ++j) {
    double proj = 0.0;
    for (std::size_t k = 0; k < d; ++k) proj += s.w_hat[j * d + k] * gw_hat[j * d + k];
    for (std::size_t k = 0; k < d; ++k) {
      out.grad_w[j * d + k] =
          static_cast<T>((gw_hat[j * d + k] - proj * s.w_hat[j * d + k]) / s.w_norm[j]);
    }
  }
  return out;
}

template <typename T>
BasicTensor<T> angular_logits(const BasicTensor<T>& x, const ClassifierWeights<T>& w) {
  const Normalized<T> nz = normalize(x, w, 1e-6);
  BasicTensor<T> out({nz.n, nz.c});
  for (std::size_t i = 0; i < nz.n; ++i) {
    for (std::size_t j = 0; j < nz.c; ++j) {
      out[i * nz.c + j] = static_cast<T>(nz.x_norm[i] * nz.cosines[i * nz.c + j]);
    }
  }
  return out;
}

template <typename T>
std::vector<std::size_t> angular_predict(const BasicTensor<T>& x, const ClassifierWeights<T>& w) {
  const Normalized<T> nz = normalize(x, w, 1e-6);
  std::vector<std::size_t> labels(nz.n, 0);
  for (std::size_t i = 0; i < nz.n; ++i) {
    const double* row = nz.cosines.data() + i * nz.c;
    labels[i] = static_cast<std::size_t>(std::max_element(row, row + nz.c) - row);
  }
  return labels;
}

template <typename T>
CrossEntropyResult<T> cross_entropy_loss(const BasicTensor<T>& logits,
                                         const std::vector<std::size_t>& labels) {
  if (logits.rank() != 2) throw ShapeError("cross-entropy logits must be N x C");
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  check_labels(labels, n, c);
  CrossEntropyResult<T> res;
  res.probs.resize(n * c);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const T* row = logits.data() + i * c;
    double zmax = -INFINITY;
    for (std::size_t j = 0; j < c; ++j) {
      if (!std::isfinite(static_cast<double>(row[j]))) {
        throw NumericError("non-finite logit at row " + std::to_string(i));
      }
      zmax = std::max(zmax, static_cast<double>(row[j]));
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < c; ++j) sum += std::exp(row[j] - zmax);
    const double lse = zmax + std::log(sum);
    total += lse - row[labels[i]];
    for (std::size_t j = 0; j < c; ++j) res.probs[i * c + j] = std::exp(row[j] - lse);
  }
  res.loss = total / static_cast<double>(n);
  return res;
}

template <typename T>
BasicTensor<T> cross_entropy_backward(const BasicTensor<T>& logits,
                                      const std::vector<std::size_t>& labels,
                                      const CrossEntropyResult<T>& forward, double scale) {
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  BasicTensor<T> g({n, c});
  const double inv_n = scale / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      g[i * c + j] =
          static_cast<T>((forward.probs[i * c + j] - (j == labels[i] ? 1.0 : 0.0)) * inv_n);
    }
  }
  return g;
}

template <typename T>
AngleStats angle_stats(const FeatureBatch<T>& batch, const ClassifierWeights<T>& w) {
  const Normalized<T> nz = normalize(batch.x, w, 1e-6);
  check_labels(batch.labels, nz.n, nz.c);
  AngleStats st;
  st.per_class_counts.assign(nz.c, 0);
  double sum = 0.0;
  for (std::size_t i = 0; i < nz.n; ++i) {
    const std::size_t y = batch.labels[i];
    const double theta = std::acos(nz.cosines[i * nz.c + y]);
    sum += theta;
    st.intra_max = std::max(st.intra_max, theta);
    ++st.per_class_counts[y];
  }
  st.intra_mean = sum / static_cast<double>(nz.n);
  if (nz.c >= 2) {
    double lo = kPi;
    double acc = 0.0;
    std::size_t pairs = 0;
    for (std::size_t a = 0; a < nz.c; ++a) {
      for (std::size_t b = a + 1; b < nz.c; ++b) {
        double dp = 0.0;
        for (std::size_t k = 0; k < nz.d; ++k) dp += nz.w_hat[a * nz.d + k] * nz.w_hat[b * nz.d + k];
        const double theta = std::acos(std::clamp(dp, -1.0, 1.0));
        lo = std::min(lo, theta);
        acc += theta;
        ++pairs;
      }
    }
    st.inter_min = lo;
    st.inter_mean = acc / static_cast<double>(pairs);
  }
  return st;
}

#define SF3CNN_INSTANTIATE(T)                                                                  \
  template BasicTensor<T> angles(const FeatureBatch<T>&, const ClassifierWeights<T>&);         \
  template AngularLossResult<T> asoftmax_loss(const FeatureBatch<T>&,                          \
                                              const ClassifierWeights<T>&,                     \
                                              const AngularLossConfig&);                       \
  template AngularGrads<T> asoftmax_backward(const FeatureBatch<T>&,                           \
                                             const ClassifierWeights<T>&, const AngularSaved&, \
                                             double);                                          \
  template BasicTensor<T> angular_logits(const BasicTensor<T>&, const ClassifierWeights<T>&);  \
  template std::vector<std::size_t> angular_predict(const BasicTensor<T>&,                     \
                                                    const ClassifierWeights<T>&);              \
  template CrossEntropyResult<T> cross_entropy_loss(const BasicTensor<T>&,                     \
                                                    const std::vector<std::size_t>&);          \
  template BasicTensor<T> cross_entropy_backward(                                              \
      const BasicTensor<T>&, const std::vector<std::size_t>&, const CrossEntropyResult<T>&,    \
      double);                                                                                 \
  template AngleStats angle_stats(const FeatureBatch<T>&, const ClassifierWeights<T>&);

SF3CNN_INSTANTIATE(float)
SF3CNN_INSTANTIATE(double)

#undef SF3CNN_INSTANTIATE

}  // namespace sf3cnn
