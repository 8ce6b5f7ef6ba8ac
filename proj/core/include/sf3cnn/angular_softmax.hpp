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

// A-softmax loss head: modified softmax on the hypersphere with a
// multiplicative angular margin on the target-class angle, its analytic
// gradients, the plain cross-entropy baseline, and angle diagnostics.
//
// For feature x_i (norm r_i) and unit-normalized class weights w_j, with
// c_ij = cos(theta_ij) = <w_j, x_i> / r_i, the logits are
//
//   z_ij = r_i * c_ij                       for j != y_i
//   z_iy = r_i * f(theta_iy)                 f = (lambda * cos + psi) / (1 + lambda)
//
// and the loss is the batch mean of logsumexp(z_i) - z_iy. psi is the
// monotone extension of cos(m * theta) over [0, pi]:
//
//   psi(theta) = (-1)^k cos(m theta) - 2k,  theta in [k pi/m, (k+1) pi/m]
//
// evaluated through the Chebyshev identity cos(m theta) = T_m(cos theta), so
// neither the value nor the derivative needs 1 / sin(theta).

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "sf3cnn/tensor.hpp"

namespace sf3cnn {

template <typename T>
struct FeatureBatch {
  BasicTensor<T> x;                  // N x D
  std::vector<std::size_t> labels;   // N entries in [0, C)
};

// One weight row per class; never carries a bias. Rows are renormalized to
// unit length inside every evaluation and gradients flow through that map.
template <typename T>
struct ClassifierWeights {
  BasicTensor<T> w;  // C x D
};

// lambda(t) = max(floor, initial * decay^t)
struct LambdaSchedule {
  double initial = 1000.0;
  double floor = 5.0;
  double decay = 0.99;

  double at(std::uint64_t iteration) const;
};

struct AngularLossConfig {
  int margin = 4;
  // Current blend weight; 0 evaluates pure A-softmax.
  double anneal_lambda = 0.0;
  LambdaSchedule schedule;
  // Cosines further than this outside [-1, 1] are reported as numeric
  // failures instead of being silently clamped.
  double eps_angle = 1e-7;

  // ConfigError unless margin is in {1,2,3,4}, anneal_lambda >= 0 and, when
  // annealing, anneal_lambda >= floor >= 0.
  void validate() const;
};

struct AngleStats {
  double intra_mean = 0.0;  // radians
  double intra_max = 0.0;
  std::optional<double> inter_min;  // absent when C < 2
  std::optional<double> inter_mean;
  std::vector<std::size_t> per_class_counts;
};

// theta_ji in [0, pi] as an N x C tensor. DegenerateInputError for a zero
// feature or weight row (naming the row), ShapeError for a D mismatch.
template <typename T>
BasicTensor<T> angles(const FeatureBatch<T>& batch, const ClassifierWeights<T>& w);

// DomainError when theta is outside [0, pi] or m < 1.
double psi(double theta, int m);

// d psi / d cos(theta) on the segment containing theta; at a segment joint
// the left segment is used.
double psi_derivative_wrt_cos(double cos_theta, int m);

// Forward state kept for the backward pass (all in double).
struct AngularSaved {
  std::size_t n = 0, c = 0, d = 0;
  std::vector<double> w_hat;     // C x D
  std::vector<double> w_norm;    // C
  std::vector<double> x_norm;    // N
  std::vector<double> cosines;   // N x C
  std::vector<double> probs;     // N x C
  std::vector<double> f_value;   // N, blended target term f(theta_y)
  std::vector<double> f_slope;   // N, df/dcos at theta_y
};

template <typename T>
struct AngularLossResult {
  double loss = 0.0;
  BasicTensor<T> logits;  // N x C, margin applied to the target entry
  AngularSaved saved;
};

template <typename T>
struct AngularGrads {
  BasicTensor<T> grad_x;  // N x D
  BasicTensor<T> grad_w;  // C x D, through the unit-normalization map
};

template <typename T>
AngularLossResult<T> asoftmax_loss(const FeatureBatch<T>& batch, const ClassifierWeights<T>& w,
                                   const AngularLossConfig& cfg);

// Gradient of `scale * loss`; scale defaults to 1.
template <typename T>
AngularGrads<T> asoftmax_backward(const FeatureBatch<T>& batch, const ClassifierWeights<T>& w,
                                  const AngularSaved& saved, double scale = 1.0);

// Inference logits r_i * cos(theta_ij) (no margin).
template <typename T>
BasicTensor<T> angular_logits(const BasicTensor<T>& x, const ClassifierWeights<T>& w);

// argmax_j cos(theta_ij); lowest index wins ties.
template <typename T>
std::vector<std::size_t> angular_predict(const BasicTensor<T>& x, const ClassifierWeights<T>& w);

template <typename T>
struct CrossEntropyResult {
  double loss = 0.0;
  std::vector<double> probs;  // N x C
};

// Max-subtracted softmax cross-entropy averaged over the batch. NumericError
// on non-finite logits.
template <typename T>
CrossEntropyResult<T> cross_entropy_loss(const BasicTensor<T>& logits,
                                         const std::vector<std::size_t>& labels);

template <typename T>
BasicTensor<T> cross_entropy_backward(const BasicTensor<T>& logits,
                                      const std::vector<std::size_t>& labels,
                                      const CrossEntropyResult<T>& forward, double scale = 1.0);

// Intra: angle between each feature and its own class weight.
// Inter: pairwise angles between unit-normalized class weights.
template <typename T>
AngleStats angle_stats(const FeatureBatch<T>& batch, const ClassifierWeights<T>& w);

}  // namespace sf3cnn
