/*
 * Copyright 2026 The PRISM Shape Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Conditional displacement distribution p(d | p, t) = N(mu(p, t), Sigma(p, t)).
//
// Training follows a two-stage curriculum: the first `warm_epochs` epochs fit
// the mean head with an L1 loss while covariance-head gradients are masked,
// then both heads are trained on lambda_l1 * L1 + lambda_nll * NLL.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "prism/autodiff.hpp"
#include "prism/network.hpp"
#include "prism/sample.hpp"

namespace prism {

struct TrainConfig {
  int warm_epochs = 10;
  double lambda_l1 = 1.0;
  double lambda_nll = 1.0;
  double lr = 1e-3;
  double lr_min = 1e-5;  // cosine floor; equal to lr disables decay
  int batch_size = 512;
  int epochs = 200;
  std::uint64_t seed = 0;

  void validate() const;
};

struct EpochLog {
  int epoch = 0;  // 1-based
  int stage = 1;
  double l1 = 0.0;
  double nll = 0.0;
  double total = 0.0;
};

struct TrainResult {
  GaussianFieldParams params;
  std::vector<EpochLog> log;
};

struct LossValues {
  double l1 = 0.0;
  double nll = 0.0;
};

/// Adaptive-moment optimizer over a flat parameter vector.
class Adam {
 public:
  explicit Adam(std::size_t n, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(std::span<double> params, std::span<const double> grad, double lr);
  std::int64_t steps() const { return t_; }

 private:
  std::vector<double> m_, v_;
  double beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
};

/// Loss weights for one objective evaluation.
struct LossWeights {
  double l1 = 1.0;
  double nll = 0.0;
};

/// Batched loss value and weight gradient. Gradient is overwritten with
/// weights.l1 * dL1 + weights.nll * dNLL. Reduction order is fixed, so
/// results do not depend on the number of threads.
LossValues loss_and_grad(const GaussianFieldParams& params, std::span<const ShapeSample* const> batch,
                         const LossWeights& weights, std::span<double> grad);

/// Loss values only, over a whole sample set.
LossValues evaluate_losses(const GaussianFieldParams& params, std::span<const ShapeSample> samples);

/// Tape-recorded NLL (1/2M) sum_j [r_j^T Sigma_j^-1 r_j + log det Sigma_j].
/// With `weights_out` non-null the weights are recorded as variables.
ad::Var nll_loss(ad::Tape& tape, const GaussianFieldParams& params, std::span<const ShapeSample> batch,
                 std::vector<ad::Var>* weights_out = nullptr);

/// Tape-recorded mean over samples and coordinates of |d - mu|.
ad::Var l1_warmup_loss(ad::Tape& tape, const GaussianFieldParams& params, std::span<const ShapeSample> batch,
                       std::vector<ad::Var>* weights_out = nullptr);

/// Per-sample Gaussian NLL term from a mean, Cholesky factor and displacement:
/// 0.5 * (r^T Sigma^-1 r + log det Sigma).
double gaussian_half_nll(const Vec& mu, const Mat& chol, const Vec& d);

/// Exact log N(d; mu(p,t), Sigma(p,t)).
double log_density(const GaussianFieldParams& params, const Vec& p, double t, const Vec& d);
double log_density(const Vec& mu, const Mat& chol, const Vec& d);

using EpochCallback = std::function<void(const EpochLog&)>;

/// Trains a field network on `dataset`. Throws DivergenceError on a
/// non-finite loss. Deterministic for a fixed config.
TrainResult train(const Dataset& dataset, const NetArch& arch, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

/// Mean held-out NLL of a single Gaussian fit to all training displacements.
double constant_gaussian_nll(std::span<const ShapeSample> train, std::span<const ShapeSample> heldout);

/// Mean squared Mahalanobis distance of held-out displacements.
double mean_mahalanobis(const GaussianFieldParams& params, std::span<const ShapeSample> samples);

/// Mean |d - mu| over samples and coordinates.
double mean_l1(const GaussianFieldParams& params, std::span<const ShapeSample> samples);

/// Largest |mu(p, t + h) - mu(p, t)| / h over the given queries (h = 1e-6).
double empirical_lipschitz(const GaussianFieldParams& params, std::span<const FieldQuery> queries);

}  // namespace prism
