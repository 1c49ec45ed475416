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

// Amortized inverse g(p, d) -> tau. Trained on synthetic triplets drawn from
// the frozen forward field: tau uniform in the time range, p uniform over the
// template, d = mu(p, tau).

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "prism/network.hpp"
#include "prism/types.hpp"

namespace prism {

struct TripletBatch {
  std::vector<Vec> p;
  std::vector<double> tau;
  std::vector<Vec> d;

  std::size_t size() const { return tau.size(); }
};

struct TripletOptions {
  double t_min = 0.0;
  double t_max = 1.0;
  bool jitter_edges = false;  // move p along the polyline edge towards the next vertex
  bool add_noise = false;     // d ~ N(mu, Sigma) instead of d = mu; off by default
};

/// Draws n triplets. Deterministic in (seed, stream).
TripletBatch sample_triplets(const GaussianFieldParams& forward, std::size_t n, std::span<const Vec> points,
                             const TripletOptions& options, std::uint64_t seed, std::uint64_t stream = 0);

struct InverseConfig {
  int epochs = 40;
  int steps_per_epoch = 500;
  int batch_size = 512;
  double lr = 1e-3;
  double lr_min = 1e-5;
  std::uint64_t seed = 0;
  TripletOptions triplets;

  void validate() const;
};

struct InverseEpochLog {
  int epoch = 0;
  double l1 = 0.0;
};

struct InverseTrainResult {
  MlpParams params;
  std::vector<InverseEpochLog> log;
};

/// Mean |g(p, d) - tau| and its weight gradient over a triplet batch.
double inverse_loss_and_grad(const MlpParams& inverse, const TripletBatch& batch, std::span<double> grad);

InverseTrainResult train_inverse(const GaussianFieldParams& forward, const NetArch& arch,
                                 std::span<const Vec> points, const InverseConfig& config,
                                 const std::function<void(const InverseEpochLog&)>& on_epoch = {});

/// tau_hat_p = g(p, d_p) for each point; no clipping, no aggregation.
std::vector<double> time_map(const MlpParams& inverse, std::span<const Vec> p, std::span<const Vec> d);

/// Mean |g(p, d) - tau| over a batch.
double inverse_mae(const MlpParams& inverse, const TripletBatch& batch);

}  // namespace prism
