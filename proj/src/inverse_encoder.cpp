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

#include "prism/inverse_encoder.hpp"

#include <cmath>
#include <exception>
#include <numbers>
#include <string>

#include "prism/errors.hpp"
#include "prism/gaussian_field.hpp"
#include "prism/rng.hpp"

namespace prism {

TripletBatch sample_triplets(const GaussianFieldParams& forward, std::size_t n, std::span<const Vec> points,
                             const TripletOptions& options, std::uint64_t seed, std::uint64_t stream) {
  TripletBatch out;
  if (n == 0) return out;
  if (points.empty()) throw ConfigError("sample_triplets: no template points");
  if (!(options.t_max > options.t_min)) throw ConfigError("sample_triplets: empty time range");

  Rng rng(seed, 0x7A000000ULL + stream);
  std::vector<FieldQuery> queries(n);
  const auto last = static_cast<std::int64_t>(points.size()) - 1;
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(rng.uniform_int(0, last));
    Vec p = points[k];
    if (options.jitter_edges) {
      const Vec& next = points[(k + 1) % points.size()];
      p += rng.uniform() * (next - p);
    }
    queries[i] = {p, rng.uniform(options.t_min, options.t_max)};
  }
  const auto fields = forward_field_batch(forward, queries);

  out.p.resize(n);
  out.tau.resize(n);
  out.d.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.p[i] = queries[i].p;
    out.tau[i] = queries[i].t;
    out.d[i] = fields[i].mu;
  }
  if (options.add_noise) {
    const auto dim = forward.arch.dim;
    Vec eps(dim);
    for (std::size_t i = 0; i < n; ++i) {
      for (int k = 0; k < dim; ++k) eps(k) = rng.normal();
      out.d[i] += fields[i].chol * eps;
    }
  }
  return out;
}

void InverseConfig::validate() const {
  if (epochs < 1) throw ConfigError("inverse: epochs must be >= 1");
  if (steps_per_epoch < 1) throw ConfigError("inverse: steps_per_epoch must be >= 1");
  if (batch_size < 1) throw ConfigError("inverse: batch_size must be >= 1");
  if (!(lr > 0.0) || !(lr_min >= 0.0) || lr_min > lr) throw ConfigError("inverse: need 0 <= lr_min <= lr, lr > 0");
  if (!(triplets.t_max > triplets.t_min)) throw ConfigError("inverse: empty time range");
}

namespace {

Eigen::MatrixXd raw_inverse_inputs(int dim, std::span<const Vec> p, std::span<const Vec> d, std::size_t begin,
                                   std::size_t end) {
  Eigen::MatrixXd raw(2 * dim, static_cast<Eigen::Index>(end - begin));
  for (std::size_t i = begin; i < end; ++i) raw.col(static_cast<Eigen::Index>(i - begin)) << p[i], d[i];
  return raw;
}

}  // namespace

double inverse_loss_and_grad(const MlpParams& inverse, const TripletBatch& batch, std::span<double> grad) {
  if (batch.size() == 0) throw ConfigError("inverse_loss_and_grad: empty batch");
  const int dim = inverse.arch.dim;
  const std::size_t n = batch.size();
  const std::size_t n_w = inverse.weights.size();
  const double inv_m = 1.0 / static_cast<double>(n);
  const auto n_chunks = static_cast<std::int64_t>((n + kernels::kChunk - 1) / kernels::kChunk);
  std::vector<std::vector<double>> chunk_grads(static_cast<std::size_t>(n_chunks));
  std::vector<double> chunk_loss(static_cast<std::size_t>(n_chunks), 0.0);
  std::exception_ptr error;

#pragma omp parallel
  {
    kernels::Workspace ws;
    Eigen::MatrixXd grad_out;
#pragma omp for schedule(static)
    for (std::int64_t c = 0; c < n_chunks; ++c) {
      try {
        const std::size_t begin = static_cast<std::size_t>(c) * kernels::kChunk;
        const std::size_t end = std::min(n, begin + kernels::kChunk);
        const Eigen::MatrixXd& y = kernels::forward(inverse, raw_inverse_inputs(dim, batch.p, batch.d, begin, end), ws);
        grad_out.setZero(1, y.cols());
        double loss = 0.0;
        for (Eigen::Index k = 0; k < y.cols(); ++k) {
          const double r = y(0, k) - batch.tau[begin + static_cast<std::size_t>(k)];
          loss += std::abs(r);
          grad_out(0, k) = (r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0)) * inv_m;
        }
        chunk_loss[c] = loss;
        chunk_grads[c].assign(n_w, 0.0);
        kernels::backward(inverse, ws, grad_out, chunk_grads[c], nullptr);
      } catch (...) {
#pragma omp critical
        if (!error) error = std::current_exception();
      }
    }
  }
  if (error) std::rethrow_exception(error);

  std::fill(grad.begin(), grad.end(), 0.0);
  double loss = 0.0;
  for (std::int64_t c = 0; c < n_chunks; ++c) {
    loss += chunk_loss[c];
    for (std::size_t i = 0; i < n_w; ++i) grad[i] += chunk_grads[c][i];
  }
  return loss * inv_m;
}

InverseTrainResult train_inverse(const GaussianFieldParams& forward, const NetArch& arch,
                                 std::span<const Vec> points, const InverseConfig& config,
                                 const std::function<void(const InverseEpochLog&)>& on_epoch) {
  config.validate();
  arch.validate();
  if (arch.kind != NetKind::inverse) throw ConfigError("train_inverse: expected an inverse architecture");
  if (forward.arch.kind != NetKind::field) throw ConfigError("train_inverse: forward model is not a field network");
  if (arch.dim != forward.arch.dim) throw ConfigError("train_inverse: dimension mismatch with forward model");

  InverseTrainResult result{init_params(arch, config.seed ^ 0x1A5E), {}};
  MlpParams& params = result.params;
  Adam adam(params.weights.size());
  std::vector<double> grad(params.weights.size());
  const double total_steps = static_cast<double>(config.epochs) * config.steps_per_epoch;
  std::int64_t step = 0;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    InverseEpochLog log{epoch, 0.0};
    for (int s = 0; s < config.steps_per_epoch; ++s) {
      const TripletBatch batch = sample_triplets(forward, static_cast<std::size_t>(config.batch_size), points,
                                                 config.triplets, config.seed, static_cast<std::uint64_t>(step));
      double loss;
      try {
        loss = inverse_loss_and_grad(params, batch, grad);
      } catch (const NonFiniteError& e) {
        throw DivergenceError(e.what(), epoch);
      }
      if (!std::isfinite(loss)) throw DivergenceError("inverse training loss is not finite", epoch);
      const double progress = static_cast<double>(step) / total_steps;
      const double lr = config.lr_min + 0.5 * (config.lr - config.lr_min) * (1.0 + std::cos(std::numbers::pi * progress));
      adam.step(params.weights, grad, lr);
      ++step;
      log.l1 += loss / config.steps_per_epoch;
    }
    result.log.push_back(log);
    if (on_epoch) on_epoch(log);
  }
  return result;
}

std::vector<double> time_map(const MlpParams& inverse, std::span<const Vec> p, std::span<const Vec> d) {
  if (p.size() != d.size()) throw ConfigError("time_map: point and displacement counts differ");
  std::vector<InverseQuery> q(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) q[i] = {p[i], d[i]};
  return forward_inverse_batch(inverse, q);
}

double inverse_mae(const MlpParams& inverse, const TripletBatch& batch) {
  if (batch.size() == 0) throw ConfigError("inverse_mae: empty batch");
  const auto est = time_map(inverse, batch.p, batch.d);
  double acc = 0.0;
  for (std::size_t i = 0; i < est.size(); ++i) acc += std::abs(est[i] - batch.tau[i]);
  return acc / static_cast<double>(est.size());
}

}  // namespace prism
