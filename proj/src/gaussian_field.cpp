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

#include "prism/gaussian_field.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numbers>
#include <numeric>

#include "prism/errors.hpp"
#include "prism/rng.hpp"

namespace prism {

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("train: epochs must be >= 0");
  if (warm_epochs < 0 || warm_epochs > epochs) throw ConfigError("train: warm_epochs must be in [0, epochs]");
  if (lambda_l1 < 0.0 || lambda_nll < 0.0) throw ConfigError("train: loss weights must be >= 0");
  if (!(lr > 0.0) || lr_min < 0.0 || lr_min > lr) throw ConfigError("train: need 0 <= lr_min <= lr, lr > 0");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
}

Adam::Adam(std::size_t n, double beta1, double beta2, double eps)
    : m_(n, 0.0), v_(n, 0.0), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void Adam::step(std::span<double> params, std::span<const double> grad, double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
    params[i] -= lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
  }
}

double gaussian_half_nll(const Vec& mu, const Mat& chol, const Vec& d) {
  const Vec r = d - mu;
  const Vec a = chol.triangularView<Eigen::Lower>().solve(r);
  return 0.5 * (a.squaredNorm() + 2.0 * chol.diagonal().array().log().sum());
}

double log_density(const Vec& mu, const Mat& chol, const Vec& d) {
  const double dim = static_cast<double>(mu.size());
  return -gaussian_half_nll(mu, chol, d) - 0.5 * dim * std::log(2.0 * std::numbers::pi);
}

double log_density(const GaussianFieldParams& params, const Vec& p, double t, const Vec& d) {
  const FieldOutput f = forward_field(params, p, t);
  return log_density(f.mu, f.chol, d);
}

namespace {

struct ChunkResult {
  double l1_sum = 0.0;
  double nll_sum = 0.0;
  bool finite = true;
};

// Loss sums and output-gradient for columns [0, B) of one chunk.
ChunkResult chunk_losses(const NetArch& arch, const Eigen::MatrixXd& y, std::span<const ShapeSample* const> samples,
                         const LossWeights& w, double inv_m, Eigen::MatrixXd* grad_out) {
  const int dim = arch.dim;
  ChunkResult res;
  const double inv_md = inv_m / dim;
  if (grad_out) grad_out->setZero(y.rows(), y.cols());
  for (Eigen::Index c = 0; c < y.cols(); ++c) {
    const ShapeSample& s = *samples[static_cast<std::size_t>(c)];
    const FieldOutput f = kernels::decode_field(arch, y.col(c));
    const Vec r = s.d - f.mu;
    res.l1_sum += r.cwiseAbs().sum();
    const Vec a = f.chol.triangularView<Eigen::Lower>().solve(r);
    const Vec b = f.chol.transpose().triangularView<Eigen::Upper>().solve(a);
    const double logdet = 2.0 * f.chol.diagonal().array().log().sum();
    const double half_nll = 0.5 * (a.squaredNorm() + logdet);
    if (!std::isfinite(half_nll)) res.finite = false;
    res.nll_sum += half_nll;
    if (!grad_out) continue;
    auto g = grad_out->col(c);
    for (int k = 0; k < dim; ++k) {
      const double sign = r(k) > 0.0 ? 1.0 : (r(k) < 0.0 ? -1.0 : 0.0);
      g(k) -= w.l1 * sign * inv_md;
    }
    if (w.nll == 0.0) continue;
    for (int k = 0; k < dim; ++k) g(k) -= w.nll * b(k) * inv_m;
    // d(half_nll)/d(factor) = (Sigma^-1 - b b^T) factor.
    const Mat lower_inv = f.chol.triangularView<Eigen::Lower>().solve(Mat::Identity(dim, dim));
    const Mat dfactor = (lower_inv.transpose() * lower_inv - b * b.transpose()) * f.factor;
    int k = dim;
    for (int i = 0; i < dim; ++i) {
      for (int j = 0; j <= i; ++j, ++k) {
        double dl = dfactor(i, j);
        if (i == j) {
          const double raw = y(k, c);
          const double sig = raw >= 0.0 ? 1.0 / (1.0 + std::exp(-raw)) : std::exp(raw) / (1.0 + std::exp(raw));
          dl *= sig;
        }
        g(k) += w.nll * dl * inv_m;
      }
    }
  }
  return res;
}

Eigen::MatrixXd raw_field_inputs(int dim, std::span<const ShapeSample* const> samples) {
  Eigen::MatrixXd raw(dim + 1, static_cast<Eigen::Index>(samples.size()));
  for (std::size_t i = 0; i < samples.size(); ++i) raw.col(static_cast<Eigen::Index>(i)) << samples[i]->p, samples[i]->t;
  return raw;
}

}  // namespace

LossValues loss_and_grad(const GaussianFieldParams& params, std::span<const ShapeSample* const> batch,
                         const LossWeights& weights, std::span<double> grad) {
  if (batch.empty()) throw ConfigError("loss_and_grad: empty batch");
  const int dim = params.arch.dim;
  const std::size_t n_w = params.weights.size();
  const double inv_m = 1.0 / static_cast<double>(batch.size());
  const auto n_chunks = static_cast<std::int64_t>((batch.size() + kernels::kChunk - 1) / kernels::kChunk);
  std::vector<std::vector<double>> chunk_grads(static_cast<std::size_t>(n_chunks));
  std::vector<ChunkResult> chunk_res(static_cast<std::size_t>(n_chunks));
  std::exception_ptr error;

#pragma omp parallel
  {
    kernels::Workspace ws;
    Eigen::MatrixXd grad_out;
#pragma omp for schedule(static)
    for (std::int64_t c = 0; c < n_chunks; ++c) {
      try {
        const std::size_t begin = static_cast<std::size_t>(c) * kernels::kChunk;
        const std::size_t end = std::min(batch.size(), begin + kernels::kChunk);
        const auto part = batch.subspan(begin, end - begin);
        const Eigen::MatrixXd& y = kernels::forward(params, raw_field_inputs(dim, part), ws);
        chunk_res[c] = chunk_losses(params.arch, y, part, weights, inv_m, &grad_out);
        chunk_grads[c].assign(n_w, 0.0);
        kernels::backward(params, ws, grad_out, chunk_grads[c], nullptr);
      } catch (...) {
#pragma omp critical
        if (!error) error = std::current_exception();
      }
    }
  }
  if (error) std::rethrow_exception(error);

  std::fill(grad.begin(), grad.end(), 0.0);
  LossValues out;
  bool finite = true;
  for (std::int64_t c = 0; c < n_chunks; ++c) {
    out.l1 += chunk_res[c].l1_sum;
    out.nll += chunk_res[c].nll_sum;
    finite = finite && chunk_res[c].finite;
    const auto& g = chunk_grads[c];
    for (std::size_t i = 0; i < n_w; ++i) grad[i] += g[i];
  }
  out.l1 *= inv_m / dim;
  out.nll *= inv_m;
  if (!finite) out.nll = std::numeric_limits<double>::quiet_NaN();
  return out;
}

LossValues evaluate_losses(const GaussianFieldParams& params, std::span<const ShapeSample> samples) {
  if (samples.empty()) throw ConfigError("evaluate_losses: no samples");
  std::vector<const ShapeSample*> ptrs(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) ptrs[i] = &samples[i];
  const int dim = params.arch.dim;
  const auto n_chunks = static_cast<std::int64_t>((ptrs.size() + kernels::kChunk - 1) / kernels::kChunk);
  std::vector<ChunkResult> res(static_cast<std::size_t>(n_chunks));
#pragma omp parallel
  {
    kernels::Workspace ws;
#pragma omp for schedule(static)
    for (std::int64_t c = 0; c < n_chunks; ++c) {
      const std::size_t begin = static_cast<std::size_t>(c) * kernels::kChunk;
      const std::size_t end = std::min(ptrs.size(), begin + kernels::kChunk);
      const auto part = std::span<const ShapeSample* const>(ptrs).subspan(begin, end - begin);
      const Eigen::MatrixXd& y = kernels::forward(params, raw_field_inputs(dim, part), ws);
      res[c] = chunk_losses(params.arch, y, part, {}, 0.0, nullptr);
    }
  }
  LossValues out;
  for (const auto& r : res) {
    out.l1 += r.l1_sum;
    out.nll += r.nll_sum;
  }
  out.l1 /= static_cast<double>(samples.size()) * dim;
  out.nll /= static_cast<double>(samples.size());
  return out;
}

namespace {

template <typename PerSample>
ad::Var record_mean_loss(ad::Tape& tape, const GaussianFieldParams& params, std::span<const ShapeSample> batch,
                         std::vector<ad::Var>* weights_out, PerSample&& per_sample) {
  if (batch.empty()) throw ConfigError("loss: empty batch");
  const int dim = params.arch.dim;
  std::vector<ad::Var> w;
  w.reserve(params.weights.size());
  for (double v : params.weights) w.push_back(weights_out ? tape.variable(v) : tape.constant(v));
  if (weights_out) *weights_out = w;

  ad::Var total = tape.constant(0.0);
  for (const ShapeSample& s : batch) {
    std::vector<ad::Var> in;
    for (int k = 0; k < dim; ++k) in.push_back(tape.constant(s.p(k)));
    in.push_back(tape.constant(s.t));
    const std::vector<ad::Var> y = reference::record_mlp(tape, params.arch, w, in);
    total = total + per_sample(y, s);
  }
  return total / static_cast<double>(batch.size());
}

}  // namespace

ad::Var nll_loss(ad::Tape& tape, const GaussianFieldParams& params, std::span<const ShapeSample> batch,
                 std::vector<ad::Var>* weights_out) {
  const int dim = params.arch.dim;
  return record_mean_loss(tape, params, batch, weights_out, [&](const std::vector<ad::Var>& y, const ShapeSample& s) {
    // Factor from raw outputs, Sigma = F F^T + floor^2 I, then its Cholesky
    // on the tape and forward substitution a = chol^-1 r.
    std::vector<ad::Var> factor(static_cast<std::size_t>(dim * dim), tape.constant(0.0));
    int k = dim;
    for (int i = 0; i < dim; ++i) {
      for (int j = 0; j <= i; ++j, ++k) factor[i * dim + j] = i == j ? ad::softplus(y[k]) + params.arch.chol_floor : y[k];
    }
    const double floor_sq = params.arch.chol_floor * params.arch.chol_floor;
    std::vector<ad::Var> chol(static_cast<std::size_t>(dim * dim), tape.constant(0.0));
    for (int i = 0; i < dim; ++i) {
      for (int j = 0; j <= i; ++j) {
        ad::Var acc = tape.constant(i == j ? floor_sq : 0.0);
        for (int m = 0; m <= j; ++m) acc = acc + factor[i * dim + m] * factor[j * dim + m];
        for (int m = 0; m < j; ++m) acc = acc - chol[i * dim + m] * chol[j * dim + m];
        chol[i * dim + j] = i == j ? ad::pow(acc, 0.5) : acc / chol[j * dim + j];
      }
    }
    std::vector<ad::Var> a;
    ad::Var quad = tape.constant(0.0);
    ad::Var logdet = tape.constant(0.0);
    for (int i = 0; i < dim; ++i) {
      ad::Var acc = s.d(i) - y[i];
      for (int j = 0; j < i; ++j) acc = acc - chol[i * dim + j] * a[j];
      a.push_back(acc / chol[i * dim + i]);
      quad = quad + a.back() * a.back();
      logdet = logdet + 2.0 * ad::log(chol[i * dim + i]);
    }
    return 0.5 * (quad + logdet);
  });
}

ad::Var l1_warmup_loss(ad::Tape& tape, const GaussianFieldParams& params, std::span<const ShapeSample> batch,
                       std::vector<ad::Var>* weights_out) {
  const int dim = params.arch.dim;
  return record_mean_loss(tape, params, batch, weights_out, [&](const std::vector<ad::Var>& y, const ShapeSample& s) {
    ad::Var acc = tape.constant(0.0);
    for (int i = 0; i < dim; ++i) acc = acc + ad::abs(s.d(i) - y[i]);
    return acc / static_cast<double>(dim);
  });
}

TrainResult train(const Dataset& dataset, const NetArch& arch, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  config.validate();
  arch.validate();
  if (arch.kind != NetKind::field) throw ConfigError("train: expected a field architecture");
  if (dataset.empty()) throw ConfigError("train: dataset is empty");
  if (dataset.dim != arch.dim) throw ConfigError("train: dataset dimension does not match architecture");

  TrainResult result{init_params(arch, config.seed), {}};
  GaussianFieldParams& params = result.params;
  const std::size_t n = dataset.samples.size();
  const std::size_t steps_per_epoch = (n + config.batch_size - 1) / config.batch_size;
  const double total_steps = static_cast<double>(steps_per_epoch) * std::max(1, config.epochs);
  const auto cov_ranges = params.covariance_head_ranges();

  Adam adam(params.weights.size());
  std::vector<double> grad(params.weights.size());
  std::vector<std::size_t> order(n);
  std::vector<const ShapeSample*> batch;
  batch.reserve(static_cast<std::size_t>(config.batch_size));
  std::int64_t step = 0;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const bool warm = epoch <= config.warm_epochs;
    const LossWeights lw = warm ? LossWeights{config.lambda_l1, 0.0} : LossWeights{config.lambda_l1, config.lambda_nll};

    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(config.seed, 0xE0000000ULL + static_cast<std::uint64_t>(epoch));
    for (std::size_t i = n; i > 1; --i) {
      const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
      std::swap(order[i - 1], order[j]);
    }

    EpochLog log{epoch, warm ? 1 : 2, 0.0, 0.0, 0.0};
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t end = std::min(n, start + static_cast<std::size_t>(config.batch_size));
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(&dataset.samples[order[i]]);

      LossValues lv;
      try {
        lv = loss_and_grad(params, batch, lw, grad);
      } catch (const NonFiniteError& e) {
        throw DivergenceError(e.what(), epoch);
      }
      const double objective = lw.l1 * lv.l1 + lw.nll * lv.nll;
      if (!std::isfinite(objective)) throw DivergenceError("training loss is not finite", epoch);
      if (warm) {
        for (auto [b, e] : cov_ranges) std::fill(grad.begin() + b, grad.begin() + e, 0.0);
      }
      const double progress = static_cast<double>(step) / total_steps;
      const double lr = config.lr_min + 0.5 * (config.lr - config.lr_min) * (1.0 + std::cos(std::numbers::pi * progress));
      adam.step(params.weights, grad, lr);
      ++step;

      const double share = static_cast<double>(end - start) / static_cast<double>(n);
      log.l1 += share * lv.l1;
      log.nll += share * lv.nll;
      log.total += share * objective;
    }
    result.log.push_back(log);
    if (on_epoch) on_epoch(log);
  }
  return result;
}

double constant_gaussian_nll(std::span<const ShapeSample> train, std::span<const ShapeSample> heldout) {
  if (train.empty() || heldout.empty()) throw ConfigError("constant_gaussian_nll: empty sample set");
  const int dim = static_cast<int>(train.front().d.size());
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
  for (const auto& s : train) mean += s.d;
  mean /= static_cast<double>(train.size());
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(dim, dim);
  for (const auto& s : train) {
    const Eigen::VectorXd r = s.d - mean;
    cov += r * r.transpose();
  }
  cov /= static_cast<double>(train.size());
  const Mat chol = Eigen::LLT<Eigen::MatrixXd>(cov).matrixL().toDenseMatrix();
  double acc = 0.0;
  for (const auto& s : heldout) acc += gaussian_half_nll(mean, chol, s.d);
  return acc / static_cast<double>(heldout.size());
}

double mean_mahalanobis(const GaussianFieldParams& params, std::span<const ShapeSample> samples) {
  std::vector<FieldQuery> q;
  q.reserve(samples.size());
  for (const auto& s : samples) q.push_back({s.p, s.t});
  const auto out = forward_field_batch(params, q);
  double acc = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Vec a = out[i].chol.triangularView<Eigen::Lower>().solve(samples[i].d - out[i].mu);
    acc += a.squaredNorm();
  }
  return acc / static_cast<double>(samples.size());
}

double mean_l1(const GaussianFieldParams& params, std::span<const ShapeSample> samples) {
  return evaluate_losses(params, samples).l1;
}

double empirical_lipschitz(const GaussianFieldParams& params, std::span<const FieldQuery> queries) {
  constexpr double h = 1e-6;
  std::vector<FieldQuery> shifted(queries.begin(), queries.end());
  for (auto& q : shifted) q.t += h;
  const auto a = forward_field_batch(params, queries);
  const auto b = forward_field_batch(params, shifted);
  double lip = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) lip = std::max(lip, (b[i].mu - a[i].mu).norm() / h);
  return lip;
}

}  // namespace prism
