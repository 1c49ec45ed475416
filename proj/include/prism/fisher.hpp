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

// Score function and Fisher information of the field with respect to t.
//
// For d ~ N(mu(t), Sigma(t)) with r = d - mu:
//
//   U(d) = mu_t' Sigma^-1 r + 1/2 r' Sigma^-1 Sigma_t Sigma^-1 r - 1/2 tr(Sigma^-1 Sigma_t)
//   I    = E[U^2] = mu_t' Sigma^-1 mu_t + 1/2 tr((Sigma^-1 Sigma_t)^2) = I_mu + I_sigma
//
// The temporal uncertainty keeps only the mean term: sigma_tau^2 = 1 / I_mu.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "prism/network.hpp"
#include "prism/types.hpp"

namespace prism {

/// Below this I_mu the point carries no usable information about t.
constexpr double kIdentifiabilityFloor = 1e-8;

struct FisherReport {
  Vec p;
  double t = 0.0;
  Vec mu_t;
  Mat sigma_t;
  double I_mu = 0.0;
  double I_sigma = 0.0;
  double I_full = 0.0;
  double sigma2_tau = 0.0;  // +inf when I_mu is below the identifiability floor
  std::optional<double> mc_I;
  std::optional<double> mc_I_se;
  std::optional<double> mc_score_mean;
  std::optional<double> mc_score_mean_se;

  bool identifiable() const { return I_mu >= kIdentifiabilityFloor; }
};

/// Score terms precomputed from a jet: U(r) = w'r + 1/2 r'Br - c.
struct ScoreTerms {
  Vec w;    // Sigma^-1 mu_t
  Mat B;    // Sigma^-1 Sigma_t Sigma^-1
  double c; // 1/2 tr(Sigma^-1 Sigma_t)

  static ScoreTerms from_jet(const FieldJet& jet);
  double linear(const Vec& r) const { return w.dot(r); }
  double quadratic(const Vec& r) const { return 0.5 * r.dot(B * r) - c; }
  double operator()(const Vec& r) const { return linear(r) + quadratic(r); }
};

double score(const FieldJet& jet, const Vec& d);
double score(const GaussianFieldParams& params, const Vec& p, double t, const Vec& d);

FisherReport fisher_from_jet(const FieldJet& jet, const Vec& p, double t);
FisherReport fisher_full(const GaussianFieldParams& params, const Vec& p, double t);
std::vector<FisherReport> fisher_grid(const GaussianFieldParams& params, std::span<const FieldQuery> queries);

struct McFisherResult {
  double mc_I = 0.0;
  double mc_I_se = 0.0;
  double score_mean = 0.0;
  double score_mean_se = 0.0;
  double cov_linear_quadratic = 0.0;  // Cov(U_linear, U_quadratic)
  double cov_linear_quadratic_se = 0.0;
  double var_linear = 0.0;            // Var(U_linear), expected I_mu
  double var_linear_se = 0.0;
  std::int64_t n_samples = 0;
};

/// Monte-Carlo E[U^2] with d drawn from the model at (p, t). Samples are
/// split into fixed blocks with independent streams, so the result does not
/// depend on the thread count. Requires n_samples >= 1e4.
McFisherResult mc_fisher(const FieldJet& jet, std::int64_t n_samples, std::uint64_t seed);
McFisherResult mc_fisher(const GaussianFieldParams& params, const Vec& p, double t, std::int64_t n_samples,
                         std::uint64_t seed);

/// Reference implementation of mc_fisher: one stream, one pass, no threads.
McFisherResult mc_fisher_serial(const FieldJet& jet, std::int64_t n_samples, std::uint64_t seed);

/// 1 / I_mu. Throws UnidentifiableError when I_mu < kIdentifiabilityFloor.
double temporal_uncertainty(const FieldJet& jet);
double temporal_uncertainty(const GaussianFieldParams& params, const Vec& p, double t);

struct IsserlisResult {
  double analytic = 0.0;  // 2 tr((A Sigma)^2)
  double mc = 0.0;        // sample variance of r'Ar
  double mc_se = 0.0;
};

/// Var(r'Ar) for r ~ N(0, Sigma), analytic vs Monte Carlo.
IsserlisResult isserlis_check(const Mat& sigma, const Mat& a, std::int64_t n_samples, std::uint64_t seed);

struct TimedTau {
  double t = 0.0;
  double tau = 0.0;
};

struct CrlbResult {
  double empirical_var = 0.0;  // Var(tau - t) over the slice
  double bound = 0.0;          // mean over the slice of mean_p 1/I_mu(p, t_i)
  double ratio = 0.0;          // empirical_var / bound
  std::size_t n = 0;
};

/// Compares the spread of ground-truth intrinsic time in a time slice with
/// the model's Cramer-Rao bound at `points`. Throws InsufficientDataError for
/// fewer than 30 records and UnidentifiableError when any point is
/// unidentifiable at any record's t.
CrlbResult crlb_check(std::span<const TimedTau> slice, const GaussianFieldParams& params,
                      std::span<const Vec> points);

}  // namespace prism
