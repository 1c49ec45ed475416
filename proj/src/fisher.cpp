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

#include "prism/fisher.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "prism/errors.hpp"
#include "prism/rng.hpp"

namespace prism {

ScoreTerms ScoreTerms::from_jet(const FieldJet& jet) {
  const Eigen::LLT<Mat> llt(jet.sigma);
  ScoreTerms s;
  s.w = llt.solve(jet.mu_t);
  const Mat sinv_st = llt.solve(jet.sigma_t);
  s.B = llt.solve(sinv_st.transpose()).transpose();
  s.B = 0.5 * (s.B + s.B.transpose());
  s.c = 0.5 * sinv_st.trace();
  return s;
}

double score(const FieldJet& jet, const Vec& d) { return ScoreTerms::from_jet(jet)(d - jet.mu); }

double score(const GaussianFieldParams& params, const Vec& p, double t, const Vec& d) {
  return score(field_jet(params, p, t), d);
}

FisherReport fisher_from_jet(const FieldJet& jet, const Vec& p, double t) {
  const Eigen::LLT<Mat> llt(jet.sigma);
  FisherReport r;
  r.p = p;
  r.t = t;
  r.mu_t = jet.mu_t;
  r.sigma_t = jet.sigma_t;
  r.I_mu = jet.mu_t.dot(llt.solve(jet.mu_t));
  const Mat m = llt.solve(jet.sigma_t);
  r.I_sigma = 0.5 * (m * m).trace();
  r.I_full = r.I_mu + r.I_sigma;
  r.sigma2_tau = r.I_mu >= kIdentifiabilityFloor ? 1.0 / r.I_mu : std::numeric_limits<double>::infinity();
  return r;
}

FisherReport fisher_full(const GaussianFieldParams& params, const Vec& p, double t) {
  return fisher_from_jet(field_jet(params, p, t), p, t);
}

std::vector<FisherReport> fisher_grid(const GaussianFieldParams& params, std::span<const FieldQuery> queries) {
  const auto jets = field_jet_batch(params, queries);
  std::vector<FisherReport> out(jets.size());
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < jets.size(); ++i) out[i] = fisher_from_jet(jets[i], queries[i].p, queries[i].t);
  return out;
}

namespace {

constexpr std::int64_t kMcBlock = 1 << 14;

struct Moments {
  double u = 0, u2 = 0, u4 = 0;
  double lin = 0, lin2 = 0, lin4 = 0;
  double quad = 0, lq = 0, lq2 = 0;

  void add(double l, double q) {
    const double s = l + q;
    const double s2 = s * s;
    u += s;
    u2 += s2;
    u4 += s2 * s2;
    const double l2 = l * l;
    lin += l;
    lin2 += l2;
    lin4 += l2 * l2;
    quad += q;
    lq += l * q;
    lq2 += l * q * l * q;
  }

  void merge(const Moments& o) {
    u += o.u, u2 += o.u2, u4 += o.u4;
    lin += o.lin, lin2 += o.lin2, lin4 += o.lin4;
    quad += o.quad, lq += o.lq, lq2 += o.lq2;
  }
};

void sample_block(const FieldJet& jet, const ScoreTerms& terms, std::int64_t count, Rng& rng, Moments& m) {
  const auto dim = jet.mu.size();
  Vec eps(dim);
  for (std::int64_t i = 0; i < count; ++i) {
    for (Eigen::Index k = 0; k < dim; ++k) eps(k) = rng.normal();
    const Vec r = jet.chol * eps;
    m.add(terms.linear(r), terms.quadratic(r));
  }
}

McFisherResult finish(const Moments& m, std::int64_t n) {
  const double nd = static_cast<double>(n);
  McFisherResult r;
  r.n_samples = n;
  r.score_mean = m.u / nd;
  const double var_u = m.u2 / nd - r.score_mean * r.score_mean;
  r.score_mean_se = std::sqrt(std::max(var_u, 0.0) / nd);
  r.mc_I = m.u2 / nd;
  r.mc_I_se = std::sqrt(std::max(m.u4 / nd - r.mc_I * r.mc_I, 0.0) / nd);
  const double mean_lin = m.lin / nd;
  const double mean_quad = m.quad / nd;
  r.cov_linear_quadratic = m.lq / nd - mean_lin * mean_quad;
  r.cov_linear_quadratic_se = std::sqrt(std::max(m.lq2 / nd - (m.lq / nd) * (m.lq / nd), 0.0) / nd);
  r.var_linear = m.lin2 / nd - mean_lin * mean_lin;
  r.var_linear_se = std::sqrt(std::max(m.lin4 / nd - (m.lin2 / nd) * (m.lin2 / nd), 0.0) / nd);
  return r;
}

void require_samples(std::int64_t n) {
  if (n < 10000) throw ConfigError("mc_fisher: n_samples must be >= 1e4, got " + std::to_string(n));
}

}  // namespace

McFisherResult mc_fisher(const FieldJet& jet, std::int64_t n_samples, std::uint64_t seed) {
  require_samples(n_samples);
  const ScoreTerms terms = ScoreTerms::from_jet(jet);
  const std::int64_t n_blocks = (n_samples + kMcBlock - 1) / kMcBlock;
  std::vector<Moments> blocks(static_cast<std::size_t>(n_blocks));
#pragma omp parallel for schedule(static)
  for (std::int64_t b = 0; b < n_blocks; ++b) {
    Rng rng(seed, static_cast<std::uint64_t>(b));
    const std::int64_t count = std::min(kMcBlock, n_samples - b * kMcBlock);
    sample_block(jet, terms, count, rng, blocks[static_cast<std::size_t>(b)]);
  }
  Moments total;
  for (const auto& m : blocks) total.merge(m);
  return finish(total, n_samples);
}

McFisherResult mc_fisher_serial(const FieldJet& jet, std::int64_t n_samples, std::uint64_t seed) {
  require_samples(n_samples);
  const ScoreTerms terms = ScoreTerms::from_jet(jet);
  Rng rng(seed, 0);
  Moments m;
  sample_block(jet, terms, n_samples, rng, m);
  return finish(m, n_samples);
}

McFisherResult mc_fisher(const GaussianFieldParams& params, const Vec& p, double t, std::int64_t n_samples,
                         std::uint64_t seed) {
  return mc_fisher(field_jet(params, p, t), n_samples, seed);
}

double temporal_uncertainty(const FieldJet& jet) {
  const double i_mu = jet.mu_t.dot(Eigen::LLT<Mat>(jet.sigma).solve(jet.mu_t));
  if (!(i_mu >= kIdentifiabilityFloor)) {
    throw UnidentifiableError("temporal_uncertainty: I_mu = " + std::to_string(i_mu) +
                              " is below the identifiability floor");
  }
  return 1.0 / i_mu;
}

double temporal_uncertainty(const GaussianFieldParams& params, const Vec& p, double t) {
  return temporal_uncertainty(field_jet(params, p, t));
}

IsserlisResult isserlis_check(const Mat& sigma, const Mat& a, std::int64_t n_samples, std::uint64_t seed) {
  if (n_samples < 2) throw ConfigError("isserlis_check: need at least 2 samples");
  const Eigen::LLT<Mat> llt(sigma);
  if (llt.info() != Eigen::Success) throw ConfigError("isserlis_check: sigma is not positive definite");
  const Mat chol = llt.matrixL();
  const Mat as = a * sigma;

  IsserlisResult out;
  out.analytic = 2.0 * (as * as).trace();

  std::vector<double> q(static_cast<std::size_t>(n_samples));
  const std::int64_t n_blocks = (n_samples + kMcBlock - 1) / kMcBlock;
#pragma omp parallel for schedule(static)
  for (std::int64_t b = 0; b < n_blocks; ++b) {
    Rng rng(seed, static_cast<std::uint64_t>(b));
    Vec eps(sigma.rows());
    const std::int64_t end = std::min(n_samples, (b + 1) * kMcBlock);
    for (std::int64_t i = b * kMcBlock; i < end; ++i) {
      for (Eigen::Index k = 0; k < eps.size(); ++k) eps(k) = rng.normal();
      const Vec r = chol * eps;
      q[static_cast<std::size_t>(i)] = r.dot(a * r);
    }
  }
  const double nd = static_cast<double>(n_samples);
  double mean = 0.0;
  for (double v : q) mean += v;
  mean /= nd;
  double m2 = 0.0, m4 = 0.0;
  for (double v : q) {
    const double c2 = (v - mean) * (v - mean);
    m2 += c2;
    m4 += c2 * c2;
  }
  m2 /= nd;
  m4 /= nd;
  out.mc = m2 * nd / (nd - 1.0);
  out.mc_se = std::sqrt(std::max(m4 - m2 * m2, 0.0) / nd);
  return out;
}

CrlbResult crlb_check(std::span<const TimedTau> slice, const GaussianFieldParams& params,
                      std::span<const Vec> points) {
  if (slice.size() < 30) {
    throw InsufficientDataError("crlb_check: slice has " + std::to_string(slice.size()) +
                                " records, need at least 30");
  }
  if (points.empty()) throw ConfigError("crlb_check: no template points");

  CrlbResult out;
  out.n = slice.size();
  double mean = 0.0;
  for (const auto& r : slice) mean += r.tau - r.t;
  mean /= static_cast<double>(slice.size());
  for (const auto& r : slice) out.empirical_var += (r.tau - r.t - mean) * (r.tau - r.t - mean);
  out.empirical_var /= static_cast<double>(slice.size() - 1);

  std::vector<FieldQuery> queries;
  queries.reserve(slice.size() * points.size());
  for (const auto& r : slice) {
    for (const Vec& p : points) queries.push_back({p, r.t});
  }
  const auto reports = fisher_grid(params, queries);
  double acc = 0.0;
  for (const auto& rep : reports) {
    if (!rep.identifiable()) {
      throw UnidentifiableError("crlb_check: point is unidentifiable at t = " + std::to_string(rep.t));
    }
    acc += rep.sigma2_tau;
  }
  out.bound = acc / static_cast<double>(reports.size());
  out.ratio = out.empirical_var / out.bound;
  return out;
}

}  // namespace prism
