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

#include "prism/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include <spdlog/spdlog.h>

#include "prism/errors.hpp"
#include "prism/fisher.hpp"
#include "prism/inverse_encoder.hpp"
#include "prism/rng.hpp"

namespace prism {

double estimate_time_mean(std::span<const double> map) {
  if (map.empty()) throw EmptyShapeError("estimate_time_mean: empty time map");
  double acc = 0.0;
  for (double v : map) acc += v;
  return acc / static_cast<double>(map.size());
}

double estimate_time_weighted(std::span<const double> map, std::span<const double> weights) {
  if (map.empty()) throw EmptyShapeError("estimate_time_weighted: empty time map");
  if (map.size() != weights.size()) throw ConfigError("estimate_time_weighted: map and weight sizes differ");
  if (std::none_of(weights.begin(), weights.end(), [](double w) { return w >= kIdentifiabilityFloor; })) {
    throw UnidentifiableError("estimate_time_weighted: every weight is below the identifiability floor");
  }
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < map.size(); ++i) {
    num += weights[i] * map[i];
    den += weights[i];
  }
  return num / den;
}

std::vector<double> fisher_weights(const GaussianFieldParams& params, std::span<const Vec> points, double t) {
  std::vector<FieldQuery> q(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) q[i] = {points[i], t};
  const auto reports = fisher_grid(params, q);
  std::vector<double> w(reports.size());
  for (std::size_t i = 0; i < reports.size(); ++i) w[i] = reports[i].I_mu;
  return w;
}

TimeEstimate estimate_time_weighted(std::span<const double> map, const GaussianFieldParams& params,
                                    std::span<const Vec> points, double t) {
  if (map.size() != points.size()) throw ConfigError("estimate_time_weighted: map and point counts differ");
  const auto w = fisher_weights(params, points, t);
  TimeEstimate est;
  est.tau_bar = estimate_time_weighted(map, w);
  est.method = TimeMethod::fisher_weighted;
  est.per_point.assign(map.begin(), map.end());
  est.t_chron = t;
  return est;
}

double population_sigma_tau(const GaussianFieldParams& params, std::span<const Vec> points, double t) {
  const auto w = fisher_weights(params, points, t);
  double acc = 0.0;
  std::size_t n = 0;
  for (double v : w) {
    if (v >= kIdentifiabilityFloor) {
      acc += v;
      ++n;
    }
  }
  if (n == 0) throw UnidentifiableError("population_sigma_tau: no identifiable point at t = " + std::to_string(t));
  return std::sqrt(static_cast<double>(n) / acc);
}

LongitudinalPrediction predict_longitudinal(const GaussianFieldParams& forward, std::span<const Vec> points,
                                            double tau0, double t0, double t1, const TimeRange& range) {
  LongitudinalPrediction out;
  out.extrapolated = t1 < range.t_min || t1 > range.t_max;
  if (out.extrapolated) spdlog::warn("predict_longitudinal: t1 = {} is outside the model range [{}, {}]", t1, range.t_min, range.t_max);
  out.tau0 = tau0;
  const double s0 = population_sigma_tau(forward, points, t0);
  const double s1 = population_sigma_tau(forward, points, t1);
  out.z = (tau0 - t0) / s0;
  out.tau1 = t1 == t0 ? tau0 : t1 + out.z * s1;

  std::vector<FieldQuery> q(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) q[i] = {points[i], out.tau1};
  const auto fields = forward_field_batch(forward, q);
  out.shape.resize(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) out.shape[i] = points[i] + fields[i].mu;
  return out;
}

LongitudinalPrediction predict_longitudinal(const GaussianFieldParams& forward, const MlpParams& inverse,
                                            std::span<const Vec> points, std::span<const Vec> displacements,
                                            double t0, double t1, const TimeRange& range) {
  const auto map = time_map(inverse, points, displacements);
  return predict_longitudinal(forward, points, estimate_time_mean(map), t0, t1, range);
}

OodResult ood_score(std::span<const double> map, std::span<const double> sigma) {
  if (map.empty()) throw EmptyShapeError("ood_score: empty time map");
  if (map.size() != sigma.size()) throw ConfigError("ood_score: map and sigma sizes differ");
  OodResult out;
  out.tau_max = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (std::size_t i = 0; i < map.size(); ++i) {
    if (std::isfinite(sigma[i])) {
      out.tau_max = std::max(out.tau_max, map[i]);
      any = true;
    }
  }
  if (!any) throw AllUnidentifiableError("ood_score: no identifiable point in the shape");
  out.score = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < map.size(); ++i) {
    if (!std::isfinite(sigma[i])) continue;
    const double s = (map[i] - out.tau_max) / sigma[i];
    if (s < out.score) {
      out.score = s;
      out.argmin_point = i;
    }
  }
  return out;
}

OodResult ood_score(std::span<const double> map, const GaussianFieldParams& params, std::span<const Vec> points,
                    double t) {
  if (map.size() != points.size()) throw ConfigError("ood_score: map and point counts differ");
  const auto w = fisher_weights(params, points, t);
  std::vector<double> sigma(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    sigma[i] = w[i] >= kIdentifiabilityFloor ? std::sqrt(1.0 / w[i]) : std::numeric_limits<double>::infinity();
  }
  return ood_score(map, sigma);
}

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) throw ConfigError("pearson: need two equal-length series of size >= 2");
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) throw DegenerateError("pearson: zero variance");
  return sab / std::sqrt(saa * sbb);
}

ScalarMetrics scalar_metrics(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size() || pred.empty()) throw ConfigError("scalar_metrics: sizes differ or empty");
  const double n = static_cast<double>(truth.size());
  const double mt = std::accumulate(truth.begin(), truth.end(), 0.0) / n;
  double ss_tot = 0.0, ss_res = 0.0, abs_err = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ss_tot += (truth[i] - mt) * (truth[i] - mt);
    ss_res += (truth[i] - pred[i]) * (truth[i] - pred[i]);
    abs_err += std::abs(truth[i] - pred[i]);
  }
  if (ss_tot == 0.0) throw DegenerateError("scalar_metrics: truth has zero variance");
  ScalarMetrics m;
  m.mae = abs_err / n;
  m.r2 = 1.0 - ss_res / ss_tot;
  bool pred_constant = std::all_of(pred.begin(), pred.end(), [&](double v) { return v == pred.front(); });
  m.r = pred_constant ? 0.0 : pearson(pred, truth);
  return m;
}

namespace {

std::vector<double> ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

double directed_mean(std::span<const Vec> a, std::span<const Vec> b, bool take_max) {
  double acc = 0.0, worst = 0.0;
  for (const Vec& x : a) {
    double best = std::numeric_limits<double>::infinity();
    for (const Vec& y : b) best = std::min(best, (x - y).squaredNorm());
    best = std::sqrt(best);
    acc += best;
    worst = std::max(worst, best);
  }
  return take_max ? worst : acc / static_cast<double>(a.size());
}

void require_clouds(std::span<const Vec> a, std::span<const Vec> b, const char* what) {
  if (a.empty() || b.empty()) throw EmptyShapeError(std::string(what) + ": empty point set");
}

std::vector<Vec> subsample(std::span<const Vec> pts, std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(pts.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < n; ++i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(i),
                                                            static_cast<std::int64_t>(pts.size()) - 1));
    std::swap(idx[i], idx[j]);
  }
  std::vector<Vec> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = pts[idx[i]];
  return out;
}

}  // namespace

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ConfigError("spearman: sizes differ");
  const auto ra = ranks(a);
  const auto rb = ranks(b);
  return pearson(ra, rb);
}

double auc(std::span<const double> positives, std::span<const double> negatives) {
  if (positives.empty() || negatives.empty()) throw ConfigError("auc: both classes must be non-empty");
  std::vector<double> all(positives.begin(), positives.end());
  all.insert(all.end(), negatives.begin(), negatives.end());
  const auto r = ranks(all);
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < positives.size(); ++i) rank_sum += r[i];
  const double np = static_cast<double>(positives.size());
  const double nn = static_cast<double>(negatives.size());
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

double chamfer(std::span<const Vec> a, std::span<const Vec> b) {
  require_clouds(a, b, "chamfer");
  return 0.5 * (directed_mean(a, b, false) + directed_mean(b, a, false));
}

double hausdorff(std::span<const Vec> a, std::span<const Vec> b) {
  require_clouds(a, b, "hausdorff");
  return std::max(directed_mean(a, b, true), directed_mean(b, a, true));
}

std::vector<int> hungarian(const Eigen::MatrixXd& cost) {
  const int n = static_cast<int>(cost.rows());
  if (cost.cols() != n) throw ConfigError("hungarian: cost matrix must be square");
  // Potentials method, 1-based with a sentinel column 0.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> match(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = match[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const int j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> row_to_col(n);
  for (int j = 1; j <= n; ++j) row_to_col[match[j] - 1] = j - 1;
  return row_to_col;
}

double emd(std::span<const Vec> a, std::span<const Vec> b, std::size_t max_points, std::uint64_t seed) {
  require_clouds(a, b, "emd");
  const std::size_t n = std::min({a.size(), b.size(), max_points});
  std::vector<Vec> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  Rng rng(seed, 0xE3D);
  if (sa.size() > n) sa = subsample(a, n, rng);
  if (sb.size() > n) sb = subsample(b, n, rng);
  Eigen::MatrixXd cost(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) cost(i, j) = (sa[i] - sb[j]).norm();
  }
  const auto m = hungarian(cost);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += cost(i, m[i]);
  return acc / static_cast<double>(n);
}

ShapeMetrics shape_metrics(std::span<const Vec> a, std::span<const Vec> b, std::uint64_t seed) {
  return {chamfer(a, b), hausdorff(a, b), emd(a, b, 512, seed)};
}

}  // namespace prism
