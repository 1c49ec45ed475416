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

// Downstream use of a trained field and inverse encoder: time estimation,
// longitudinal prediction, anomaly scoring, and evaluation metrics.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "prism/network.hpp"
#include "prism/types.hpp"

namespace prism {

enum class TimeMethod : std::uint8_t { mean, fisher_weighted };

struct TimeEstimate {
  double tau_bar = 0.0;
  TimeMethod method = TimeMethod::mean;
  std::vector<double> per_point;
  std::optional<double> t_chron;  // required for fisher_weighted
};

/// Arithmetic mean of a time map. Throws EmptyShapeError.
double estimate_time_mean(std::span<const double> map);

/// sum w_p tau_p / sum w_p. Throws UnidentifiableError when every weight is
/// below the identifiability floor.
double estimate_time_weighted(std::span<const double> map, std::span<const double> weights);

/// Weighted by I_mu(p, t) of the field at the shape's points.
TimeEstimate estimate_time_weighted(std::span<const double> map, const GaussianFieldParams& params,
                                    std::span<const Vec> points, double t);

/// I_mu(p, t) for each point.
std::vector<double> fisher_weights(const GaussianFieldParams& params, std::span<const Vec> points, double t);

/// sqrt(1 / mean_p I_mu(p, t)) over identifiable points. Throws
/// UnidentifiableError when no point is identifiable.
double population_sigma_tau(const GaussianFieldParams& params, std::span<const Vec> points, double t);

struct LongitudinalPrediction {
  double tau0 = 0.0;
  double z = 0.0;
  double tau1 = 0.0;
  bool extrapolated = false;  // t1 outside the model's time range
  std::vector<Vec> shape;     // p + mu(p, tau1)
};

struct TimeRange {
  double t_min = 0.0;
  double t_max = 1.0;
};

/// Carries the temporal z-score of a shape observed at t0 to t1.
LongitudinalPrediction predict_longitudinal(const GaussianFieldParams& forward, std::span<const Vec> points,
                                            double tau0, double t0, double t1, const TimeRange& range);

/// Same, estimating tau0 as the mean of the inverse encoder's time map.
LongitudinalPrediction predict_longitudinal(const GaussianFieldParams& forward, const MlpParams& inverse,
                                            std::span<const Vec> points, std::span<const Vec> displacements,
                                            double t0, double t1, const TimeRange& range);

enum class OodLabel : std::uint8_t { normal, anomalous };

struct OodResult {
  double score = 0.0;  // <= 0
  std::size_t argmin_point = 0;
  double tau_max = 0.0;
  std::optional<OodLabel> label;
};

/// min_p (tau_p - tau_max) / sigma_p over points with finite sigma_p.
/// sigma_p = +inf marks an unidentifiable point, which is skipped.
OodResult ood_score(std::span<const double> map, std::span<const double> sigma);

/// sigma_p = sqrt(1 / I_mu(p, t)) from the field.
OodResult ood_score(std::span<const double> map, const GaussianFieldParams& params, std::span<const Vec> points,
                    double t);

struct ScalarMetrics {
  double r = 0.0;
  double r2 = 0.0;
  double mae = 0.0;
};

/// Pearson r, coefficient of determination and mean absolute error.
/// Throws DegenerateError when the truth has zero variance.
ScalarMetrics scalar_metrics(std::span<const double> pred, std::span<const double> truth);
double pearson(std::span<const double> a, std::span<const double> b);
double spearman(std::span<const double> a, std::span<const double> b);

/// Probability that a positive outscores a negative, ties count one half.
double auc(std::span<const double> positives, std::span<const double> negatives);

struct ShapeMetrics {
  double chamfer = 0.0;
  double hausdorff = 0.0;
  double emd = 0.0;
};

/// Mean of the two directed mean nearest-neighbour distances.
double chamfer(std::span<const Vec> a, std::span<const Vec> b);
/// Largest directed nearest-neighbour distance.
double hausdorff(std::span<const Vec> a, std::span<const Vec> b);
/// Mean matched distance of an optimal one-to-one assignment. Clouds larger
/// than `max_points` are subsampled (seeded) to a common size first.
double emd(std::span<const Vec> a, std::span<const Vec> b, std::size_t max_points = 512, std::uint64_t seed = 0);
ShapeMetrics shape_metrics(std::span<const Vec> a, std::span<const Vec> b, std::uint64_t seed = 0);

/// Minimum-cost perfect assignment on a square cost matrix. Returns the
/// column assigned to each row.
std::vector<int> hungarian(const Eigen::MatrixXd& cost);

}  // namespace prism
