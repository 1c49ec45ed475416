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

// Dataset-level evaluation and the CSV / SVG artifacts built from it.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "prism/analysis.hpp"
#include "prism/fisher.hpp"
#include "prism/sample.hpp"
#include "prism/starman.hpp"

namespace prism::report {

/// Comma-separated table. The first line is a comment carrying the input
/// hashes, the second names the columns.
class Csv {
 public:
  Csv(std::vector<std::string> columns, const std::string& provenance);
  Csv& add(std::vector<std::string> cells);
  std::string str() const;

  static std::string num(double v);
  static std::string num(std::int64_t v);
  static std::string opt(const std::optional<double>& v);

 private:
  std::size_t n_cols_;
  std::string text_;
};

/// "ckpt=<sha256> dataset=<sha256>" style provenance line.
std::string provenance_line(const std::string& ckpt_hash, const std::string& dataset_hash);

struct ShapeTime {
  std::int64_t subject_id = 0;
  std::int32_t obs_index = 0;
  double t = 0.0;
  std::optional<double> tau_gt;      // mean ground truth over the shape's points
  std::optional<double> tau_gt_arm;
  std::optional<double> tau_gt_leg;
  double tau_mean = 0.0;
  double tau_mean_clipped = 0.0;
  std::optional<double> tau_weighted;
  std::optional<double> tau_arm;     // mean estimate over arm points
  std::optional<double> tau_leg;
};

/// Time estimates for every shape of the dataset.
std::vector<ShapeTime> estimate_shape_times(const GaussianFieldParams& forward, const MlpParams& inverse,
                                            const Dataset& dataset, bool fisher_weighted);

struct LongitudinalPair {
  std::int64_t subject_id = 0;
  std::int32_t obs0 = 0;
  std::int32_t obs1 = 0;
  double t0 = 0.0;
  double t1 = 0.0;
  double tau0 = 0.0;
  double z = 0.0;
  double tau1 = 0.0;
  ShapeMetrics metrics;
};

/// Anchors each subject at its earliest observation and predicts the later ones.
std::vector<LongitudinalPair> evaluate_longitudinal(const GaussianFieldParams& forward, const MlpParams& inverse,
                                                    const Dataset& dataset, std::span<const Vec> template_points,
                                                    std::uint64_t seed);

struct OodRecord {
  std::int64_t subject_id = 0;
  std::int32_t obs_index = 0;
  double t = 0.0;
  OodLabel label = OodLabel::normal;
  double score = 0.0;
  std::int32_t argmin_vertex = 0;
  double tau_max = 0.0;
};

std::vector<OodRecord> score_shapes(const GaussianFieldParams& forward, const MlpParams& inverse,
                                    const Dataset& dataset, OodLabel label);

/// AUC with anomalies as positives and -score as the statistic.
double ood_auc(std::span<const OodRecord> records);

/// sqrt(1 / I_mu) at a point over a time grid.
struct SigmaCurve {
  std::string name;
  Vec point;
  std::vector<double> t;
  std::vector<double> estimated;
  std::vector<double> truth;  // empty when unknown
};

SigmaCurve sigma_curve(const GaussianFieldParams& forward, const std::string& name, const Vec& point,
                       std::span<const double> t_grid, const std::optional<starman::LogisticParams>& truth);

/// Evenly spaced grid of n points in [lo, hi].
std::vector<double> linspace(double lo, double hi, int n);

/// Scatter of t vs estimated tau with the model's +-2 sigma band.
std::string fig3_svg(std::span<const ShapeTime> times, std::span<const double> band_t,
                     std::span<const double> band_sigma);

/// Ground-truth vs estimated temporal uncertainty curves.
std::string fig4_svg(std::span<const SigmaCurve> curves);

}  // namespace prism::report
