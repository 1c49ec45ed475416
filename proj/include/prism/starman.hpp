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

// Starman synthetic shape populations with known intrinsic time.
//
// The template is a five-pointed star (head, two arms, two legs) with outer
// radius 1 and inner radius 0.4, resampled to n_vertices points equally
// spaced by arc length starting at the head tip (0, 1) and running
// counter-clockwise. With 100 vertices every star corner is a vertex.
// Control points sit on the limb tips:
//
//   c0 right arm ( cos 18deg,  sin 18deg)   v0 = (0, 1)
//   c1 left arm  ( cos 162deg, sin 162deg)  v1 = (0, 1)
//   c2 left leg  ( cos 234deg, sin 234deg)  v2 = (-1, 0)
//   c3 right leg ( cos 306deg, sin 306deg)  v3 = (1, 0)
//
// A vertex displaces by sum_i tau_i * exp(-|p - c_i|^2 / (2 sigma^2)) * v_i and
// intrinsic time follows tau = t + z * sigma_tau(t) with a logistic sigma_tau.

#include <array>
#include <cstdint>
#include <vector>

#include "prism/sample.hpp"
#include "prism/types.hpp"

namespace prism::starman {

enum class Variant : std::uint8_t { G, L };

struct LogisticParams {
  double sigma_min = 0.01;
  double sigma_max = 0.20;
  double t50 = 0.88;
  double k = 0.12;
};

constexpr int kControls = 4;

struct StarmanConfig {
  Variant variant = Variant::G;
  int n_vertices = 100;
  double outer_radius = 1.0;
  double inner_radius = 0.4;
  std::array<Vec, kControls> control_points;
  std::array<Vec, kControls> directions;
  double rbf_sigma = 0.5;
  LogisticParams sigma_global{0.01, 0.20, 0.88, 0.12};
  LogisticParams sigma_arm{0.01, 0.15, 0.30, 0.10};
  LogisticParams sigma_leg{0.01, 0.20, 0.88, 0.12};
  int n_train_subjects = 1000;
  int n_test_subjects = 1000;
  int min_obs = 1;
  int max_obs = 9;
  double t_min = 0.0;
  double t_max = 1.0;
  std::uint64_t seed = 0;

  static StarmanConfig defaults(Variant variant, std::uint64_t seed);
  /// Throws ConfigError on invalid constants.
  void validate() const;
  Limb control_limb(int i) const { return i < 2 ? Limb::arm : Limb::leg; }
};

struct Template {
  std::vector<Vec> vertices;
  std::vector<std::optional<Limb>> labels;  // nullopt for torso points far from every control
  std::vector<int> nearest_control;         // -1 for torso points
};

Template make_template(const StarmanConfig& config);

double sigma_tau(double t, const LogisticParams& params);

/// Per-control RBF weight exp(-|p - c_i|^2 / (2 sigma^2)).
double rbf_weight(const Vec& p, int control, const StarmanConfig& config);

/// Displacement of template point p for per-control intrinsic times.
Vec deform(const Vec& p, const std::array<double, kControls>& taus, const StarmanConfig& config);

struct Observation {
  double t = 0.0;
  double tau_arm = 0.0;
  double tau_leg = 0.0;
  std::vector<Vec> vertices;  // deformed positions p + d
};

struct Subject {
  std::int64_t subject_id = 0;
  Split split = Split::train;
  double z = 0.0;
  std::vector<Observation> observations;
};

struct GeneratedData {
  Dataset dataset;
  std::vector<Subject> subjects;
};

/// Per-control intrinsic times for an observation.
std::array<double, kControls> control_taus(double tau_arm, double tau_leg);

/// Intrinsic times (arm, leg) at chronological time t for latent z.
std::pair<double, double> intrinsic_times(double t, double z, const StarmanConfig& config);

/// Ground-truth sigma_tau(t) of a limb for the configured variant.
double limb_sigma(double t, Limb limb, const StarmanConfig& config);

GeneratedData generate(const StarmanConfig& config);

struct OodData {
  Dataset normal;
  Dataset anomalous;  // same shapes with one limb lagged
  int lagged_control = 0;
};

/// Test split twice: as generated, and with control `lagged_control`'s
/// intrinsic time reduced by `lag`.
OodData make_synthetic_ood(const StarmanConfig& config, double lag, int lagged_control = 0);

}  // namespace prism::starman
