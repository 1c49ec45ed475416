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

#include "prism/starman.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "prism/errors.hpp"
#include "prism/rng.hpp"

namespace prism::starman {

namespace {

Vec vec2(double x, double y) {
  Vec v(2);
  v << x, y;
  return v;
}

Vec polar(double radius, double degrees) {
  const double a = degrees * std::numbers::pi / 180.0;
  return vec2(radius * std::cos(a), radius * std::sin(a));
}

// RBF weight below which a vertex counts as torso.
constexpr double kTorsoWeight = 1e-3;

void validate_logistic(const LogisticParams& p, const char* name, double t_min, double t_max) {
  if (!(p.k > 0.0)) throw ConfigError(std::string(name) + ": k must be positive");
  if (!(p.sigma_min < p.sigma_max)) throw ConfigError(std::string(name) + ": sigma_min must be < sigma_max");
  if (p.t50 < t_min || p.t50 > t_max) throw ConfigError(std::string(name) + ": t50 outside time range");
}

}  // namespace

StarmanConfig StarmanConfig::defaults(Variant variant, std::uint64_t seed) {
  StarmanConfig c;
  c.variant = variant;
  c.seed = seed;
  c.control_points = {polar(1.0, 18.0), polar(1.0, 162.0), polar(1.0, 234.0), polar(1.0, 306.0)};
  c.directions = {vec2(0.0, 1.0), vec2(0.0, 1.0), vec2(-1.0, 0.0), vec2(1.0, 0.0)};
  return c;
}

void StarmanConfig::validate() const {
  if (n_vertices < 10) throw ConfigError("starman: n_vertices must be >= 10");
  if (!(rbf_sigma > 0.0)) throw ConfigError("starman: rbf_sigma must be positive");
  if (!(inner_radius > 0.0 && inner_radius < outer_radius)) throw ConfigError("starman: bad star radii");
  if (!(t_min < t_max)) throw ConfigError("starman: t_min must be < t_max");
  if (min_obs < 1 || max_obs < min_obs) throw ConfigError("starman: bad observation count range");
  if (n_train_subjects < 0 || n_test_subjects < 0) throw ConfigError("starman: negative subject count");
  for (int i = 0; i < kControls; ++i) {
    if (control_points[i].size() != 2 || directions[i].size() != 2) {
      throw ConfigError("starman: control points and directions must be 2D");
    }
  }
  validate_logistic(sigma_global, "sigma_global", t_min, t_max);
  validate_logistic(sigma_arm, "sigma_arm", t_min, t_max);
  validate_logistic(sigma_leg, "sigma_leg", t_min, t_max);
}

Template make_template(const StarmanConfig& config) {
  config.validate();
  // Star corners, counter-clockwise from the head tip.
  std::vector<Vec> corners;
  for (int i = 0; i < 5; ++i) {
    corners.push_back(polar(config.outer_radius, 90.0 + 72.0 * i));
    corners.push_back(polar(config.inner_radius, 90.0 + 72.0 * i + 36.0));
  }
  const std::size_t n_corners = corners.size();
  std::vector<double> cumulative{0.0};
  for (std::size_t i = 0; i < n_corners; ++i) {
    cumulative.push_back(cumulative.back() + (corners[(i + 1) % n_corners] - corners[i]).norm());
  }
  const double perimeter = cumulative.back();

  Template tpl;
  std::size_t edge = 0;
  for (int v = 0; v < config.n_vertices; ++v) {
    const double s = perimeter * v / config.n_vertices;
    while (edge + 1 < n_corners && cumulative[edge + 1] <= s) ++edge;
    const double u = (s - cumulative[edge]) / (cumulative[edge + 1] - cumulative[edge]);
    const Vec& a = corners[edge];
    const Vec& b = corners[(edge + 1) % n_corners];
    tpl.vertices.push_back(a + u * (b - a));
  }
  for (const Vec& p : tpl.vertices) {
    int best = 0;
    double best_dist = (p - config.control_points[0]).squaredNorm();
    for (int i = 1; i < kControls; ++i) {
      const double dist = (p - config.control_points[i]).squaredNorm();
      if (dist < best_dist) {
        best = i;
        best_dist = dist;
      }
    }
    if (rbf_weight(p, best, config) < kTorsoWeight) {
      tpl.labels.emplace_back(std::nullopt);
      tpl.nearest_control.push_back(-1);
    } else {
      tpl.labels.emplace_back(config.control_limb(best));
      tpl.nearest_control.push_back(best);
    }
  }
  return tpl;
}

double sigma_tau(double t, const LogisticParams& p) {
  return p.sigma_min + (p.sigma_max - p.sigma_min) / (1.0 + std::exp(-(t - p.t50) / p.k));
}

double rbf_weight(const Vec& p, int control, const StarmanConfig& config) {
  const double r2 = (p - config.control_points[control]).squaredNorm();
  return std::exp(-r2 / (2.0 * config.rbf_sigma * config.rbf_sigma));
}

Vec deform(const Vec& p, const std::array<double, kControls>& taus, const StarmanConfig& config) {
  Vec d = Vec::Zero(2);
  for (int i = 0; i < kControls; ++i) d += taus[i] * rbf_weight(p, i, config) * config.directions[i];
  return d;
}

std::array<double, kControls> control_taus(double tau_arm, double tau_leg) {
  return {tau_arm, tau_arm, tau_leg, tau_leg};
}

double limb_sigma(double t, Limb limb, const StarmanConfig& config) {
  if (config.variant == Variant::G) return sigma_tau(t, config.sigma_global);
  return sigma_tau(t, limb == Limb::arm ? config.sigma_arm : config.sigma_leg);
}

std::pair<double, double> intrinsic_times(double t, double z, const StarmanConfig& config) {
  return {t + z * limb_sigma(t, Limb::arm, config), t + z * limb_sigma(t, Limb::leg, config)};
}

namespace {

Subject make_subject(const StarmanConfig& config, const Template& tpl, std::int64_t id, Split split) {
  Rng rng(config.seed, static_cast<std::uint64_t>(id));
  Subject s;
  s.subject_id = id;
  s.split = split;
  s.z = rng.normal();
  const auto n_obs = rng.uniform_int(config.min_obs, config.max_obs);
  std::vector<double> times;
  for (std::int64_t i = 0; i < n_obs; ++i) times.push_back(rng.uniform(config.t_min, config.t_max));
  std::sort(times.begin(), times.end());
  for (double t : times) {
    Observation obs;
    obs.t = t;
    std::tie(obs.tau_arm, obs.tau_leg) = intrinsic_times(t, s.z, config);
    const auto taus = control_taus(obs.tau_arm, obs.tau_leg);
    for (const Vec& p : tpl.vertices) obs.vertices.push_back(p + deform(p, taus, config));
    s.observations.push_back(std::move(obs));
  }
  return s;
}

void append_samples(const Subject& s, const Template& tpl, Dataset& out) {
  for (std::size_t o = 0; o < s.observations.size(); ++o) {
    const Observation& obs = s.observations[o];
    for (std::size_t v = 0; v < tpl.vertices.size(); ++v) {
      ShapeSample smp;
      smp.p = tpl.vertices[v];
      smp.d = obs.vertices[v] - tpl.vertices[v];
      smp.t = obs.t;
      smp.subject_id = s.subject_id;
      smp.obs_index = static_cast<std::int32_t>(o);
      smp.vertex = static_cast<std::int32_t>(v);
      smp.split = s.split;
      smp.limb = tpl.labels[v];
      if (tpl.labels[v]) {
        smp.tau_gt = *tpl.labels[v] == Limb::arm ? obs.tau_arm : obs.tau_leg;
      } else {
        smp.tau_gt = 0.5 * (obs.tau_arm + obs.tau_leg);
      }
      out.samples.push_back(std::move(smp));
    }
  }
}

}  // namespace

GeneratedData generate(const StarmanConfig& config) {
  config.validate();
  const Template tpl = make_template(config);
  const std::int64_t n_total = config.n_train_subjects + config.n_test_subjects;
  GeneratedData out;
  out.subjects.resize(static_cast<std::size_t>(n_total));
#pragma omp parallel for schedule(static)
  for (std::int64_t id = 0; id < n_total; ++id) {
    const Split split = id < config.n_train_subjects ? Split::train : Split::test;
    out.subjects[static_cast<std::size_t>(id)] = make_subject(config, tpl, id, split);
  }
  out.dataset.dim = 2;
  out.dataset.t_min = config.t_min;
  out.dataset.t_max = config.t_max;
  for (const Subject& s : out.subjects) append_samples(s, tpl, out.dataset);
  return out;
}

OodData make_synthetic_ood(const StarmanConfig& config, double lag, int lagged_control) {
  if (lag < 0.0) throw ConfigError("make_synthetic_ood: lag must be non-negative");
  if (lagged_control < 0 || lagged_control >= kControls) throw ConfigError("make_synthetic_ood: bad control index");
  const GeneratedData data = generate(config);
  const Template tpl = make_template(config);
  OodData out;
  out.lagged_control = lagged_control;
  out.normal = data.dataset.filter(Split::test);
  out.anomalous = Dataset{out.normal.dim, out.normal.t_min, out.normal.t_max, {}};
  for (const Subject& s : data.subjects) {
    if (s.split != Split::test) continue;
    Subject lagged = s;
    for (Observation& obs : lagged.observations) {
      auto taus = control_taus(obs.tau_arm, obs.tau_leg);
      taus[lagged_control] -= lag;
      for (std::size_t v = 0; v < tpl.vertices.size(); ++v) {
        obs.vertices[v] = tpl.vertices[v] + deform(tpl.vertices[v], taus, config);
      }
    }
    append_samples(lagged, tpl, out.anomalous);
  }
  return out;
}

}  // namespace prism::starman
