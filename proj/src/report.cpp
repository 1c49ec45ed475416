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

#include "prism/report.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include <fmt/format.h>

#include "prism/errors.hpp"
#include "prism/inverse_encoder.hpp"

namespace prism::report {

Csv::Csv(std::vector<std::string> columns, const std::string& provenance) : n_cols_(columns.size()) {
  text_ = "# " + provenance + "\n";
  add(std::move(columns));
}

Csv& Csv::add(std::vector<std::string> cells) {
  if (cells.size() != n_cols_) throw ConfigError("csv: row has the wrong number of cells");
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) text_ += ',';
    text_ += cells[i];
  }
  text_ += '\n';
  return *this;
}

std::string Csv::str() const { return text_; }
std::string Csv::num(double v) { return fmt::format("{}", v); }
std::string Csv::num(std::int64_t v) { return fmt::format("{}", v); }
std::string Csv::opt(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

std::string provenance_line(const std::string& ckpt_hash, const std::string& dataset_hash) {
  return fmt::format("ckpt_sha256={} dataset_sha256={}", ckpt_hash.empty() ? "none" : ckpt_hash,
                     dataset_hash.empty() ? "none" : dataset_hash);
}

namespace {

struct Flat {
  std::vector<Vec> p, d;
  std::vector<std::size_t> begin;  // per shape offset into p/d, plus a final end
};

Flat flatten(const std::vector<ShapeView>& shapes) {
  Flat f;
  f.begin.push_back(0);
  for (const auto& s : shapes) {
    for (const auto& x : s.points) {
      f.p.push_back(x.p);
      f.d.push_back(x.d);
    }
    f.begin.push_back(f.p.size());
  }
  return f;
}

std::optional<double> mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::nullopt;
  double acc = 0.0;
  for (double x : v) acc += x;
  return acc / static_cast<double>(v.size());
}

}  // namespace

std::vector<ShapeTime> estimate_shape_times(const GaussianFieldParams& forward, const MlpParams& inverse,
                                            const Dataset& dataset, bool fisher_weighted) {
  const auto shapes = dataset.shapes();
  const Flat flat = flatten(shapes);
  const auto map = time_map(inverse, flat.p, flat.d);

  std::vector<double> weights;
  if (fisher_weighted) {
    std::vector<FieldQuery> q(flat.p.size());
    for (std::size_t s = 0; s < shapes.size(); ++s) {
      for (std::size_t i = flat.begin[s]; i < flat.begin[s + 1]; ++i) q[i] = {flat.p[i], shapes[s].t};
    }
    const auto reports = fisher_grid(forward, q);
    weights.resize(reports.size());
    for (std::size_t i = 0; i < reports.size(); ++i) weights[i] = reports[i].I_mu;
  }

  std::vector<ShapeTime> out(shapes.size());
  for (std::size_t s = 0; s < shapes.size(); ++s) {
    const auto& view = shapes[s];
    const std::size_t b = flat.begin[s], e = flat.begin[s + 1];
    ShapeTime& st = out[s];
    st.subject_id = view.subject_id;
    st.obs_index = view.obs_index;
    st.t = view.t;
    const std::span<const double> m(map.data() + b, e - b);
    st.tau_mean = estimate_time_mean(m);
    st.tau_mean_clipped = std::clamp(st.tau_mean, dataset.t_min, dataset.t_max);
    if (fisher_weighted) {
      try {
        st.tau_weighted = estimate_time_weighted(m, std::span<const double>(weights.data() + b, e - b));
      } catch (const UnidentifiableError&) {
        st.tau_weighted.reset();
      }
    }
    std::vector<double> gt, gt_arm, gt_leg, est_arm, est_leg;
    for (std::size_t k = 0; k < view.points.size(); ++k) {
      const ShapeSample& x = view.points[k];
      if (x.tau_gt) gt.push_back(*x.tau_gt);
      if (!x.limb) continue;
      auto& g = *x.limb == Limb::arm ? gt_arm : gt_leg;
      auto& est = *x.limb == Limb::arm ? est_arm : est_leg;
      if (x.tau_gt) g.push_back(*x.tau_gt);
      est.push_back(m[k]);
    }
    st.tau_gt = mean_of(gt);
    st.tau_gt_arm = mean_of(gt_arm);
    st.tau_gt_leg = mean_of(gt_leg);
    st.tau_arm = mean_of(est_arm);
    st.tau_leg = mean_of(est_leg);
  }
  return out;
}

std::vector<LongitudinalPair> evaluate_longitudinal(const GaussianFieldParams& forward, const MlpParams& inverse,
                                                    const Dataset& dataset, std::span<const Vec> template_points,
                                                    std::uint64_t seed) {
  const auto shapes = dataset.shapes();
  std::map<std::int64_t, std::vector<std::size_t>> by_subject;
  for (std::size_t s = 0; s < shapes.size(); ++s) by_subject[shapes[s].subject_id].push_back(s);

  // Population sigma is shared by every pair at the same t, cache it.
  std::map<double, double> sigma_cache;
  auto sigma_at = [&](double t) {
    auto it = sigma_cache.find(t);
    if (it == sigma_cache.end()) it = sigma_cache.emplace(t, population_sigma_tau(forward, template_points, t)).first;
    return it->second;
  };

  std::vector<LongitudinalPair> out;
  for (auto& [subject, idx] : by_subject) {
    if (idx.size() < 2) continue;
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return shapes[a].t < shapes[b].t; });
    const ShapeView& anchor = shapes[idx.front()];
    std::vector<Vec> p0, d0;
    for (const auto& x : anchor.points) {
      p0.push_back(x.p);
      d0.push_back(x.d);
    }
    const double tau0 = estimate_time_mean(time_map(inverse, p0, d0));
    const double s0 = sigma_at(anchor.t);
    for (std::size_t k = 1; k < idx.size(); ++k) {
      const ShapeView& target = shapes[idx[k]];
      LongitudinalPair pair;
      pair.subject_id = subject;
      pair.obs0 = anchor.obs_index;
      pair.obs1 = target.obs_index;
      pair.t0 = anchor.t;
      pair.t1 = target.t;
      pair.tau0 = tau0;
      pair.z = (tau0 - anchor.t) / s0;
      pair.tau1 = target.t == anchor.t ? tau0 : target.t + pair.z * sigma_at(target.t);

      std::vector<FieldQuery> q;
      std::vector<Vec> truth;
      for (const auto& x : target.points) {
        q.push_back({x.p, pair.tau1});
        truth.push_back(x.p + x.d);
      }
      const auto fields = forward_field_batch(forward, q);
      std::vector<Vec> pred(fields.size());
      for (std::size_t i = 0; i < fields.size(); ++i) pred[i] = q[i].p + fields[i].mu;
      pair.metrics = shape_metrics(pred, truth, seed ^ static_cast<std::uint64_t>(subject));
      out.push_back(pair);
    }
  }
  return out;
}

std::vector<OodRecord> score_shapes(const GaussianFieldParams& forward, const MlpParams& inverse,
                                    const Dataset& dataset, OodLabel label) {
  const auto shapes = dataset.shapes();
  const Flat flat = flatten(shapes);
  const auto map = time_map(inverse, flat.p, flat.d);
  std::vector<FieldQuery> q(flat.p.size());
  for (std::size_t s = 0; s < shapes.size(); ++s) {
    for (std::size_t i = flat.begin[s]; i < flat.begin[s + 1]; ++i) q[i] = {flat.p[i], shapes[s].t};
  }
  const auto reports = fisher_grid(forward, q);
  std::vector<double> sigma(reports.size());
  for (std::size_t i = 0; i < reports.size(); ++i) {
    sigma[i] = reports[i].identifiable() ? std::sqrt(reports[i].sigma2_tau) : std::numeric_limits<double>::infinity();
  }

  std::vector<OodRecord> out(shapes.size());
  for (std::size_t s = 0; s < shapes.size(); ++s) {
    const std::size_t b = flat.begin[s], e = flat.begin[s + 1];
    const OodResult r = ood_score(std::span<const double>(map.data() + b, e - b),
                                  std::span<const double>(sigma.data() + b, e - b));
    OodRecord& rec = out[s];
    rec.subject_id = shapes[s].subject_id;
    rec.obs_index = shapes[s].obs_index;
    rec.t = shapes[s].t;
    rec.label = label;
    rec.score = r.score;
    rec.argmin_vertex = shapes[s].points[r.argmin_point].vertex;
    rec.tau_max = r.tau_max;
  }
  return out;
}

double ood_auc(std::span<const OodRecord> records) {
  std::vector<double> pos, neg;
  for (const auto& r : records) (r.label == OodLabel::anomalous ? pos : neg).push_back(-r.score);
  return auc(pos, neg);
}

std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out[i] = n == 1 ? lo : lo + (hi - lo) * i / (n - 1);
  return out;
}

SigmaCurve sigma_curve(const GaussianFieldParams& forward, const std::string& name, const Vec& point,
                       std::span<const double> t_grid, const std::optional<starman::LogisticParams>& truth) {
  SigmaCurve c;
  c.name = name;
  c.point = point;
  c.t.assign(t_grid.begin(), t_grid.end());
  std::vector<FieldQuery> q;
  for (double t : t_grid) q.push_back({point, t});
  for (const auto& r : fisher_grid(forward, q)) c.estimated.push_back(std::sqrt(r.sigma2_tau));
  if (truth) {
    for (double t : t_grid) c.truth.push_back(starman::sigma_tau(t, *truth));
  }
  return c;
}

// ---- SVG -------------------------------------------------------------------

namespace {

struct Plot {
  double x0, x1, y0, y1;
  static constexpr double W = 640, H = 480, L = 70, R = 20, T = 30, B = 60;
  std::string body;

  double sx(double x) const { return L + (x - x0) / (x1 - x0) * (W - L - R); }
  double sy(double y) const { return H - B - (y - y0) / (y1 - y0) * (H - T - B); }

  void axes(const std::string& title, const std::string& xl, const std::string& yl) {
    body += fmt::format(R"(<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="black"/>)" "\n", L, T,
                        W - L - R, H - T - B);
    for (int i = 0; i <= 4; ++i) {
      const double xv = x0 + (x1 - x0) * i / 4, yv = y0 + (y1 - y0) * i / 4;
      body += fmt::format(R"(<text x="{:.1f}" y="{:.1f}" font-size="11" text-anchor="middle">{:.3g}</text>)" "\n",
                          sx(xv), H - B + 16, xv);
      body += fmt::format(R"(<text x="{:.1f}" y="{:.1f}" font-size="11" text-anchor="end">{:.3g}</text>)" "\n", L - 6,
                          sy(yv) + 4, yv);
    }
    body += fmt::format(R"(<text x="{}" y="18" font-size="14" text-anchor="middle">{}</text>)" "\n", W / 2, title);
    body += fmt::format(R"(<text x="{}" y="{}" font-size="12" text-anchor="middle">{}</text>)" "\n", W / 2, H - 20, xl);
    body += fmt::format(
        R"svg(<text x="18" y="{}" font-size="12" text-anchor="middle" transform="rotate(-90 18 {})">{}</text>)svg" "\n",
        H / 2, H / 2, yl);
  }

  void polyline(std::span<const double> xs, std::span<const double> ys, const std::string& style) {
    body += "<polyline fill=\"none\" " + style + " points=\"";
    for (std::size_t i = 0; i < xs.size(); ++i) body += fmt::format("{:.2f},{:.2f} ", sx(xs[i]), sy(ys[i]));
    body += "\"/>\n";
  }

  std::string str() const {
    return fmt::format(R"(<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}">)" "\n", W, H) + body +
           "</svg>\n";
  }
};

}  // namespace

std::string fig3_svg(std::span<const ShapeTime> times, std::span<const double> band_t,
                     std::span<const double> band_sigma) {
  double lo = 0.0, hi = 1.0;
  for (const auto& s : times) {
    lo = std::min(lo, s.tau_mean);
    hi = std::max(hi, s.tau_mean);
  }
  Plot plot{0.0, 1.0, lo, hi, {}};
  if (!band_t.empty()) {
    plot.body += "<polygon fill=\"#9ecae1\" fill-opacity=\"0.5\" stroke=\"none\" points=\"";
    for (std::size_t i = 0; i < band_t.size(); ++i) {
      plot.body += fmt::format("{:.2f},{:.2f} ", plot.sx(band_t[i]), plot.sy(band_t[i] + 2 * band_sigma[i]));
    }
    for (std::size_t i = band_t.size(); i-- > 0;) {
      plot.body += fmt::format("{:.2f},{:.2f} ", plot.sx(band_t[i]), plot.sy(band_t[i] - 2 * band_sigma[i]));
    }
    plot.body += "\"/>\n";
  }
  for (const auto& s : times) {
    plot.body += fmt::format(R"(<circle cx="{:.2f}" cy="{:.2f}" r="1.2" fill="#08519c"/>)" "\n", plot.sx(s.t),
                             plot.sy(s.tau_mean));
  }
  const double diag[2] = {0.0, 1.0};
  plot.polyline(diag, diag, R"(stroke="black" stroke-dasharray="4,3")");
  plot.axes("estimated intrinsic time", "chronological time t", "tau estimate");
  return plot.str();
}

std::string fig4_svg(std::span<const SigmaCurve> curves) {
  double hi = 0.0;
  for (const auto& c : curves) {
    for (double v : c.estimated) if (std::isfinite(v)) hi = std::max(hi, v);
    for (double v : c.truth) hi = std::max(hi, v);
  }
  double t_lo = 0.0, t_hi = 1.0;
  if (!curves.empty() && !curves.front().t.empty()) {
    t_lo = curves.front().t.front();
    t_hi = curves.front().t.back();
  }
  Plot plot{t_lo, t_hi, 0.0, hi > 0.0 ? 1.1 * hi : 1.0, {}};
  static const char* colors[] = {"#e6550d", "#3182bd", "#31a354", "#756bb1", "#636363"};
  for (std::size_t i = 0; i < curves.size(); ++i) {
    const auto& c = curves[i];
    const std::string color = colors[i % 5];
    std::vector<double> est = c.estimated;
    for (double& v : est) v = std::isfinite(v) ? v : plot.y1;
    plot.polyline(c.t, est, "stroke=\"" + color + "\" stroke-width=\"2\"");
    if (!c.truth.empty()) plot.polyline(c.t, c.truth, "stroke=\"" + color + "\" stroke-dasharray=\"5,3\"");
    plot.body += fmt::format(R"(<text x="{}" y="{}" font-size="11" fill="{}">{}</text>)" "\n", Plot::L + 10,
                             Plot::T + 16 + 14 * i, color, c.name);
  }
  plot.axes("temporal uncertainty (solid: model, dashed: generator)", "t", "sigma_tau");
  return plot.str();
}

}  // namespace prism::report
