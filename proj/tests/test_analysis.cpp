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

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "oracles.hpp"
#include "prism/analysis.hpp"
#include "prism/errors.hpp"
#include "prism/fisher.hpp"

using namespace prism;

namespace {

Vec vec2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

std::vector<Vec> cloud(int n, std::uint64_t seed) {
  Rng rng(seed, 0);
  std::vector<Vec> pts;
  for (int i = 0; i < n; ++i) pts.push_back(vec2(rng.uniform(-1, 1), rng.uniform(-1, 1)));
  return pts;
}

double brute_force_assignment(const Eigen::MatrixXd& cost) {
  std::vector<int> perm(cost.rows());
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double c = 0.0;
    for (int i = 0; i < cost.rows(); ++i) c += cost(i, perm[i]);
    best = std::min(best, c);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace

TEST_CASE("mean time estimate") {
  const std::vector<double> c(7, 0.4);
  CHECK(estimate_time_mean(c) == doctest::Approx(0.4).epsilon(1e-15));
  const std::vector<double> two = {0.2, 0.6};
  CHECK(estimate_time_mean(two) == doctest::Approx(0.4).epsilon(1e-15));
  CHECK_THROWS_AS(estimate_time_mean(std::vector<double>{}), EmptyShapeError);
}

TEST_CASE("weighted time estimate") {
  const std::vector<double> map = {0.1, 0.5, 0.35, 0.9};
  const std::vector<double> ones(4, 1.0);
  CHECK(estimate_time_weighted(map, ones) == estimate_time_mean(map));
  const std::vector<double> flat(4, 0.37);
  CHECK(estimate_time_weighted(map, flat) == doctest::Approx(estimate_time_mean(map)).epsilon(1e-15));
  const std::vector<double> spike = {0.0, 1.0, 0.0, 0.0};
  CHECK(estimate_time_weighted(map, spike) == 0.5);
  const std::vector<double> tiny(4, 1e-9);
  CHECK_THROWS_AS(estimate_time_weighted(map, tiny), UnidentifiableError);

  const auto params = oracle::random_field(NetArch::field(2, 2, 16, 2), 1);
  const std::vector<Vec> pts = {vec2(0.1, 0.2), vec2(-0.4, 0.3), vec2(0.6, -0.1), vec2(0.0, 0.9)};
  const auto est = estimate_time_weighted(map, params, pts, 0.4);
  CHECK(est.method == TimeMethod::fisher_weighted);
  REQUIRE(est.t_chron.has_value());
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double w = fisher_full(params, pts[i], 0.4).I_mu;
    num += w * map[i];
    den += w;
  }
  CHECK(est.tau_bar == doctest::Approx(num / den).epsilon(1e-12));
}

TEST_CASE("OOD score") {
  const std::vector<double> uniform(5, 0.3);
  const std::vector<double> sigma = {0.1, 0.2, 0.1, 0.3, 0.1};
  CHECK(ood_score(uniform, sigma).score == 0.0);

  const std::vector<double> map = {0.5, 0.2, 0.45, 0.5, 0.48};
  const auto r = ood_score(map, sigma);
  CHECK(r.tau_max == 0.5);
  CHECK(r.argmin_point == 1);
  CHECK(r.score == doctest::Approx(-1.5));
  CHECK(r.score <= 0.0);

  std::vector<double> shifted = map;
  for (auto& v : shifted) v += 0.25;
  CHECK(ood_score(shifted, sigma).score == doctest::Approx(r.score).epsilon(1e-12));

  // unidentifiable points are skipped, also for the max
  const double inf = std::numeric_limits<double>::infinity();
  const std::vector<double> sig2 = {inf, 0.1, 0.1, 0.1, 0.1};
  const std::vector<double> map2 = {5.0, 0.2, 0.4, 0.4, 0.4};
  CHECK(ood_score(map2, sig2).tau_max == 0.4);
  CHECK(ood_score(map2, sig2).score == doctest::Approx(-2.0));
  CHECK_THROWS_AS(ood_score(map2, std::vector<double>(5, inf)), AllUnidentifiableError);
  CHECK_THROWS_AS(ood_score(std::vector<double>{}, std::vector<double>{}), EmptyShapeError);

  Rng rng(3, 0);
  for (int k = 0; k < 50; ++k) {
    std::vector<double> m(10), s(10);
    for (int i = 0; i < 10; ++i) {
      m[i] = rng.normal();
      s[i] = rng.uniform(0.01, 1.0);
    }
    CHECK(ood_score(m, s).score < 0.0);
  }
}

TEST_CASE("longitudinal prediction") {
  const auto params = oracle::random_field(NetArch::field(2, 2, 16, 2), 2);
  const std::vector<Vec> pts = {vec2(0.1, 0.2), vec2(-0.4, 0.3), vec2(0.6, -0.1)};

  // on the mean trajectory: z = 0 and the mean shape at t1
  const auto onmean = predict_longitudinal(params, pts, 0.3, 0.3, 0.7, {});
  CHECK(onmean.z == 0.0);
  CHECK(onmean.tau1 == 0.7);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Vec expect = pts[i] + forward_field(params, pts[i], 0.7).mu;
    CHECK((onmean.shape[i] - expect).norm() <= 1e-12);
  }

  const auto same = predict_longitudinal(params, pts, 0.42, 0.3, 0.3, {});
  CHECK(same.tau1 == 0.42);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Vec expect = pts[i] + forward_field(params, pts[i], 0.42).mu;
    CHECK((same.shape[i] - expect).norm() <= 1e-12);
  }

  const auto moved = predict_longitudinal(params, pts, 0.35, 0.3, 0.6, {});
  const double s0 = population_sigma_tau(params, pts, 0.3);
  const double s1 = population_sigma_tau(params, pts, 0.6);
  CHECK(moved.z == doctest::Approx(0.05 / s0));
  CHECK(moved.tau1 == doctest::Approx(0.6 + 0.05 / s0 * s1));
  CHECK_FALSE(moved.extrapolated);
  CHECK(predict_longitudinal(params, pts, 0.35, 0.3, 1.2, {}).extrapolated);
}

TEST_CASE("population temporal spread") {
  const auto params = oracle::random_field(NetArch::field(2, 2, 16, 2), 3);
  const std::vector<Vec> pts = {vec2(0.1, 0.2), vec2(-0.4, 0.3)};
  const double i0 = fisher_full(params, pts[0], 0.5).I_mu;
  const double i1 = fisher_full(params, pts[1], 0.5).I_mu;
  CHECK(population_sigma_tau(params, pts, 0.5) == doctest::Approx(std::sqrt(2.0 / (i0 + i1))).epsilon(1e-12));
}

TEST_CASE("scalar metrics") {
  const std::vector<double> truth = {0.1, 0.4, 0.35, 0.8, 0.55};
  const auto same = scalar_metrics(truth, truth);
  CHECK(same.r == doctest::Approx(1.0));
  CHECK(same.r2 == 1.0);
  CHECK(same.mae == 0.0);

  std::vector<double> off = truth;
  for (auto& v : off) v += 0.2;
  const auto m = scalar_metrics(off, truth);
  CHECK(m.r == doctest::Approx(1.0));
  CHECK(m.mae == doctest::Approx(0.2));
  CHECK_THROWS_AS(scalar_metrics(truth, std::vector<double>(5, 0.3)), DegenerateError);
}

TEST_CASE("rank statistics") {
  const std::vector<double> a = {1, 2, 3, 4, 5};
  const std::vector<double> b = {1, 4, 9, 16, 25};
  CHECK(spearman(a, b) == doctest::Approx(1.0));
  const std::vector<double> rev = {5, 4, 3, 2, 1};
  CHECK(spearman(a, rev) == doctest::Approx(-1.0));
  // ties take average ranks: (1, 2.5, 2.5, 4)
  const std::vector<double> x = {1, 2, 3, 4};
  const std::vector<double> y = {10, 20, 20, 30};
  CHECK(spearman(x, y) == doctest::Approx(pearson(x, std::vector<double>{1, 2.5, 2.5, 4})));

  Rng rng(4, 0);
  std::vector<double> pos(37), neg(53);
  for (auto& v : pos) v = std::round(rng.normal() * 4) + 1;
  for (auto& v : neg) v = std::round(rng.normal() * 4);
  double wins = 0.0;
  for (double p : pos)
    for (double n : neg) wins += p > n ? 1.0 : (p == n ? 0.5 : 0.0);
  CHECK(auc(pos, neg) == doctest::Approx(wins / (pos.size() * neg.size())).epsilon(1e-14));
  CHECK(auc(std::vector<double>{2, 3}, std::vector<double>{0, 1}) == 1.0);
}

TEST_CASE("Hungarian assignment matches brute force") {
  Rng rng(5, 0);
  for (int n = 1; n <= 7; ++n) {
    for (int rep = 0; rep < 5; ++rep) {
      Eigen::MatrixXd cost(n, n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) cost(i, j) = std::round(rng.uniform(0, 10) * 4) / 4;
      const auto m = hungarian(cost);
      std::vector<int> seen(n, 0);
      double total = 0.0;
      for (int i = 0; i < n; ++i) {
        seen[m[i]]++;
        total += cost(i, m[i]);
      }
      for (int s : seen) CHECK(s == 1);
      CHECK(total == doctest::Approx(brute_force_assignment(cost)).epsilon(1e-12));
    }
  }
}

TEST_CASE("shape metrics") {
  const auto a = cloud(60, 6);
  const auto self = shape_metrics(a, a);
  CHECK(self.chamfer == 0.0);
  CHECK(self.hausdorff == 0.0);
  CHECK(self.emd == 0.0);

  // two points one unit apart in x, shifted by one unit in y: nearest
  // neighbours are the shifted copies
  const std::vector<Vec> p = {vec2(0, 0), vec2(5, 0)};
  const std::vector<Vec> q = {vec2(0, 1), vec2(5, 1)};
  CHECK(chamfer(p, q) == doctest::Approx(1.0));
  CHECK(hausdorff(p, q) == doctest::Approx(1.0));
  CHECK(emd(p, q) == doctest::Approx(1.0));

  std::vector<Vec> shifted = a;
  for (auto& v : shifted) v += vec2(0.001, 0.0);
  CHECK(emd(a, shifted) == doctest::Approx(0.001).epsilon(1e-9));
  CHECK(chamfer(a, shifted) <= 0.001 + 1e-15);

  const auto big = cloud(700, 7);
  CHECK(emd(big, big, 1000) == 0.0);
  CHECK(emd(big, cloud(700, 8), 64, 1) == emd(big, cloud(700, 8), 64, 1));
  CHECK_THROWS_AS(chamfer(a, std::vector<Vec>{}), EmptyShapeError);
}
