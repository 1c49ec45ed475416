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

#include <cmath>
#include <numbers>
#include <vector>

#include <Eigen/Eigenvalues>

#include "oracles.hpp"
#include "prism/errors.hpp"
#include "prism/gaussian_field.hpp"
#include "prism/starman.hpp"

using namespace prism;

namespace {

Vec vec2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

Mat diag2(double a, double b) {
  Mat m = Mat::Zero(2, 2);
  m(0, 0) = a;
  m(1, 1) = b;
  return m;
}

// Field network whose output layer is all zero: mu = 0 and F = (log 2 + floor) I.
GaussianFieldParams zero_output_field() {
  auto params = init_params(NetArch::field(2, 2, 8, 1), 1);
  const auto cov = params.covariance_head_ranges();
  // mean head rows live right before the covariance head in the last layer
  const std::size_t last_w = cov[0].first - 2 * 8;
  for (std::size_t i = last_w; i < params.weights.size(); ++i) params.weights[i] = 0.0;
  return params;
}

ShapeSample sample(const Vec& p, double t, const Vec& d) {
  ShapeSample s;
  s.p = p;
  s.t = t;
  s.d = d;
  return s;
}

Dataset small_starman(int train, int test, std::uint64_t seed) {
  auto cfg = starman::StarmanConfig::defaults(starman::Variant::G, seed);
  cfg.n_train_subjects = train;
  cfg.n_test_subjects = test;
  return starman::generate(cfg).dataset;
}

}  // namespace

TEST_CASE("per-sample NLL on hand examples") {
  const Mat eye = Mat::Identity(2, 2);
  CHECK(gaussian_half_nll(vec2(0.3, 0.1), eye, vec2(0.3, 0.1)) == 0.0);
  CHECK(gaussian_half_nll(vec2(0, 0), eye, vec2(1, 0)) == doctest::Approx(0.5).epsilon(1e-15));
  // Sigma = diag(1, 4): ((1 + 1/4) + log 4) / 2
  const double expect = 0.5 * (1.25 + std::log(4.0));
  CHECK(gaussian_half_nll(vec2(0, 0), diag2(1, 2), vec2(1, 1)) == doctest::Approx(expect).epsilon(1e-14));
  CHECK(expect == doctest::Approx(1.3181).epsilon(1e-4));
}

TEST_CASE("tape losses on a zero-output field") {
  const auto params = zero_output_field();
  std::vector<ShapeSample> batch = {sample(vec2(0.2, 0.1), 0.5, vec2(3.0, -4.0))};
  ad::Tape tape;
  CHECK(l1_warmup_loss(tape, params, batch).value() == doctest::Approx(3.5).epsilon(1e-15));

  batch[0].d = vec2(0.0, 0.0);
  ad::Tape t2;
  CHECK(l1_warmup_loss(t2, params, batch).value() == 0.0);

  const double l = std::log(2.0) + kDefaultCholFloor;
  const double var = l * l + kDefaultCholFloor * kDefaultCholFloor;
  ad::Tape t3;
  CHECK(nll_loss(t3, params, batch).value() == doctest::Approx(std::log(var)).epsilon(1e-14));
}

TEST_CASE("log density") {
  const Mat eye = Mat::Identity(2, 2);
  CHECK(log_density(vec2(0, 0), eye, vec2(0, 0)) == doctest::Approx(-std::log(2 * std::numbers::pi)));
  CHECK(log_density(vec2(0, 0), eye, vec2(0, 0)) == doctest::Approx(-1.8379).epsilon(1e-4));

  const auto params = oracle::random_field(NetArch::field(2, 2, 16, 2), 5);
  const Vec p = vec2(0.4, -0.3);
  const auto f = forward_field(params, p, 0.6);
  const Vec dir = vec2(0.6, 0.8);
  double prev = log_density(params, p, 0.6, f.mu);
  for (int k = 1; k <= 50; ++k) {
    const double cur = log_density(params, p, 0.6, Vec(f.mu + 0.05 * k * dir));
    CHECK(cur < prev);
    prev = cur;
  }
}

TEST_CASE("density integrates to one") {
  // Uniform quadrature over a box aligned with the eigenvectors of Sigma,
  // six standard deviations each way.
  const auto params = oracle::random_field(NetArch::field(2, 2, 16, 2), 6);
  const Vec p = vec2(-0.2, 0.5);
  const auto f = forward_field(params, p, 0.3);
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es{Eigen::Matrix2d(f.covariance())};
  const Eigen::Vector2d half = 6.0 * es.eigenvalues().cwiseSqrt();
  const double area = 4.0 * half[0] * half[1];
  Rng rng(6, 0);
  const int n = 1'000'000;
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector2d u(rng.uniform(-half[0], half[0]), rng.uniform(-half[1], half[1]));
    const Vec d = f.mu + es.eigenvectors() * u;
    acc += std::exp(log_density(f.mu, f.chol, d));
  }
  CHECK(std::fabs(area * acc / n - 1.0) <= 0.01);
}

TEST_CASE("NLL weight gradients match central differences") {
  auto params = oracle::random_field(NetArch::field(2, 2, 12, 2), 7);
  const auto data = small_starman(3, 0, 7);
  const std::vector<ShapeSample> batch(data.samples.begin(), data.samples.begin() + 64);

  ad::Tape tape;
  std::vector<ad::Var> w;
  const ad::Var loss = nll_loss(tape, params, batch, &w);
  const auto& g = tape.backward(loss);

  Rng rng(7, 3);
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    const auto i = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(w.size()) - 1));
    const auto f = [&](std::vector<double> x) {
      auto q = params;
      q.weights[i] = x[0];
      return evaluate_losses(q, batch).nll;
    };
    const double fd = oracle::central_diff(f, {params.weights[i]}, 0, 1e-5);
    worst = std::max(worst, oracle::rel_err(g[w[i].id], fd));
  }
  CHECK(worst <= 1e-4);
}

TEST_CASE("batched loss and gradient agree with the tape") {
  const auto params = oracle::random_field(NetArch::field(2, 2, 12, 2), 8);
  const auto data = small_starman(4, 0, 8);
  const std::vector<ShapeSample> batch(data.samples.begin(), data.samples.begin() + 150);
  std::vector<const ShapeSample*> ptrs;
  for (const auto& s : batch) ptrs.push_back(&s);

  const LossWeights lw{0.7, 1.3};
  std::vector<double> grad(params.weights.size());
  const auto lv = loss_and_grad(params, ptrs, lw, grad);

  ad::Tape tape;
  std::vector<ad::Var> w;
  const ad::Var nll = nll_loss(tape, params, batch, &w);
  std::vector<ad::Var> w2;
  const ad::Var l1 = l1_warmup_loss(tape, params, batch, &w2);
  CHECK(lv.nll == doctest::Approx(nll.value()).epsilon(1e-12));
  CHECK(lv.l1 == doctest::Approx(l1.value()).epsilon(1e-12));
  const std::vector<double> g_nll = tape.backward(nll);
  const std::vector<double> g_l1 = tape.backward(l1);
  for (std::size_t i = 0; i < grad.size(); ++i) {
    const double expect = lw.l1 * g_l1[w2[i].id] + lw.nll * g_nll[w[i].id];
    CHECK(grad[i] == doctest::Approx(expect).epsilon(1e-9).scale(1e-12));
  }
}

TEST_CASE("first Adam step moves each weight by lr against the gradient sign") {
  Adam adam(3);
  std::vector<double> x = {1.0, 2.0, 3.0};
  const std::vector<double> g = {0.5, -2.0, 0.0};
  adam.step(x, g, 0.1);
  CHECK(x[0] == doctest::Approx(0.9).epsilon(1e-6));
  CHECK(x[1] == doctest::Approx(2.1).epsilon(1e-6));
  CHECK(x[2] == 3.0);
  CHECK(adam.steps() == 1);
}

TEST_CASE("config validation") {
  TrainConfig c;
  c.warm_epochs = 5;
  c.epochs = 3;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.lr_min = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("training is deterministic and freezes the covariance head during warm-up") {
  const auto data = small_starman(6, 0, 9);
  const auto arch = NetArch::field(2, 2, 16, 2);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.warm_epochs = 3;
  cfg.batch_size = 128;
  cfg.seed = 9;
  const auto a = train(data, arch, cfg);
  const auto b = train(data, arch, cfg);
  CHECK(a.params.weights == b.params.weights);
  REQUIRE(a.log.size() == 3);
  for (const auto& e : a.log) CHECK(e.stage == 1);

  const auto init = init_params(arch, cfg.seed);
  for (auto [lo, hi] : init.covariance_head_ranges())
    for (std::size_t i = lo; i < hi; ++i) CHECK(a.params.weights[i] == init.weights[i]);

  cfg.epochs = 4;
  const auto c = train(data, arch, cfg);
  CHECK(c.log.back().stage == 2);
  bool moved = false;
  for (auto [lo, hi] : init.covariance_head_ranges())
    for (std::size_t i = lo; i < hi; ++i) moved |= c.params.weights[i] != init.weights[i];
  CHECK(moved);
}

TEST_CASE("non-finite data raises a divergence error with the epoch") {
  Dataset data;
  data.samples.push_back(sample(vec2(0, 0), 0.5, vec2(std::nan(""), 0.0)));
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.warm_epochs = 0;
  try {
    train(data, NetArch::field(2, 1, 4, 0), cfg);
    FAIL("expected DivergenceError");
  } catch (const DivergenceError& e) {
    CHECK(e.epoch() == 1);
  }
}

TEST_CASE("degenerate batch of identical samples trains without collapse") {
  Dataset data;
  for (int i = 0; i < 64; ++i) data.samples.push_back(sample(vec2(0.1, 0.2), 0.5, vec2(0.3, 0.3)));
  TrainConfig cfg;
  cfg.epochs = 20;
  cfg.warm_epochs = 2;
  cfg.lr = 1e-2;
  cfg.batch_size = 64;
  const auto r = train(data, NetArch::field(2, 1, 8, 0, 1e-3), cfg);
  const auto f = forward_field(r.params, vec2(0.1, 0.2), 0.5);
  CHECK(std::isfinite(r.log.back().nll));
  CHECK(f.factor(0, 0) >= 1e-3);
  CHECK(f.factor(1, 1) >= 1e-3);
  CHECK(f.chol(0, 0) >= 1e-3);
  CHECK(f.chol(1, 1) >= 1e-3);
}

TEST_CASE("warm-up halves held-out L1 and training beats a constant Gaussian") {
  const auto data = small_starman(40, 20, 10);
  const auto train_set = data.filter(Split::train);
  const auto test_set = data.filter(Split::test);
  const auto arch = NetArch::field(2, 2, 32, 3, 1e-3);
  TrainConfig cfg;
  cfg.warm_epochs = 10;
  cfg.epochs = 10;
  cfg.lr = 2e-3;
  cfg.batch_size = 256;
  cfg.seed = 10;
  const double l1_init = mean_l1(init_params(arch, cfg.seed), test_set.samples);
  const auto warm = train(train_set, arch, cfg);
  CHECK(mean_l1(warm.params, test_set.samples) <= 0.5 * l1_init);

  cfg.epochs = 30;
  const auto full = train(train_set, arch, cfg);
  const double model_nll = evaluate_losses(full.params, test_set.samples).nll;
  CHECK(model_nll < constant_gaussian_nll(train_set.samples, test_set.samples));
}

TEST_CASE("constant Gaussian baseline matches a direct fit") {
  std::vector<ShapeSample> s = {sample(vec2(0, 0), 0, vec2(1, 0)), sample(vec2(0, 0), 0, vec2(-1, 0)),
                                sample(vec2(0, 0), 0, vec2(0, 2)), sample(vec2(0, 0), 0, vec2(0, -2))};
  // mean 0, covariance diag(0.5, 2)
  const double expect_first = 0.5 * (1.0 / 0.5 + std::log(0.5 * 2.0));
  const std::vector<ShapeSample> one = {s[0]};
  CHECK(constant_gaussian_nll(s, one) == doctest::Approx(expect_first).epsilon(1e-14));
}
