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

#include <omp.h>

#include <cmath>
#include <vector>

#include <Eigen/Eigenvalues>

#include "oracles.hpp"
#include "prism/errors.hpp"
#include "prism/network.hpp"

using namespace prism;

namespace {

Vec vec2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

std::vector<FieldQuery> random_queries(int n, int dim, std::uint64_t seed) {
  Rng rng(seed, 5);
  std::vector<FieldQuery> q(n);
  for (auto& x : q) {
    x.p = Vec(dim);
    for (int i = 0; i < dim; ++i) x.p[i] = rng.uniform(-1.0, 1.0);
    x.t = rng.uniform(0.0, 1.0);
  }
  return q;
}

}  // namespace

TEST_CASE("frequency encoding") {
  const std::vector<double> x = {0.1, 0.2, 0.5};
  CHECK(encode_input(x, 0) == x);

  const std::vector<double> zero = {0.0};
  const auto f = encode_input(zero, 1);
  REQUIRE(f.size() == 3);
  CHECK(f[1] == 0.0);
  CHECK(f[2] == 1.0);

  for (int dim : {2, 3}) {
    for (int nf : {0, 1, 4}) {
      const auto arch = NetArch::field(dim, 2, 8, nf);
      CHECK(arch.feature_dim() == (dim + 1) * (1 + 2 * nf));
      std::vector<double> raw(dim + 1, 0.3);
      CHECK(encode_input(raw, nf).size() == static_cast<std::size_t>(arch.feature_dim()));
    }
  }
  const auto inv = NetArch::inverse(2, 2, 8, 3);
  CHECK(inv.feature_dim() == 2 * 7 + 2);
}

TEST_CASE("architecture validation") {
  CHECK_THROWS_AS(NetArch::field(4), ConfigError);
  CHECK_THROWS_AS(NetArch::field(2, 0), ConfigError);
  CHECK_THROWS_AS(NetArch::field(2, 2, 0), ConfigError);
  CHECK_THROWS_AS(NetArch::field(2, 2, 8, 4, 0.0), ConfigError);
}

TEST_CASE("zero covariance head gives softplus(0) plus floor on the diagonal") {
  const auto arch = NetArch::field(2, 2, 16, 2, 1e-4);
  const auto params = init_params(arch, 3);
  const auto out = forward_field(params, vec2(0.3, -0.2), 0.4);
  for (int i = 0; i < 2; ++i) CHECK(out.factor(i, i) == doctest::Approx(std::log(2.0) + 1e-4).epsilon(1e-15));
  CHECK(out.factor(0, 1) == 0.0);
  CHECK(out.factor(1, 0) == 0.0);
  const double var = std::pow(std::log(2.0) + 1e-4, 2) + 1e-8;
  CHECK(out.covariance()(0, 0) == doctest::Approx(var).epsilon(1e-14));
  CHECK(out.covariance()(0, 1) == doctest::Approx(0.0));
}

TEST_CASE("covariance spectrum stays above floor^2") {
  for (int dim : {2, 3}) {
    const double floor = 1e-3;
    for (double scale : {0.5, 3.0}) {
      const auto params = oracle::random_field(NetArch::field(dim, 2, 16, 2, floor), 11, scale);
      for (const auto& q : random_queries(200, dim, 12)) {
        const auto out = forward_field(params, q.p, q.t);
        const Mat sigma = out.covariance();
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es{Eigen::MatrixXd(sigma)};
        CHECK(es.eigenvalues().minCoeff() >= floor * floor * (1 - 1e-6));
        for (int i = 0; i < dim; ++i) CHECK(out.factor(i, i) >= floor);
        CHECK((out.chol * out.chol.transpose() - sigma).norm() <= 1e-12 * (1 + sigma.norm()));
      }
    }
  }
}

TEST_CASE("large off-diagonal factor entries keep the floor") {
  // Without the added floor^2 I the smallest eigenvalue here is ~4e-10.
  Eigen::VectorXd raw(5);
  raw << 0.0, 0.0, -30.0, 50.0, -30.0;  // F = [[f, 0], [50, f]] with f ~ floor
  const auto out = kernels::decode_field(NetArch::field(2, 1, 4, 0, 1e-3), raw);
  const Mat ff = out.factor * out.factor.transpose();
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> bare{Eigen::MatrixXd(ff)};
  CHECK(bare.eigenvalues().minCoeff() < 1e-8);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es{Eigen::MatrixXd(out.covariance())};
  CHECK(es.eigenvalues().minCoeff() >= 1e-6 * (1 - 1e-6));
}

TEST_CASE("batched kernels agree with the tape reference") {
  for (int dim : {2, 3}) {
    const auto params = oracle::random_field(NetArch::field(dim, 3, 12, 2), 21);
    const auto queries = random_queries(150, dim, 22);
    const auto batch = forward_field_batch(params, queries);
    for (std::size_t i = 0; i < queries.size(); ++i) {
      ad::Tape tape;
      std::vector<ad::Var> p;
      for (int k = 0; k < dim; ++k) p.push_back(tape.constant(queries[i].p[k]));
      const auto vars = reference::record_field(tape, params, p, tape.constant(queries[i].t));
      for (int k = 0; k < dim; ++k) CHECK(batch[i].mu[k] == doctest::Approx(vars.mu[k].value()).epsilon(1e-12));
      for (int r = 0; r < dim; ++r)
        for (int c = 0; c < dim; ++c)
          CHECK(batch[i].factor(r, c) == doctest::Approx(vars.factor[r * dim + c].value()).epsilon(1e-12));
    }
  }
}

TEST_CASE("inverse network batch agrees with single evaluation") {
  const auto arch = NetArch::inverse(2, 2, 16, 3);
  const auto params = init_params(arch, 8);
  Rng rng(8, 1);
  std::vector<InverseQuery> q(100);
  for (auto& x : q) {
    x.p = vec2(rng.uniform(-1, 1), rng.uniform(-1, 1));
    x.d = vec2(rng.uniform(-1, 1), rng.uniform(-1, 1));
  }
  const auto batch = forward_inverse_batch(params, q);
  for (std::size_t i = 0; i < q.size(); ++i) {
    const double single = forward_inverse(params, q[i].p, q[i].d);
    CHECK(std::isfinite(single));
    CHECK(batch[i] == doctest::Approx(single).epsilon(1e-13));
  }
}

TEST_CASE("time derivatives match central differences") {
  const auto params = oracle::random_field(NetArch::field(2, 3, 16, 2), 31);
  for (const auto& q : random_queries(30, 2, 32)) {
    const auto jet = field_jet(params, q.p, q.t);
    const auto tape_jet = reference::field_jet_tape(params, q.p, q.t);
    const double h = 1e-5;
    const auto up = forward_field(params, q.p, q.t + h);
    const auto down = forward_field(params, q.p, q.t - h);
    const Vec mu_fd = (up.mu - down.mu) / (2 * h);
    const Mat sigma_fd = (up.covariance() - down.covariance()) / (2 * h);
    for (int i = 0; i < 2; ++i) {
      CHECK(oracle::rel_err(jet.mu_t[i], mu_fd[i]) <= 1e-4);
      CHECK(jet.mu_t[i] == doctest::Approx(tape_jet.mu_t[i]).epsilon(1e-10));
      for (int j = 0; j < 2; ++j) {
        CHECK(oracle::rel_err(jet.sigma_t(i, j), sigma_fd(i, j)) <= 1e-4);
        CHECK(jet.sigma_t(i, j) == doctest::Approx(tape_jet.sigma_t(i, j)).epsilon(1e-10));
        CHECK(jet.sigma_t(i, j) == jet.sigma_t(j, i));
      }
    }
  }
}

TEST_CASE("batched results do not depend on the thread count") {
  const auto params = oracle::random_field(NetArch::field(2, 2, 32, 3), 41);
  const auto queries = random_queries(1000, 2, 42);
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  const auto a = field_jet_batch(params, queries);
  omp_set_num_threads(4);
  const auto b = field_jet_batch(params, queries);
  omp_set_num_threads(saved);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].mu == b[i].mu);
    CHECK(a[i].sigma_t == b[i].sigma_t);
  }
}

TEST_CASE("covariance head ranges cover the last-layer rows after the mean") {
  const auto arch = NetArch::field(2, 2, 8, 1);
  const auto params = init_params(arch, 1);
  const auto ranges = params.covariance_head_ranges();
  REQUIRE(ranges.size() == 2);
  CHECK(ranges[0].second - ranges[0].first == 3u * 8u);
  CHECK(ranges[1].second - ranges[1].first == 3u);
  CHECK(ranges[1].second == params.weights.size());
  CHECK(init_params(NetArch::inverse(2, 2, 8, 1), 1).covariance_head_ranges().empty());
}
