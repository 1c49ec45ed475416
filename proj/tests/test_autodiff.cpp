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
#include <vector>

#include "oracles.hpp"
#include "prism/autodiff.hpp"
#include "prism/errors.hpp"

using namespace prism;
using ad::Op;
using ad::Tape;
using ad::Var;

TEST_CASE("recorded node values and local partials") {
  Tape tape;
  const Var x = tape.variable(3.0);
  const Var y = tape.variable(4.0);
  const ad::NodeId xy[] = {x.id, y.id};
  const auto prod = tape.record(Op::mul, xy);
  CHECK(tape.value(prod) == 12.0);

  const Var one = tape.variable(1.0);
  const ad::NodeId in_log[] = {one.id};
  const auto lg = tape.record(Op::log, in_log);
  CHECK(tape.value(lg) == 0.0);
  REQUIRE(tape.parents(lg).size() == 1);
  CHECK(tape.parents(lg)[0].partial == 1.0);

  const Var zero = tape.variable(0.0);
  const ad::NodeId in_sin[] = {zero.id};
  const auto sn = tape.record(Op::sin, in_sin);
  CHECK(tape.value(sn) == 0.0);
  CHECK(tape.parents(sn)[0].partial == 1.0);
}

TEST_CASE("domain errors") {
  Tape tape;
  const Var zero = tape.variable(0.0);
  const Var neg = tape.variable(-1.0);
  CHECK_THROWS_AS(ad::log(zero), DomainError);
  CHECK_THROWS_AS(ad::log(neg), DomainError);
  CHECK_THROWS_AS(tape.variable(1.0) / zero, DomainError);
  CHECK_THROWS_AS(ad::pow(neg, tape.variable(2.0)), DomainError);
  CHECK(ad::pow(neg, 2.0).value() == doctest::Approx(1.0));
  CHECK_THROWS_AS(ad::pow(neg, 0.5), DomainError);
}

TEST_CASE("backward on small graphs") {
  Tape tape;
  const Var x = tape.variable(3.0);
  const Var y = tape.variable(4.0);
  const auto& g = tape.backward(x * y);
  CHECK(g[x.id] == 4.0);
  CHECK(g[y.id] == 3.0);

  Tape t2;
  const Var a = t2.variable(0.0);
  CHECK(t2.backward(ad::exp(a))[a.id] == 1.0);

  Tape t3;
  const Var z = t3.variable(0.7);
  const double analytic = t3.backward(ad::tanh(z * z))[z.id];
  const double fd = oracle::central_diff([](std::vector<double> v) { return std::tanh(v[0] * v[0]); }, {0.7}, 0,
                                         1e-5);
  CHECK(oracle::rel_err(analytic, fd, 1e-12) <= 1e-6);
}

TEST_CASE("backward resets adjoints between roots") {
  Tape tape;
  const Var x = tape.variable(2.0);
  const Var sq = x * x;
  const Var cube = sq * x;
  CHECK(tape.backward(sq)[x.id] == 4.0);
  CHECK(tape.backward(cube)[x.id] == 12.0);
  CHECK(tape.backward(sq)[x.id] == 4.0);
}

TEST_CASE("shared subexpressions accumulate") {
  Tape tape;
  const Var x = tape.variable(1.5);
  const Var s = ad::sin(x);
  const Var root = s * s + s;
  const double expect = 2 * std::sin(1.5) * std::cos(1.5) + std::cos(1.5);
  CHECK(tape.backward(root)[x.id] == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("dot and matvec") {
  Tape tape;
  std::vector<Var> m, x;
  for (double v : {1.0, 2.0, 3.0, 4.0, 5.0, 6.0}) m.push_back(tape.variable(v));
  for (double v : {1.0, -1.0, 2.0}) x.push_back(tape.variable(v));
  const auto y = tape.matvec(m, 2, 3, x);
  REQUIRE(y.size() == 2);
  CHECK(y[0].value() == 1 - 2 + 6);
  CHECK(y[1].value() == 4 - 5 + 12);
  const auto& g = tape.backward(y[1]);
  CHECK(g[m[3].id] == 1.0);
  CHECK(g[m[5].id] == 2.0);
  CHECK(g[x[2].id] == 6.0);
  CHECK(g[m[0].id] == 0.0);
}

TEST_CASE("jacobian column wrt an input") {
  const ad::RecordedFn f = [](Tape& tape, std::span<const Var> in) {
    const Var t = in[0];
    return std::vector<Var>{t, 2.0 * t, t * t};
  };
  const std::vector<double> at = {3.0};
  const auto col = ad::grad_wrt_input(f, 0, at);
  REQUIRE(col.size() == 3);
  CHECK(col[0] == 1.0);
  CHECK(col[1] == 2.0);
  CHECK(col[2] == 6.0);

  const ad::RecordedFn constant = [](Tape& tape, std::span<const Var>) {
    return std::vector<Var>{tape.constant(1.0), tape.constant(-2.0)};
  };
  for (double v : ad::grad_wrt_input(constant, 0, at)) CHECK(v == 0.0);
}

TEST_CASE("full jacobian") {
  const ad::RecordedFn f = [](Tape&, std::span<const Var> in) {
    return std::vector<Var>{in[0] * in[1], ad::sin(in[0])};
  };
  const std::vector<double> at = {0.5, 2.0};
  std::size_t rows = 0;
  const auto jac = ad::jacobian(f, at, &rows);
  REQUIRE(rows == 2);
  CHECK(jac[0] == 2.0);
  CHECK(jac[1] == 0.5);
  CHECK(jac[2] == doctest::Approx(std::cos(0.5)));
  CHECK(jac[3] == 0.0);
}

TEST_CASE("gradients of random expressions up to depth 8 match finite differences") {
  const auto result = oracle::gradcheck_random_expressions(100, 2026);
  CHECK(result.checked == 100);
  CHECK(result.worst <= 1e-5);
}

TEST_CASE("linearity of the gradient") {
  // d(a f + b g) = a df + b dg
  Tape tape;
  const Var x = tape.variable(0.3);
  const Var y = tape.variable(-1.2);
  const Var f = ad::exp(x) * y;
  const Var g = ad::softplus(x * y);
  const double a = 2.5, b = -0.75;
  const std::vector<double> gf = tape.backward(f);
  const std::vector<double> gg = tape.backward(g);
  const auto& gsum = tape.backward(a * f + b * g);
  for (const Var v : {x, y}) CHECK(gsum[v.id] == doctest::Approx(a * gf[v.id] + b * gg[v.id]).epsilon(1e-14));
}

TEST_CASE("same graph gives identical gradients") {
  const auto run = [] {
    Tape tape;
    const Var x = tape.variable(0.9);
    const Var y = tape.variable(0.1);
    const Var r = ad::log(ad::cos(x) * ad::cos(x) + ad::pow(y, 3.0) + 1.0);
    const auto& g = tape.backward(r);
    return std::vector<double>{r.value(), g[x.id], g[y.id]};
  };
  CHECK(run() == run());
}
