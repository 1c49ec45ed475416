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

// Independent checks shared by the unit tests and the acceptance runner.

#include <cmath>
#include <functional>
#include <memory>
#include <vector>

#include "prism/autodiff.hpp"
#include "prism/network.hpp"
#include "prism/rng.hpp"

namespace oracle {

/// (f(x + h e_i) - f(x - h e_i)) / 2h
inline double central_diff(const std::function<double(std::vector<double>)>& f, std::vector<double> x,
                           std::size_t i, double h) {
  const double x0 = x[i];
  x[i] = x0 + h;
  const double up = f(x);
  x[i] = x0 - h;
  const double down = f(x);
  return (up - down) / (2.0 * h);
}

inline double rel_err(double a, double b, double floor = 1e-3) {
  return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), floor});
}

// Random expression over a few inputs, evaluable on doubles and on the tape.
// Every op is guarded to stay inside its domain for any real inputs.
struct Expr {
  enum Kind { input, constant, add, sub, mul, div, exp, log, tanh, sin, cos, softplus, pow } kind = input;
  int index = 0;
  double value = 0.0;
  std::unique_ptr<Expr> a, b;

  template <class T, class Ops>
  T eval(const std::vector<T>& x, const Ops& ops) const {
    switch (kind) {
      case input: return x[index];
      case constant: return ops.lift(value);
      case add: return a->eval(x, ops) + b->eval(x, ops);
      case sub: return a->eval(x, ops) - b->eval(x, ops);
      case mul: return a->eval(x, ops) * b->eval(x, ops);
      case div: {
        const T den = b->eval(x, ops);
        return a->eval(x, ops) / (den * den + 1.0);
      }
      case exp: return ops.exp(ops.tanh(a->eval(x, ops)));
      case log: {
        const T u = a->eval(x, ops);
        return ops.log(u * u + 0.5);
      }
      case tanh: return ops.tanh(a->eval(x, ops));
      case sin: return ops.sin(a->eval(x, ops));
      case cos: return ops.cos(a->eval(x, ops));
      case softplus: return ops.softplus(a->eval(x, ops));
      case pow: return ops.pow(ops.softplus(a->eval(x, ops)) + 0.1, value);
    }
    return ops.lift(0.0);
  }
};

inline std::unique_ptr<Expr> random_expr(prism::Rng& rng, int depth, int n_inputs) {
  auto e = std::make_unique<Expr>();
  if (depth == 0 || rng.uniform() < 0.15) {
    if (rng.uniform() < 0.8) {
      e->kind = Expr::input;
      e->index = static_cast<int>(rng.uniform_int(0, n_inputs - 1));
    } else {
      e->kind = Expr::constant;
      e->value = rng.uniform(-2.0, 2.0);
    }
    return e;
  }
  e->kind = static_cast<Expr::Kind>(rng.uniform_int(Expr::add, Expr::pow));
  e->a = random_expr(rng, depth - 1, n_inputs);
  if (e->kind <= Expr::div) e->b = random_expr(rng, depth - 1, n_inputs);
  if (e->kind == Expr::pow) e->value = rng.uniform(-1.5, 2.5);
  return e;
}

struct DoubleOps {
  double lift(double v) const { return v; }
  double exp(double v) const { return std::exp(v); }
  double log(double v) const { return std::log(v); }
  double tanh(double v) const { return std::tanh(v); }
  double sin(double v) const { return std::sin(v); }
  double cos(double v) const { return std::cos(v); }
  double softplus(double v) const { return v > 30 ? v : std::log1p(std::exp(v)); }
  double pow(double b, double e) const { return std::pow(b, e); }
};

// Extended precision so the finite-difference reference is well below the
// tolerance even for deep expressions.
struct LongDoubleOps {
  using T = long double;
  T lift(double v) const { return v; }
  T exp(T v) const { return std::exp(v); }
  T log(T v) const { return std::log(v); }
  T tanh(T v) const { return std::tanh(v); }
  T sin(T v) const { return std::sin(v); }
  T cos(T v) const { return std::cos(v); }
  T softplus(T v) const { return v > 40 ? v : std::log1p(std::exp(v)); }
  T pow(T b, double e) const { return std::pow(b, static_cast<T>(e)); }
};

struct TapeOps {
  prism::ad::Tape* tape;
  prism::ad::Var lift(double v) const { return tape->constant(v); }
  prism::ad::Var exp(prism::ad::Var v) const { return prism::ad::exp(v); }
  prism::ad::Var log(prism::ad::Var v) const { return prism::ad::log(v); }
  prism::ad::Var tanh(prism::ad::Var v) const { return prism::ad::tanh(v); }
  prism::ad::Var sin(prism::ad::Var v) const { return prism::ad::sin(v); }
  prism::ad::Var cos(prism::ad::Var v) const { return prism::ad::cos(v); }
  prism::ad::Var softplus(prism::ad::Var v) const { return prism::ad::softplus(v); }
  prism::ad::Var pow(prism::ad::Var b, double e) const { return prism::ad::pow(b, e); }
};

struct GradCheck {
  double worst = 0.0;
  int checked = 0;
};

/// Reverse-mode gradients of `count` random expressions of depth <= `depth`
/// with inputs uniform in [-range, range], against a fourth-order central
/// difference in long double. Error is |g - fd| / max(|g|, |fd|, abs_floor).
inline GradCheck gradcheck_random_expressions(int count, std::uint64_t seed, int depth = 8, double range = 2.0,
                                              double abs_floor = 1e-8) {
  GradCheck out;
  prism::Rng rng(seed, 1);
  constexpr int n = 3;
  for (int k = 0; k < count; ++k) {
    const auto expr = random_expr(rng, depth, n);
    std::vector<double> x(n);
    for (auto& v : x) v = rng.uniform(-range, range);

    prism::ad::Tape tape;
    std::vector<prism::ad::Var> vars;
    for (double v : x) vars.push_back(tape.variable(v));
    const auto root = expr->eval(vars, TapeOps{&tape});
    const auto& g = tape.backward(root);

    for (int i = 0; i < n; ++i) {
      const long double h = 1e-4L;
      const auto at = [&](long double step) {
        std::vector<long double> y(x.begin(), x.end());
        y[i] += step;
        return expr->eval(y, LongDoubleOps{});
      };
      const long double fd = (8 * (at(h) - at(-h)) - (at(2 * h) - at(-2 * h))) / (12 * h);
      out.worst = std::max(out.worst, rel_err(g[vars[i].id], static_cast<double>(fd), abs_floor));
    }
    ++out.checked;
  }
  return out;
}

/// Field weights with every entry (covariance head included) drawn uniformly,
/// so Sigma actually varies with (p, t).
inline prism::GaussianFieldParams random_field(const prism::NetArch& arch, std::uint64_t seed,
                                               double scale = 0.5) {
  auto params = prism::init_params(arch, seed);
  prism::Rng rng(seed, 99);
  for (auto& w : params.weights) w = rng.uniform(-scale, scale);
  return params;
}

}  // namespace oracle
