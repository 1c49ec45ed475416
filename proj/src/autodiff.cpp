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

#include "prism/autodiff.hpp"

#include <cassert>
#include <cmath>
#include <string>

#include "prism/errors.hpp"

namespace prism::ad {

std::string_view op_name(Op op) {
  switch (op) {
    case Op::leaf: return "leaf";
    case Op::constant: return "constant";
    case Op::add: return "add";
    case Op::sub: return "sub";
    case Op::mul: return "mul";
    case Op::div: return "div";
    case Op::neg: return "neg";
    case Op::exp: return "exp";
    case Op::log: return "log";
    case Op::tanh: return "tanh";
    case Op::sin: return "sin";
    case Op::cos: return "cos";
    case Op::abs: return "abs";
    case Op::softplus: return "softplus";
    case Op::pow: return "pow";
    case Op::dot: return "dot";
  }
  return "?";
}

double Var::value() const { return tape->value(id); }

Var Tape::variable(double value) { return {this, push(value, Op::leaf, {})}; }

Var Tape::constant(double value) { return {this, push(value, Op::constant, {})}; }

NodeId Tape::push(double value, Op op, std::initializer_list<Edge> edges) {
  return push(value, op, std::span<const Edge>(edges.begin(), edges.size()));
}

NodeId Tape::push(double value, Op op, std::span<const Edge> edges) {
  Node n;
  n.value = value;
  n.op = op;
  n.edge_begin = static_cast<std::uint32_t>(edges_.size());
  n.edge_count = static_cast<std::uint32_t>(edges.size());
  edges_.insert(edges_.end(), edges.begin(), edges.end());
  nodes_.push_back(n);
  return static_cast<NodeId>(nodes_.size() - 1);
}

std::span<const Edge> Tape::parents(NodeId id) const {
  const Node& n = nodes_[id];
  return {edges_.data() + n.edge_begin, n.edge_count};
}

namespace {

void require_arity(Op op, std::size_t got, std::size_t want) {
  if (got != want) {
    throw std::invalid_argument(std::string(op_name(op)) + " expects " + std::to_string(want) +
                                " inputs, got " + std::to_string(got));
  }
}

double stable_softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

NodeId Tape::record(Op op, std::span<const NodeId> in) {
  for (NodeId id : in) {
    if (id >= nodes_.size()) throw std::out_of_range("record: input node does not exist");
  }
  auto v = [&](std::size_t i) { return nodes_[in[i]].value; };

  switch (op) {
    case Op::leaf:
    case Op::constant:
      throw std::invalid_argument("record: use variable()/constant() for leaves");
    case Op::add:
      require_arity(op, in.size(), 2);
      return push(v(0) + v(1), op, {{in[0], 1.0}, {in[1], 1.0}});
    case Op::sub:
      require_arity(op, in.size(), 2);
      return push(v(0) - v(1), op, {{in[0], 1.0}, {in[1], -1.0}});
    case Op::mul:
      require_arity(op, in.size(), 2);
      return push(v(0) * v(1), op, {{in[0], v(1)}, {in[1], v(0)}});
    case Op::div: {
      require_arity(op, in.size(), 2);
      const double b = v(1);
      if (b == 0.0) throw DomainError("div: divisor is zero");
      const double q = v(0) / b;
      return push(q, op, {{in[0], 1.0 / b}, {in[1], -q / b}});
    }
    case Op::neg:
      require_arity(op, in.size(), 1);
      return push(-v(0), op, {{in[0], -1.0}});
    case Op::exp: {
      require_arity(op, in.size(), 1);
      const double e = std::exp(v(0));
      return push(e, op, {{in[0], e}});
    }
    case Op::log: {
      require_arity(op, in.size(), 1);
      const double x = v(0);
      if (!(x > 0.0)) throw DomainError("log: argument " + std::to_string(x) + " is not positive");
      return push(std::log(x), op, {{in[0], 1.0 / x}});
    }
    case Op::tanh: {
      require_arity(op, in.size(), 1);
      const double y = std::tanh(v(0));
      return push(y, op, {{in[0], 1.0 - y * y}});
    }
    case Op::sin:
      require_arity(op, in.size(), 1);
      return push(std::sin(v(0)), op, {{in[0], std::cos(v(0))}});
    case Op::cos:
      require_arity(op, in.size(), 1);
      return push(std::cos(v(0)), op, {{in[0], -std::sin(v(0))}});
    case Op::abs: {
      require_arity(op, in.size(), 1);
      const double x = v(0);
      // subgradient 0 at the kink
      const double s = x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
      return push(std::fabs(x), op, {{in[0], s}});
    }
    case Op::softplus:
      require_arity(op, in.size(), 1);
      return push(stable_softplus(v(0)), op, {{in[0], sigmoid(v(0))}});
    case Op::pow: {
      require_arity(op, in.size(), 2);
      const double x = v(0);
      const double y = v(1);
      const bool const_exponent = nodes_[in[1]].op == Op::constant;
      if (x > 0.0) {
        const double r = std::pow(x, y);
        return push(r, op, {{in[0], y * std::pow(x, y - 1.0)}, {in[1], r * std::log(x)}});
      }
      if (!const_exponent || std::trunc(y) != y) {
        throw DomainError("pow: non-positive base requires a constant integer exponent");
      }
      if (x == 0.0 && y < 0.0) throw DomainError("pow: zero base with negative exponent");
      const double r = std::pow(x, y);
      const double dx = y == 0.0 ? 0.0 : y * std::pow(x, y - 1.0);
      return push(r, op, {{in[0], dx}, {in[1], 0.0}});
    }
    case Op::dot: {
      if (in.size() % 2 != 0) throw std::invalid_argument("dot expects an even number of inputs");
      const std::size_t n = in.size() / 2;
      std::vector<Edge> edges;
      edges.reserve(in.size());
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        acc += v(i) * v(n + i);
        edges.push_back({in[i], v(n + i)});
      }
      for (std::size_t i = 0; i < n; ++i) edges.push_back({in[n + i], v(i)});
      return push(acc, op, edges);
    }
  }
  throw std::invalid_argument("record: unknown op");
}

Var Tape::dot(std::span<const Var> a, std::span<const Var> b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot: length mismatch");
  std::vector<NodeId> ids;
  ids.reserve(2 * a.size());
  for (const Var& x : a) ids.push_back(x.id);
  for (const Var& x : b) ids.push_back(x.id);
  return {this, record(Op::dot, ids)};
}

std::vector<Var> Tape::matvec(std::span<const Var> matrix, std::size_t rows, std::size_t cols,
                              std::span<const Var> x) {
  if (matrix.size() != rows * cols || x.size() != cols) {
    throw std::invalid_argument("matvec: shape mismatch");
  }
  std::vector<Var> out;
  out.reserve(rows);
  for (std::size_t r = 0; r < rows; ++r) out.push_back(dot(matrix.subspan(r * cols, cols), x));
  return out;
}

const std::vector<double>& Tape::backward(Var root) {
  assert(root.tape == this);
  if (root.id >= nodes_.size()) throw std::out_of_range("backward: root does not exist");
  grads_.assign(nodes_.size(), 0.0);
  grads_[root.id] = 1.0;
  for (std::int64_t i = root.id; i >= 0; --i) {
    const double g = grads_[i];
    if (g == 0.0) continue;
    const Node& n = nodes_[i];
    const Edge* e = edges_.data() + n.edge_begin;
    for (std::uint32_t k = 0; k < n.edge_count; ++k) grads_[e[k].parent] += g * e[k].partial;
  }
  for (std::size_t i = 0; i < nodes_.size(); ++i) nodes_[i].grad = grads_[i];
  return grads_;
}

void Tape::clear() {
  nodes_.clear();
  edges_.clear();
  grads_.clear();
}

namespace {

Var binary(Op op, Var a, Var b) {
  const NodeId ids[2] = {a.id, b.id};
  return {a.tape, a.tape->record(op, ids)};
}

Var unary(Op op, Var a) {
  const NodeId ids[1] = {a.id};
  return {a.tape, a.tape->record(op, ids)};
}

}  // namespace

Var operator+(Var a, Var b) { return binary(Op::add, a, b); }
Var operator-(Var a, Var b) { return binary(Op::sub, a, b); }
Var operator*(Var a, Var b) { return binary(Op::mul, a, b); }
Var operator/(Var a, Var b) { return binary(Op::div, a, b); }
Var operator-(Var a) { return unary(Op::neg, a); }
Var operator+(Var a, double b) { return a + a.tape->constant(b); }
Var operator+(double a, Var b) { return b.tape->constant(a) + b; }
Var operator-(Var a, double b) { return a - a.tape->constant(b); }
Var operator-(double a, Var b) { return b.tape->constant(a) - b; }
Var operator*(Var a, double b) { return a * a.tape->constant(b); }
Var operator*(double a, Var b) { return b.tape->constant(a) * b; }
Var operator/(Var a, double b) { return a / a.tape->constant(b); }
Var operator/(double a, Var b) { return b.tape->constant(a) / b; }

Var exp(Var x) { return unary(Op::exp, x); }
Var log(Var x) { return unary(Op::log, x); }
Var tanh(Var x) { return unary(Op::tanh, x); }
Var sin(Var x) { return unary(Op::sin, x); }
Var cos(Var x) { return unary(Op::cos, x); }
Var abs(Var x) { return unary(Op::abs, x); }
Var softplus(Var x) { return unary(Op::softplus, x); }
Var pow(Var base, Var exponent) { return binary(Op::pow, base, exponent); }
Var pow(Var base, double exponent) { return pow(base, base.tape->constant(exponent)); }

std::vector<double> jacobian(const RecordedFn& f, std::span<const double> point,
                             std::size_t* n_outputs) {
  Tape tape;
  std::vector<Var> inputs;
  inputs.reserve(point.size());
  for (double x : point) inputs.push_back(tape.variable(x));
  const std::vector<Var> outputs = f(tape, inputs);
  std::vector<double> jac(outputs.size() * point.size(), 0.0);
  for (std::size_t o = 0; o < outputs.size(); ++o) {
    const auto& g = tape.backward(outputs[o]);
    for (std::size_t i = 0; i < inputs.size(); ++i) jac[o * point.size() + i] = g[inputs[i].id];
  }
  if (n_outputs) *n_outputs = outputs.size();
  return jac;
}

std::vector<double> grad_wrt_input(const RecordedFn& f, std::size_t input_index,
                                   std::span<const double> point) {
  if (input_index >= point.size()) throw std::out_of_range("grad_wrt_input: bad input index");
  std::size_t n_out = 0;
  const std::vector<double> jac = jacobian(f, point, &n_out);
  std::vector<double> column(n_out);
  for (std::size_t o = 0; o < n_out; ++o) column[o] = jac[o * point.size() + input_index];
  return column;
}

}  // namespace prism::ad
