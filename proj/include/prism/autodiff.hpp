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

// Reverse-mode differentiation over a scalar-node tape.
//
// Every recorded operation appends one node holding its value and the local
// partial derivatives with respect to its parents. Parents always precede
// their children, so a single reverse sweep yields exact adjoints.

#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

namespace prism::ad {

using NodeId = std::uint32_t;

enum class Op : std::uint8_t {
  leaf,
  constant,
  add,
  sub,
  mul,
  div,
  neg,
  exp,
  log,
  tanh,
  sin,
  cos,
  abs,
  softplus,
  pow,
  dot,
};

std::string_view op_name(Op op);

struct Edge {
  NodeId parent;
  double partial;
};

struct Node {
  double value = 0.0;
  double grad = 0.0;
  Op op = Op::leaf;
  std::uint32_t edge_begin = 0;
  std::uint32_t edge_count = 0;
};

class Tape;

/// Handle to a node on a tape. Arithmetic on Vars records new nodes.
struct Var {
  Tape* tape = nullptr;
  NodeId id = 0;

  double value() const;
};

class Tape {
 public:
  explicit Tape(std::uint64_t rng_seed = 0) : rng_seed_(rng_seed) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  /// Differentiable input.
  Var variable(double value);
  /// Non-differentiable input; backward still assigns it an adjoint.
  Var constant(double value);

  /// Appends a node for `op` applied to `inputs`.
  /// Unary ops take one input, binary ops two; `dot` takes 2n inputs laid out
  /// as (a_0..a_{n-1}, b_0..b_{n-1}). Throws DomainError for log(x<=0),
  /// division by zero and pow with a non-positive base and non-constant or
  /// non-integer exponent.
  NodeId record(Op op, std::span<const NodeId> inputs);

  /// Dense row-major matrix times vector, one dot node per output row.
  std::vector<Var> matvec(std::span<const Var> matrix, std::size_t rows, std::size_t cols,
                          std::span<const Var> x);

  Var dot(std::span<const Var> a, std::span<const Var> b);

  /// Reverse sweep from `root`. Adjoints of all nodes are reset first, so
  /// repeated calls do not accumulate across roots. Returns grad per node id.
  const std::vector<double>& backward(Var root);

  double value(NodeId id) const { return nodes_[id].value; }
  double grad(NodeId id) const { return grads_.empty() ? 0.0 : grads_[id]; }
  const Node& node(NodeId id) const { return nodes_[id]; }
  std::span<const Edge> parents(NodeId id) const;

  std::size_t size() const { return nodes_.size(); }
  std::uint64_t rng_seed() const { return rng_seed_; }

  /// Drops all nodes; Vars from before the clear become invalid.
  void clear();

 private:
  NodeId push(double value, Op op, std::initializer_list<Edge> edges);
  NodeId push(double value, Op op, std::span<const Edge> edges);

  std::vector<Node> nodes_;
  std::vector<Edge> edges_;
  std::vector<double> grads_;
  std::uint64_t rng_seed_;
};

Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator*(Var a, Var b);
Var operator/(Var a, Var b);
Var operator-(Var a);
Var operator+(Var a, double b);
Var operator+(double a, Var b);
Var operator-(Var a, double b);
Var operator-(double a, Var b);
Var operator*(Var a, double b);
Var operator*(double a, Var b);
Var operator/(Var a, double b);
Var operator/(double a, Var b);

Var exp(Var x);
Var log(Var x);
Var tanh(Var x);
Var sin(Var x);
Var cos(Var x);
Var abs(Var x);
Var softplus(Var x);
Var pow(Var base, Var exponent);
Var pow(Var base, double exponent);

/// f maps recorded inputs to recorded outputs.
using RecordedFn = std::function<std::vector<Var>(Tape&, std::span<const Var>)>;

/// Column `input_index` of the Jacobian of f at `point`, via one reverse
/// pass per output component.
std::vector<double> grad_wrt_input(const RecordedFn& f, std::size_t input_index,
                                   std::span<const double> point);

/// Full Jacobian (outputs x inputs, row-major) of f at `point`.
std::vector<double> jacobian(const RecordedFn& f, std::span<const double> point,
                             std::size_t* n_outputs = nullptr);

}  // namespace prism::ad
