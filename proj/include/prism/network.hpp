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

// Coordinate MLPs: the Gaussian displacement field f(p, t) -> (mu, L) and the
// inverse time encoder g(p, d) -> tau.
//
// Weights live in one flat vector. Layer l stores a row-major (out x in)
// matrix followed by its bias. Hidden layers use tanh. For the field network
// the last layer's first D rows are the mean head and the remaining D(D+1)/2
// rows are the covariance head (raw Cholesky entries, row-major lower
// triangle). Diagonal Cholesky entries are softplus(raw) + chol_floor.

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "prism/autodiff.hpp"
#include "prism/types.hpp"

namespace prism {

constexpr double kDefaultCholFloor = 1e-4;

enum class NetKind : std::uint8_t { field, inverse };

struct NetArch {
  NetKind kind = NetKind::field;
  int dim = 2;  // spatial dimension D
  int hidden_layers = 4;
  int hidden_width = 128;
  int num_frequencies = 4;
  double chol_floor = kDefaultCholFloor;  // field networks: softplus offset on diag(F), sqrt of the eigenvalue floor

  static NetArch field(int dim, int hidden_layers = 4, int hidden_width = 128, int num_frequencies = 4,
                       double chol_floor = kDefaultCholFloor);
  static NetArch inverse(int dim, int hidden_layers = 4, int hidden_width = 128, int num_frequencies = 4);

  /// Raw input size: D+1 for the field (p, t), 2D for the inverse (p, d).
  int input_dim() const { return kind == NetKind::field ? dim + 1 : 2 * dim; }
  /// Leading raw inputs that are frequency-encoded; the rest pass through.
  int encoded_dim() const { return kind == NetKind::field ? dim + 1 : dim; }
  int feature_dim() const;
  int output_dim() const { return kind == NetKind::field ? dim + tri_count(dim) : 1; }
  std::size_t weight_count() const;

  /// Throws ConfigError when the architecture is inconsistent.
  void validate() const;

  bool operator==(const NetArch&) const = default;
};

/// Weights of one MLP. The forward field model is a GaussianFieldParams, the
/// inverse encoder uses the same type with NetKind::inverse.
struct MlpParams {
  NetArch arch;
  std::vector<double> weights;

  /// Index range [begin, end) of the covariance-head weights and biases in
  /// the final layer (field networks only).
  std::vector<std::pair<std::size_t, std::size_t>> covariance_head_ranges() const;
};

using GaussianFieldParams = MlpParams;

/// Fan-in scaled uniform init; the covariance head of a field network starts at zero.
MlpParams init_params(const NetArch& arch, std::uint64_t seed);

/// (x, sin(2^k x), cos(2^k x)) for k = 0..num_frequencies-1. Layout: raw x,
/// then per band all sines followed by all cosines.
std::vector<double> encode_input(std::span<const double> x, int num_frequencies);

/// Single-point evaluation of the field network. The covariance is
/// factor * factor^T + chol_floor^2 * I, so its spectrum never drops below
/// chol_floor^2 however large the off-diagonal entries get; `chol` is the
/// Cholesky factor of that full covariance.
struct FieldOutput {
  Vec mu;
  Mat factor;  // network factor, lower triangular, diagonal softplus + floor
  Mat chol;
  Mat covariance() const { return chol * chol.transpose(); }
};

/// Field outputs together with their t-derivatives.
struct FieldJet {
  Vec mu;
  Mat factor;
  Mat chol;
  Mat sigma;
  Vec mu_t;
  Mat factor_t;
  Mat sigma_t;
};

struct FieldQuery {
  Vec p;
  double t = 0.0;
};

FieldOutput forward_field(const GaussianFieldParams& params, const Vec& p, double t);
double forward_inverse(const MlpParams& params, const Vec& p, const Vec& d);

/// Batched evaluations; parallel over fixed chunks, results independent of
/// thread count.
std::vector<FieldOutput> forward_field_batch(const GaussianFieldParams& params,
                                             std::span<const FieldQuery> queries);
std::vector<FieldJet> field_jet_batch(const GaussianFieldParams& params,
                                      std::span<const FieldQuery> queries);
FieldJet field_jet(const GaussianFieldParams& params, const Vec& p, double t);

struct InverseQuery {
  Vec p;
  Vec d;
};
std::vector<double> forward_inverse_batch(const MlpParams& params, std::span<const InverseQuery> queries);

namespace kernels {

/// Per-chunk buffers for a batched forward/backward pass.
struct Workspace {
  std::vector<Eigen::MatrixXd> acts;  // acts[0] = features, acts[l+1] = layer l output
  Eigen::MatrixXd delta;
  Eigen::MatrixXd scratch;
  // Aligned staging for weight gradients. Reductions written straight into
  // an arbitrary std::vector take alignment-dependent summation paths.
  Eigen::MatrixXd grad_w;
  Eigen::VectorXd grad_b;
};

/// Encodes raw inputs (input_dim x B, column per sample) into features.
void encode_batch(const NetArch& arch, const Eigen::MatrixXd& raw, Eigen::MatrixXd& features);

/// Forward pass; returns reference to the output block (output_dim x B).
const Eigen::MatrixXd& forward(const MlpParams& params, const Eigen::MatrixXd& raw, Workspace& ws);

/// Backward pass for upstream gradient `grad_out` (output_dim x B) after
/// forward() on the same workspace. Accumulates weight gradients into
/// `grad_weights` when non-empty and writes feature gradients when non-null.
void backward(const MlpParams& params, Workspace& ws, const Eigen::MatrixXd& grad_out,
              std::span<double> grad_weights, Eigen::MatrixXd* grad_features);

/// d(feature)/d(raw input j) for every feature row, given the raw column.
void feature_input_derivative(const NetArch& arch, const Eigen::Ref<const Eigen::VectorXd>& raw,
                              int input_index, Eigen::Ref<Eigen::VectorXd> out);

/// Converts raw field outputs to (mu, L).
FieldOutput decode_field(const NetArch& arch, const Eigen::Ref<const Eigen::VectorXd>& raw);

constexpr std::size_t kChunk = 64;

}  // namespace kernels

namespace reference {

/// Serial tape-recorded MLP; used to check the batched kernels.
std::vector<ad::Var> record_mlp(ad::Tape& tape, const NetArch& arch, std::span<const ad::Var> weights,
                                std::span<const ad::Var> raw_inputs);

/// Records the field network with weights as tape constants (or variables if
/// `weights_out` is non-null) and returns (mu, factor) as tape nodes.
struct FieldVars {
  std::vector<ad::Var> mu;
  std::vector<ad::Var> factor;  // row-major D x D, upper entries are constant zeros
};
FieldVars record_field(ad::Tape& tape, const GaussianFieldParams& params, std::span<const ad::Var> p,
                       ad::Var t, std::vector<ad::Var>* weights_out = nullptr);

/// Field jet computed entirely through the scalar tape.
FieldJet field_jet_tape(const GaussianFieldParams& params, const Vec& p, double t);

}  // namespace reference

}  // namespace prism
