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

#include "prism/network.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <string>

#include "prism/errors.hpp"
#include "prism/rng.hpp"

namespace prism {

using RowMajorMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using RowMajorMutMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

namespace {

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Cholesky factor of factor * factor^T + floor^2 I. NaN on failure so the
// callers' finiteness checks fire.
Mat floored_cholesky(const Mat& factor, double floor) {
  Mat sigma = factor * factor.transpose();
  sigma.diagonal().array() += floor * floor;
  Eigen::LLT<Mat> llt(sigma);
  if (llt.info() != Eigen::Success) return Mat::Constant(sigma.rows(), sigma.cols(), std::nan(""));
  return llt.matrixL();
}

struct LayerShape {
  int in;
  int out;
  std::size_t offset;  // start of W; bias follows at offset + in*out
};

std::vector<LayerShape> layer_shapes(const NetArch& arch) {
  std::vector<LayerShape> shapes;
  std::size_t offset = 0;
  int in = arch.feature_dim();
  for (int l = 0; l <= arch.hidden_layers; ++l) {
    const int out = l == arch.hidden_layers ? arch.output_dim() : arch.hidden_width;
    shapes.push_back({in, out, offset});
    offset += static_cast<std::size_t>(in) * out + out;
    in = out;
  }
  return shapes;
}

}  // namespace

NetArch NetArch::field(int dim, int hidden_layers, int hidden_width, int num_frequencies, double chol_floor) {
  NetArch a{NetKind::field, dim, hidden_layers, hidden_width, num_frequencies, chol_floor};
  a.validate();
  return a;
}

NetArch NetArch::inverse(int dim, int hidden_layers, int hidden_width, int num_frequencies) {
  NetArch a{NetKind::inverse, dim, hidden_layers, hidden_width, num_frequencies};
  a.validate();
  return a;
}

int NetArch::feature_dim() const {
  return encoded_dim() * (1 + 2 * num_frequencies) + (input_dim() - encoded_dim());
}

std::size_t NetArch::weight_count() const {
  std::size_t n = 0;
  for (const auto& s : layer_shapes(*this)) n += static_cast<std::size_t>(s.in) * s.out + s.out;
  return n;
}

void NetArch::validate() const {
  if (dim != 2 && dim != 3) throw ConfigError("NetArch: dim must be 2 or 3, got " + std::to_string(dim));
  if (hidden_layers < 1) throw ConfigError("NetArch: hidden_layers must be >= 1");
  if (hidden_width < 1) throw ConfigError("NetArch: hidden_width must be >= 1");
  if (num_frequencies < 0 || num_frequencies > 30) {
    throw ConfigError("NetArch: num_frequencies must be in [0, 30]");
  }
  if (!(chol_floor > 0.0)) throw ConfigError("NetArch: chol_floor must be positive");
}

std::vector<std::pair<std::size_t, std::size_t>> MlpParams::covariance_head_ranges() const {
  if (arch.kind != NetKind::field) return {};
  const LayerShape last = layer_shapes(arch).back();
  const std::size_t w_begin = last.offset + static_cast<std::size_t>(arch.dim) * last.in;
  const std::size_t w_end = last.offset + static_cast<std::size_t>(last.out) * last.in;
  const std::size_t b_begin = w_end + arch.dim;
  const std::size_t b_end = w_end + last.out;
  return {{w_begin, w_end}, {b_begin, b_end}};
}

MlpParams init_params(const NetArch& arch, std::uint64_t seed) {
  arch.validate();
  MlpParams params{arch, std::vector<double>(arch.weight_count(), 0.0)};
  Rng rng(seed, 0x1717);
  for (const auto& s : layer_shapes(arch)) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(s.in));
    const std::size_t n = static_cast<std::size_t>(s.in) * s.out + s.out;
    for (std::size_t i = 0; i < n; ++i) params.weights[s.offset + i] = rng.uniform(-bound, bound);
  }
  for (auto [b, e] : params.covariance_head_ranges()) {
    for (std::size_t i = b; i < e; ++i) params.weights[i] = 0.0;
  }
  return params;
}

std::vector<double> encode_input(std::span<const double> x, int num_frequencies) {
  std::vector<double> f(x.begin(), x.end());
  f.reserve(x.size() * (1 + 2 * num_frequencies));
  double scale = 1.0;
  for (int k = 0; k < num_frequencies; ++k, scale *= 2.0) {
    for (double v : x) f.push_back(std::sin(scale * v));
    for (double v : x) f.push_back(std::cos(scale * v));
  }
  return f;
}

namespace kernels {

void encode_batch(const NetArch& arch, const Eigen::MatrixXd& raw, Eigen::MatrixXd& features) {
  const int e = arch.encoded_dim();
  const int pass = arch.input_dim() - e;
  const auto b = raw.cols();
  features.resize(arch.feature_dim(), b);
  features.topRows(e) = raw.topRows(e);
  double scale = 1.0;
  int row = e;
  for (int k = 0; k < arch.num_frequencies; ++k, scale *= 2.0) {
    features.middleRows(row, e) = (scale * raw.topRows(e).array()).sin().matrix();
    features.middleRows(row + e, e) = (scale * raw.topRows(e).array()).cos().matrix();
    row += 2 * e;
  }
  if (pass > 0) features.bottomRows(pass) = raw.bottomRows(pass);
}

void feature_input_derivative(const NetArch& arch, const Eigen::Ref<const Eigen::VectorXd>& raw,
                              int input_index, Eigen::Ref<Eigen::VectorXd> out) {
  const int e = arch.encoded_dim();
  out.setZero();
  if (input_index >= e) {
    out(arch.feature_dim() - (arch.input_dim() - input_index)) = 1.0;
    return;
  }
  out(input_index) = 1.0;
  double scale = 1.0;
  int row = e;
  const double x = raw(input_index);
  for (int k = 0; k < arch.num_frequencies; ++k, scale *= 2.0) {
    out(row + input_index) = scale * std::cos(scale * x);
    out(row + e + input_index) = -scale * std::sin(scale * x);
    row += 2 * e;
  }
}

const Eigen::MatrixXd& forward(const MlpParams& params, const Eigen::MatrixXd& raw, Workspace& ws) {
  const auto shapes = layer_shapes(params.arch);
  ws.acts.resize(shapes.size() + 1);
  encode_batch(params.arch, raw, ws.acts[0]);
  const double* w = params.weights.data();
  for (std::size_t l = 0; l < shapes.size(); ++l) {
    const auto& s = shapes[l];
    RowMajorMap weight(w + s.offset, s.out, s.in);
    Eigen::Map<const Eigen::VectorXd> bias(w + s.offset + static_cast<std::size_t>(s.in) * s.out, s.out);
    Eigen::MatrixXd& out = ws.acts[l + 1];
    out.noalias() = weight * ws.acts[l];
    out.colwise() += bias;
    if (l + 1 < shapes.size()) out = out.unaryExpr([](double v) { return std::tanh(v); });
  }
  return ws.acts.back();
}

void backward(const MlpParams& params, Workspace& ws, const Eigen::MatrixXd& grad_out,
              std::span<double> grad_weights, Eigen::MatrixXd* grad_features) {
  const auto shapes = layer_shapes(params.arch);
  const bool want_w = !grad_weights.empty();
  ws.delta = grad_out;
  for (std::size_t li = shapes.size(); li-- > 0;) {
    const auto& s = shapes[li];
    if (want_w) {
      RowMajorMutMap gw(grad_weights.data() + s.offset, s.out, s.in);
      Eigen::Map<Eigen::VectorXd> gb(grad_weights.data() + s.offset + static_cast<std::size_t>(s.in) * s.out,
                                     s.out);
      ws.grad_w.noalias() = ws.delta * ws.acts[li].transpose();
      ws.grad_b = ws.delta.rowwise().sum();
      gw += ws.grad_w;
      gb += ws.grad_b;
    }
    if (li == 0 && grad_features == nullptr) break;
    RowMajorMap weight(params.weights.data() + s.offset, s.out, s.in);
    ws.scratch.noalias() = weight.transpose() * ws.delta;
    if (li == 0) {
      *grad_features = ws.scratch;
    } else {
      const auto& h = ws.acts[li].array();
      ws.delta = (ws.scratch.array() * (1.0 - h * h)).matrix();
    }
  }
}

FieldOutput decode_field(const NetArch& arch, const Eigen::Ref<const Eigen::VectorXd>& raw) {
  const int dim = arch.dim;
  FieldOutput out;
  out.mu = raw.head(dim);
  out.factor = Mat::Zero(dim, dim);
  int k = dim;
  for (int i = 0; i < dim; ++i) {
    for (int j = 0; j <= i; ++j, ++k) {
      out.factor(i, j) = i == j ? softplus(raw(k)) + arch.chol_floor : raw(k);
    }
  }
  out.chol = floored_cholesky(out.factor, arch.chol_floor);
  return out;
}

}  // namespace kernels

namespace {

void check_finite(const Eigen::MatrixXd& m, const char* what) {
  if (!m.allFinite()) throw NonFiniteError(std::string(what) + ": network output is not finite");
}

template <typename Fn>
void for_each_chunk(std::size_t n, Fn&& fn) {
  const auto n_chunks = static_cast<std::int64_t>((n + kernels::kChunk - 1) / kernels::kChunk);
  // Exceptions must not escape an OpenMP region; capture the first one.
  std::exception_ptr error;
#pragma omp parallel
  {
    kernels::Workspace ws;
#pragma omp for schedule(static)
    for (std::int64_t c = 0; c < n_chunks; ++c) {
      const std::size_t begin = static_cast<std::size_t>(c) * kernels::kChunk;
      const std::size_t end = std::min(n, begin + kernels::kChunk);
      try {
        fn(begin, end, ws);
      } catch (...) {
#pragma omp critical
        if (!error) error = std::current_exception();
      }
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace

std::vector<FieldOutput> forward_field_batch(const GaussianFieldParams& params,
                                             std::span<const FieldQuery> queries) {
  if (params.arch.kind != NetKind::field) throw ConfigError("forward_field: not a field network");
  const int dim = params.arch.dim;
  std::vector<FieldOutput> out(queries.size());
  for_each_chunk(queries.size(), [&](std::size_t begin, std::size_t end, kernels::Workspace& ws) {
    Eigen::MatrixXd raw(dim + 1, static_cast<Eigen::Index>(end - begin));
    for (std::size_t i = begin; i < end; ++i) {
      raw.col(i - begin) << queries[i].p, queries[i].t;
    }
    const Eigen::MatrixXd& y = kernels::forward(params, raw, ws);
    check_finite(y, "forward_field");
    for (std::size_t i = begin; i < end; ++i) out[i] = kernels::decode_field(params.arch, y.col(i - begin));
  });
  return out;
}

FieldOutput forward_field(const GaussianFieldParams& params, const Vec& p, double t) {
  const FieldQuery q{p, t};
  return forward_field_batch(params, std::span(&q, 1)).front();
}

std::vector<FieldJet> field_jet_batch(const GaussianFieldParams& params, std::span<const FieldQuery> queries) {
  if (params.arch.kind != NetKind::field) throw ConfigError("field_jet: not a field network");
  const NetArch& arch = params.arch;
  const int dim = arch.dim;
  const int n_out = arch.output_dim();
  std::vector<FieldJet> out(queries.size());
  for_each_chunk(queries.size(), [&](std::size_t begin, std::size_t end, kernels::Workspace& ws) {
    const auto b = static_cast<Eigen::Index>(end - begin);
    Eigen::MatrixXd raw(dim + 1, b);
    for (std::size_t i = begin; i < end; ++i) raw.col(i - begin) << queries[i].p, queries[i].t;
    const Eigen::MatrixXd y = kernels::forward(params, raw, ws);
    check_finite(y, "field_jet");

    Eigen::MatrixXd dfeat_dt(arch.feature_dim(), b);
    for (Eigen::Index c = 0; c < b; ++c) {
      kernels::feature_input_derivative(arch, raw.col(c), dim, dfeat_dt.col(c));
    }
    // One reverse pass per output component.
    Eigen::MatrixXd y_t(n_out, b);
    Eigen::MatrixXd seed = Eigen::MatrixXd::Zero(n_out, b);
    Eigen::MatrixXd grad_feat;
    for (int o = 0; o < n_out; ++o) {
      seed.setZero();
      seed.row(o).setOnes();
      kernels::backward(params, ws, seed, {}, &grad_feat);
      y_t.row(o) = (grad_feat.array() * dfeat_dt.array()).colwise().sum();
    }

    for (Eigen::Index c = 0; c < b; ++c) {
      const FieldOutput f = kernels::decode_field(arch, y.col(c));
      FieldJet& j = out[begin + static_cast<std::size_t>(c)];
      j.mu = f.mu;
      j.factor = f.factor;
      j.chol = f.chol;
      j.sigma = f.covariance();
      j.mu_t = y_t.col(c).head(dim);
      j.factor_t = Mat::Zero(dim, dim);
      int k = dim;
      for (int r = 0; r < dim; ++r) {
        for (int s = 0; s <= r; ++s, ++k) {
          j.factor_t(r, s) = r == s ? sigmoid(y(k, c)) * y_t(k, c) : y_t(k, c);
        }
      }
      j.sigma_t = j.factor_t * j.factor.transpose() + j.factor * j.factor_t.transpose();
    }
  });
  return out;
}

FieldJet field_jet(const GaussianFieldParams& params, const Vec& p, double t) {
  const FieldQuery q{p, t};
  return field_jet_batch(params, std::span(&q, 1)).front();
}

std::vector<double> forward_inverse_batch(const MlpParams& params, std::span<const InverseQuery> queries) {
  if (params.arch.kind != NetKind::inverse) throw ConfigError("forward_inverse: not an inverse network");
  const int dim = params.arch.dim;
  std::vector<double> out(queries.size());
  for_each_chunk(queries.size(), [&](std::size_t begin, std::size_t end, kernels::Workspace& ws) {
    Eigen::MatrixXd raw(2 * dim, static_cast<Eigen::Index>(end - begin));
    for (std::size_t i = begin; i < end; ++i) raw.col(i - begin) << queries[i].p, queries[i].d;
    const Eigen::MatrixXd& y = kernels::forward(params, raw, ws);
    check_finite(y, "forward_inverse");
    for (std::size_t i = begin; i < end; ++i) out[i] = y(0, i - begin);
  });
  return out;
}

double forward_inverse(const MlpParams& params, const Vec& p, const Vec& d) {
  const InverseQuery q{p, d};
  return forward_inverse_batch(params, std::span(&q, 1)).front();
}

namespace reference {

std::vector<ad::Var> record_mlp(ad::Tape& tape, const NetArch& arch, std::span<const ad::Var> weights,
                                std::span<const ad::Var> raw_inputs) {
  if (weights.size() != arch.weight_count()) throw std::invalid_argument("record_mlp: weight count mismatch");
  if (raw_inputs.size() != static_cast<std::size_t>(arch.input_dim())) {
    throw std::invalid_argument("record_mlp: input size mismatch");
  }
  const int e = arch.encoded_dim();
  std::vector<ad::Var> h(raw_inputs.begin(), raw_inputs.begin() + e);
  double scale = 1.0;
  for (int k = 0; k < arch.num_frequencies; ++k, scale *= 2.0) {
    for (int j = 0; j < e; ++j) h.push_back(ad::sin(raw_inputs[j] * scale));
    for (int j = 0; j < e; ++j) h.push_back(ad::cos(raw_inputs[j] * scale));
  }
  for (std::size_t j = e; j < raw_inputs.size(); ++j) h.push_back(raw_inputs[j]);

  const auto shapes = layer_shapes(arch);
  for (std::size_t l = 0; l < shapes.size(); ++l) {
    const auto& s = shapes[l];
    auto w = weights.subspan(s.offset, static_cast<std::size_t>(s.in) * s.out);
    auto b = weights.subspan(s.offset + static_cast<std::size_t>(s.in) * s.out, s.out);
    std::vector<ad::Var> z = tape.matvec(w, s.out, s.in, h);
    for (int r = 0; r < s.out; ++r) {
      z[r] = z[r] + b[r];
      if (l + 1 < shapes.size()) z[r] = ad::tanh(z[r]);
    }
    h = std::move(z);
  }
  return h;
}

FieldVars record_field(ad::Tape& tape, const GaussianFieldParams& params, std::span<const ad::Var> p, ad::Var t,
                       std::vector<ad::Var>* weights_out) {
  const int dim = params.arch.dim;
  std::vector<ad::Var> w;
  w.reserve(params.weights.size());
  for (double v : params.weights) w.push_back(weights_out ? tape.variable(v) : tape.constant(v));
  if (weights_out) *weights_out = w;
  std::vector<ad::Var> in(p.begin(), p.end());
  in.push_back(t);
  const std::vector<ad::Var> y = record_mlp(tape, params.arch, w, in);
  FieldVars out;
  out.mu.assign(y.begin(), y.begin() + dim);
  out.factor.assign(static_cast<std::size_t>(dim * dim), tape.constant(0.0));
  int k = dim;
  for (int i = 0; i < dim; ++i) {
    for (int j = 0; j <= i; ++j, ++k) {
      out.factor[i * dim + j] = i == j ? ad::softplus(y[k]) + params.arch.chol_floor : y[k];
    }
  }
  return out;
}

FieldJet field_jet_tape(const GaussianFieldParams& params, const Vec& p, double t) {
  const int dim = params.arch.dim;
  const ad::RecordedFn fn = [&](ad::Tape& tape, std::span<const ad::Var> in) {
    FieldVars fv = record_field(tape, params, in.first(dim), in[dim]);
    std::vector<ad::Var> outs = fv.mu;
    outs.insert(outs.end(), fv.factor.begin(), fv.factor.end());
    return outs;
  };
  std::vector<double> point(p.data(), p.data() + dim);
  point.push_back(t);
  const std::vector<double> col = ad::grad_wrt_input(fn, dim, point);

  ad::Tape tape;
  std::vector<ad::Var> in;
  for (double v : point) in.push_back(tape.variable(v));
  FieldVars fv = record_field(tape, params, std::span(in).first(dim), in[dim]);

  FieldJet j;
  j.mu.resize(dim);
  j.mu_t.resize(dim);
  j.factor.resize(dim, dim);
  j.factor_t.resize(dim, dim);
  for (int i = 0; i < dim; ++i) {
    j.mu(i) = fv.mu[i].value();
    j.mu_t(i) = col[i];
    for (int c = 0; c < dim; ++c) {
      j.factor(i, c) = fv.factor[i * dim + c].value();
      j.factor_t(i, c) = col[dim + i * dim + c];
    }
  }
  j.chol = floored_cholesky(j.factor, params.arch.chol_floor);
  j.sigma = j.chol * j.chol.transpose();
  j.sigma_t = j.factor_t * j.factor.transpose() + j.factor * j.factor_t.transpose();
  return j;
}

}  // namespace reference

}  // namespace prism
