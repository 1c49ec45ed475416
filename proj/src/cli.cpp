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

#include "prism/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include <CLI11.hpp>
#include <omp.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "prism/analysis.hpp"
#include "prism/errors.hpp"
#include "prism/fisher.hpp"
#include "prism/gaussian_field.hpp"
#include "prism/inverse_encoder.hpp"
#include "prism/io.hpp"
#include "prism/report.hpp"
#include "prism/rng.hpp"
#include "prism/starman.hpp"

namespace prism::cli {

namespace fs = std::filesystem;
using report::Csv;

namespace {

// Flag problems found after parsing but before any file is touched.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Options {
  std::uint64_t seed = 0;
  std::string out_dir = ".";
  int threads = 0;

  std::string variant = "G";
  std::string out;
  int train_subjects = -1;
  int test_subjects = -1;

  std::string dataset;
  std::string ckpt;
  std::string split = "test";

  // forward training; defaults sized for a single-core desk run
  int epochs = -1;
  int warm_epochs = 10;
  int layers = 3;
  int width = 64;
  int frequencies = 4;
  int batch_size = 512;
  double lr = 2e-3;
  // Larger than the library default: on Starman the perpendicular spread
  // is zero and the fit drives the smallest eigenvalue down to the floor.
  double chol_floor = 3e-3;
  double lambda_l1 = 1.0;
  double lambda_nll = 1.0;

  // inverse training
  int steps = 500;
  bool triplet_noise = false;

  std::int64_t mc_samples = 1000000;
  int grid = 20;
  double t0 = std::numeric_limits<double>::quiet_NaN();
  double t1 = std::numeric_limits<double>::quiet_NaN();
  std::int64_t subject = -1;
  int obs = -1;
  double lag = 0.3;
  int control = 0;
  bool maps = false;
  bool with_ood = false;
};

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("prism");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  const char* env = std::getenv("PRISM_LOG");
  const std::string level = env ? env : "info";
  if (level == "error") {
    spdlog::set_level(spdlog::level::err);
  } else if (level == "debug") {
    spdlog::set_level(spdlog::level::debug);
  } else {
    spdlog::set_level(spdlog::level::info);
  }
}

// --config FILE holds key=value lines; keys are flag names without dashes.
// Flags given on the command line win.
std::vector<std::string> apply_config(std::vector<std::string> args) {
  auto it = std::find(args.begin(), args.end(), "--config");
  if (it == args.end()) return args;
  if (it + 1 == args.end()) throw UsageError("--config needs a file argument");
  const std::string path = *(it + 1);
  args.erase(it, it + 2);
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file '" + path + "'");
  if (args.size() < 2) throw UsageError("--config must follow a subcommand");

  std::vector<std::string> extra;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw UsageError(path + ":" + std::to_string(lineno) + ": expected key=value");
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    const std::string key = "--" + trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (std::find(args.begin(), args.end(), key) != args.end()) continue;
    if (value == "true") {
      extra.push_back(key);
    } else if (value != "false") {
      extra.push_back(key);
      extra.push_back(value);
    }
  }
  args.insert(args.begin() + 2, extra.begin(), extra.end());
  return args;
}

fs::path out_path(const Options& o, const std::string& name) { return fs::path(o.out_dir) / name; }

void write_text(const fs::path& path, const std::string& text) {
  io::atomic_write(path, text);
  spdlog::info("wrote {}", path.string());
}

void require_file(const std::string& path, const char* flag) {
  if (path.empty()) throw UsageError(std::string(flag) + " is required");
  if (!fs::exists(path)) throw UsageError(std::string(flag) + ": file '" + path + "' does not exist");
}

io::Checkpoint load_ckpt(const Options& o, bool need_inverse) {
  require_file(o.ckpt, "--ckpt");
  auto ck = io::load_checkpoint(o.ckpt);
  if (need_inverse && !ck.inverse) {
    throw ConfigError("checkpoint '" + o.ckpt + "' has no inverse encoder; run train-inverse first");
  }
  return ck;
}

Dataset select_split(const Dataset& ds, const std::string& split) {
  if (split == "all") return ds;
  return ds.filter(split == "train" ? Split::train : Split::test);
}

std::optional<starman::StarmanConfig> starman_provenance(const nlohmann::json& prov) {
  if (!prov.is_object() || prov.value("generator", std::string()) != "starman") return std::nullopt;
  return io::starman_config_from_json(prov);
}

std::string hashes(const Options& o) {
  return report::provenance_line(o.ckpt.empty() ? "" : io::file_sha256(o.ckpt),
                                 o.dataset.empty() ? "" : io::file_sha256(o.dataset));
}

std::vector<std::string> point_cells(const Vec& p, int dim) {
  std::vector<std::string> c;
  for (int i = 0; i < dim; ++i) c.push_back(i < p.size() ? Csv::num(p(i)) : "");
  return c;
}

std::vector<std::string> coord_names(const std::string& prefix, int dim) {
  std::vector<std::string> c;
  for (int i = 0; i < dim; ++i) c.push_back(prefix + std::to_string(i));
  return c;
}

// ---- subcommands -----------------------------------------------------------

int cmd_generate(const Options& o) {
  if (o.variant != "G" && o.variant != "L") throw UsageError("--variant must be G or L");
  auto cfg = starman::StarmanConfig::defaults(o.variant == "G" ? starman::Variant::G : starman::Variant::L, o.seed);
  if (o.train_subjects >= 0) cfg.n_train_subjects = o.train_subjects;
  if (o.test_subjects >= 0) cfg.n_test_subjects = o.test_subjects;
  cfg.validate();
  const fs::path path = o.out.empty() ? out_path(o, "starman_" + o.variant + ".psd") : fs::path(o.out);

  const auto data = starman::generate(cfg);
  io::DatasetHeader header;
  header.dim = data.dataset.dim;
  header.t_min = cfg.t_min;
  header.t_max = cfg.t_max;
  header.seed = cfg.seed;
  header.provenance = io::to_json(cfg);
  io::write_dataset(path, data.dataset, header);
  spdlog::info("wrote {} ({} samples, {} subjects)", path.string(), data.dataset.samples.size(), data.subjects.size());
  return kOk;
}

int cmd_train(const Options& o) {
  require_file(o.dataset, "--dataset");
  const NetArch arch = NetArch::field(2, o.layers, o.width, o.frequencies, o.chol_floor);
  TrainConfig tc;
  tc.epochs = o.epochs < 0 ? 120 : o.epochs;
  tc.warm_epochs = o.warm_epochs;
  tc.batch_size = o.batch_size;
  tc.lr = o.lr;
  tc.lambda_l1 = o.lambda_l1;
  tc.lambda_nll = o.lambda_nll;
  tc.seed = o.seed;
  tc.validate();

  auto file = io::read_dataset(o.dataset);
  NetArch a = arch;
  a.dim = file.dataset.dim;
  a.validate();
  const Dataset train_split = file.dataset.filter(Split::train);
  if (train_split.empty()) throw InsufficientDataError("dataset has no training samples");

  const auto start = std::chrono::steady_clock::now();
  auto result = train(train_split, a, tc, [&](const EpochLog& log) {
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    spdlog::info("epoch {}/{} stage {} l1 {:.5f} nll {:.4f} ({:.0f}s)", log.epoch, tc.epochs, log.stage, log.l1, log.nll,
                 secs);
  });

  io::Checkpoint ck;
  ck.forward = std::move(result.params);
  ck.train_config = tc;
  ck.dataset_fingerprint = io::dataset_fingerprint(file.dataset);
  ck.created_at = io::reproducible_timestamp();
  ck.template_points = io::template_points(file.dataset);
  ck.t_min = file.dataset.t_min;
  ck.t_max = file.dataset.t_max;
  ck.provenance = file.header.provenance;
  const fs::path path = o.out.empty() ? out_path(o, "model.pck") : fs::path(o.out);
  io::save_checkpoint(path, ck);
  spdlog::info("wrote {}", path.string());

  Csv log({"epoch", "stage", "l1", "nll", "total"}, report::provenance_line("", io::file_sha256(o.dataset)));
  for (const auto& e : result.log) {
    log.add({Csv::num(std::int64_t{e.epoch}), Csv::num(std::int64_t{e.stage}), Csv::num(e.l1), Csv::num(e.nll),
             Csv::num(e.total)});
  }
  write_text(out_path(o, "train_log.csv"), log.str());
  return kOk;
}

int cmd_train_inverse(const Options& o) {
  auto ck = load_ckpt(o, false);
  InverseConfig ic;
  ic.epochs = o.epochs < 0 ? 40 : o.epochs;
  ic.steps_per_epoch = o.steps;
  ic.batch_size = o.batch_size;
  ic.lr = o.lr;
  ic.seed = o.seed;
  ic.triplets.t_min = ck.t_min;
  ic.triplets.t_max = ck.t_max;
  ic.triplets.add_noise = o.triplet_noise;
  ic.validate();
  const NetArch arch = NetArch::inverse(ck.forward.arch.dim, o.layers, o.width, o.frequencies);

  const fs::path path = o.out.empty() ? out_path(o, "model_inv.pck") : fs::path(o.out);
  if (fs::exists(path) && fs::equivalent(path, o.ckpt)) throw UsageError("refusing to overwrite the input checkpoint");

  auto res = train_inverse(ck.forward, arch, ck.template_points, ic, [&](const InverseEpochLog& log) {
    spdlog::info("inverse epoch {}/{} l1 {:.5f}", log.epoch, ic.epochs, log.l1);
  });
  const auto held_out = sample_triplets(ck.forward, 20000, ck.template_points, ic.triplets, o.seed, 0xFFFFFFFFULL);
  spdlog::info("held-out triplet MAE {:.5f}", inverse_mae(res.params, held_out));
  ck.inverse = std::move(res.params);
  ck.inverse_config = ic;
  io::save_checkpoint(path, ck);
  spdlog::info("wrote {}", path.string());
  return kOk;
}

int cmd_infer_time(const Options& o) {
  auto ck = load_ckpt(o, true);
  require_file(o.dataset, "--dataset");
  const auto file = io::read_dataset(o.dataset);
  const Dataset ds = select_split(file.dataset, o.split);
  const auto times = report::estimate_shape_times(ck.forward, *ck.inverse, ds, true);
  const std::string prov = hashes(o);

  Csv csv({"subject", "obs", "t", "tau_gt", "tau_mean", "tau_mean_clipped", "tau_weighted", "tau_arm", "tau_leg"}, prov);
  for (const auto& s : times) {
    csv.add({Csv::num(s.subject_id), Csv::num(std::int64_t{s.obs_index}), Csv::num(s.t), Csv::opt(s.tau_gt),
             Csv::num(s.tau_mean), Csv::num(s.tau_mean_clipped), Csv::opt(s.tau_weighted), Csv::opt(s.tau_arm),
             Csv::opt(s.tau_leg)});
  }
  write_text(out_path(o, "time_estimates.csv"), csv.str());

  if (o.maps) {
    const int dim = ds.dim;
    std::vector<std::string> cols{"subject", "obs", "vertex"};
    for (auto& c : coord_names("p", dim)) cols.push_back(c);
    for (auto& c : std::vector<std::string>{"tau_raw", "tau_clipped", "I_mu", "identifiable"}) cols.push_back(c);
    Csv maps(cols, prov);
    std::vector<Vec> p, d;
    std::vector<FieldQuery> q;
    for (const auto& s : ds.samples) {
      p.push_back(s.p);
      d.push_back(s.d);
      q.push_back({s.p, s.t});
    }
    const auto tau = time_map(*ck.inverse, p, d);
    const auto fisher = fisher_grid(ck.forward, q);
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
      const auto& s = ds.samples[i];
      std::vector<std::string> row{Csv::num(s.subject_id), Csv::num(std::int64_t{s.obs_index}),
                                   Csv::num(std::int64_t{s.vertex})};
      for (auto& c : point_cells(s.p, dim)) row.push_back(c);
      row.push_back(Csv::num(tau[i]));
      row.push_back(Csv::num(std::clamp(tau[i], ds.t_min, ds.t_max)));
      row.push_back(Csv::num(fisher[i].I_mu));
      row.push_back(fisher[i].identifiable() ? "1" : "0");
      maps.add(row);
    }
    write_text(out_path(o, "time_maps.csv"), maps.str());
  }
  return kOk;
}

std::string table4(const std::vector<report::LongitudinalPair>& pairs, const std::string& prov) {
  double cd = 0.0, hd = 0.0, emd = 0.0;
  for (const auto& p : pairs) {
    cd += p.metrics.chamfer;
    hd += p.metrics.hausdorff;
    emd += p.metrics.emd;
  }
  const double n = std::max<double>(1.0, static_cast<double>(pairs.size()));
  Csv csv({"method", "n_pairs", "chamfer_x100", "hausdorff_x100", "emd_x100"}, prov);
  csv.add({"prism", Csv::num(static_cast<std::int64_t>(pairs.size())), Csv::num(100.0 * cd / n),
           Csv::num(100.0 * hd / n), Csv::num(100.0 * emd / n)});
  return csv.str();
}

std::string longitudinal_csv(const std::vector<report::LongitudinalPair>& pairs, const std::string& prov) {
  Csv csv({"subject", "obs0", "obs1", "t0", "t1", "tau0", "z", "tau1", "chamfer", "hausdorff", "emd"}, prov);
  for (const auto& p : pairs) {
    csv.add({Csv::num(p.subject_id), Csv::num(std::int64_t{p.obs0}), Csv::num(std::int64_t{p.obs1}), Csv::num(p.t0),
             Csv::num(p.t1), Csv::num(p.tau0), Csv::num(p.z), Csv::num(p.tau1), Csv::num(p.metrics.chamfer),
             Csv::num(p.metrics.hausdorff), Csv::num(p.metrics.emd)});
  }
  return csv.str();
}

int cmd_predict(const Options& o) {
  auto ck = load_ckpt(o, true);
  require_file(o.dataset, "--dataset");
  const auto file = io::read_dataset(o.dataset);
  const Dataset ds = select_split(file.dataset, o.split);
  const std::string prov = hashes(o);
  const TimeRange range{ck.t_min, ck.t_max};

  if (o.subject < 0) {
    const auto pairs = report::evaluate_longitudinal(ck.forward, *ck.inverse, ds, ck.template_points, o.seed);
    write_text(out_path(o, "longitudinal.csv"), longitudinal_csv(pairs, prov));
    write_text(out_path(o, "table4.csv"), table4(pairs, prov));
    return kOk;
  }

  if (std::isnan(o.t1)) throw UsageError("predict --subject needs --t1");
  const auto shapes = ds.shapes();
  const ShapeView* anchor = nullptr;
  for (const auto& s : shapes) {
    if (s.subject_id != o.subject || (o.obs >= 0 && s.obs_index != o.obs)) continue;
    if (!anchor || s.t < anchor->t) anchor = &s;
  }
  if (!anchor) throw ConfigError("subject " + std::to_string(o.subject) + " not found in the selected split");
  std::vector<Vec> p, d;
  for (const auto& x : anchor->points) {
    p.push_back(x.p);
    d.push_back(x.d);
  }
  const double t0 = std::isnan(o.t0) ? anchor->t : o.t0;
  const auto pred = predict_longitudinal(ck.forward, *ck.inverse, p, d, t0, o.t1, range);
  const int dim = ds.dim;
  std::vector<std::string> cols{"vertex"};
  for (auto& c : coord_names("p", dim)) cols.push_back(c);
  for (auto& c : coord_names("y", dim)) cols.push_back(c);
  Csv csv(cols, prov + fmt::format(" subject={} t0={} t1={} tau0={} z={} tau1={}", o.subject, t0, o.t1, pred.tau0,
                                   pred.z, pred.tau1));
  for (std::size_t i = 0; i < p.size(); ++i) {
    std::vector<std::string> row{Csv::num(std::int64_t{anchor->points[i].vertex})};
    for (auto& c : point_cells(p[i], dim)) row.push_back(c);
    for (auto& c : point_cells(pred.shape[i], dim)) row.push_back(c);
    csv.add(row);
  }
  write_text(out_path(o, "prediction.csv"), csv.str());
  return kOk;
}

double run_ood(const Options& o, const io::Checkpoint& ck, const nlohmann::json& provenance, const std::string& prov) {
  const auto cfg = starman_provenance(provenance);
  if (!cfg) throw ConfigError("synthetic OOD needs a dataset generated by this tool (Starman provenance)");
  if (o.control < 0 || o.control >= starman::kControls) throw UsageError("--control must be in 0..3");
  const auto ood = starman::make_synthetic_ood(*cfg, o.lag, o.control);
  auto recs = report::score_shapes(ck.forward, *ck.inverse, ood.normal, OodLabel::normal);
  const auto anom = report::score_shapes(ck.forward, *ck.inverse, ood.anomalous, OodLabel::anomalous);
  recs.insert(recs.end(), anom.begin(), anom.end());
  const double a = report::ood_auc(recs);

  Csv scores({"subject", "obs", "t", "label", "score", "argmin_vertex", "tau_max"}, prov);
  for (const auto& r : recs) {
    scores.add({Csv::num(r.subject_id), Csv::num(std::int64_t{r.obs_index}), Csv::num(r.t),
                r.label == OodLabel::normal ? "normal" : "anomalous", Csv::num(r.score),
                Csv::num(std::int64_t{r.argmin_vertex}), Csv::num(r.tau_max)});
  }
  write_text(out_path(o, "ood_scores.csv"), scores.str());
  Csv t5({"method", "lag", "control", "n_normal", "n_anomalous", "auc"}, prov);
  t5.add({"local_lag", Csv::num(o.lag), Csv::num(std::int64_t{o.control}),
          Csv::num(static_cast<std::int64_t>(recs.size() - anom.size())), Csv::num(static_cast<std::int64_t>(anom.size())),
          Csv::num(a)});
  write_text(out_path(o, "table5.csv"), t5.str());
  return a;
}

int cmd_ood(const Options& o) {
  auto ck = load_ckpt(o, true);
  nlohmann::json provenance = ck.provenance;
  if (!o.dataset.empty()) {
    require_file(o.dataset, "--dataset");
    provenance = io::read_dataset(o.dataset).header.provenance;
  }
  const double a = run_ood(o, ck, provenance, hashes(o));
  spdlog::info("OOD AUC {:.4f} (lag {}, control {})", a, o.lag, o.control);
  return kOk;
}

int cmd_validate_fisher(const Options& o) {
  if (o.grid < 1) throw UsageError("--grid must be >= 1");
  if (o.mc_samples < 10000) throw UsageError("--mc-samples must be >= 10000");
  auto ck = load_ckpt(o, false);
  if (ck.template_points.empty()) throw ConfigError("checkpoint has no template points");
  const int dim = ck.forward.arch.dim;

  Rng rng(o.seed, 0xF15EULL);
  std::vector<std::string> cols = coord_names("p", dim);
  for (auto& c : std::vector<std::string>{"t", "I_mu", "I_sigma", "I_full", "sigma2_tau", "mc_I", "mc_se", "score_mean",
                                          "score_mean_se", "cov_lin_quad", "cov_lin_quad_se", "pass"}) {
    cols.push_back(c);
  }
  Csv csv(cols, hashes(o) + fmt::format(" mc_samples={} seed={}", o.mc_samples, o.seed));
  int failures = 0;
  for (int g = 0; g < o.grid; ++g) {
    const auto k = rng.uniform_int(0, static_cast<std::int64_t>(ck.template_points.size()) - 1);
    const Vec p = ck.template_points[static_cast<std::size_t>(k)];
    const double t = rng.uniform(ck.t_min, ck.t_max);
    const FieldJet jet = field_jet(ck.forward, p, t);
    const FisherReport rep = fisher_from_jet(jet, p, t);
    const McFisherResult mc = mc_fisher(jet, o.mc_samples, o.seed + static_cast<std::uint64_t>(g));
    const bool ok_i = std::abs(rep.I_full - mc.mc_I) <= std::max(0.02 * std::abs(rep.I_full), 3.0 * mc.mc_I_se);
    const bool ok_mean = std::abs(mc.score_mean) <= 3.0 * mc.score_mean_se;
    const bool ok_cov = std::abs(mc.cov_linear_quadratic) <= 3.0 * mc.cov_linear_quadratic_se;
    const bool ok = ok_i && ok_mean && ok_cov;
    failures += ok ? 0 : 1;
    auto row = point_cells(p, dim);
    for (auto& c : std::vector<std::string>{Csv::num(t), Csv::num(rep.I_mu), Csv::num(rep.I_sigma), Csv::num(rep.I_full),
                                            Csv::num(rep.sigma2_tau), Csv::num(mc.mc_I), Csv::num(mc.mc_I_se),
                                            Csv::num(mc.score_mean), Csv::num(mc.score_mean_se),
                                            Csv::num(mc.cov_linear_quadratic), Csv::num(mc.cov_linear_quadratic_se),
                                            ok ? "1" : "0"}) {
      row.push_back(c);
    }
    csv.add(row);
    spdlog::debug("grid {} t {:.3f} I {:.6g} mc {:.6g} +- {:.2g} {}", g, t, rep.I_full, mc.mc_I, mc.mc_I_se,
                  ok ? "ok" : "FAIL");
  }
  write_text(out_path(o, "fisher_grid.csv"), csv.str());
  if (failures > 0) {
    spdlog::error("validate-fisher: {} of {} grid points outside tolerance", failures, o.grid);
    return kValidationFailed;
  }
  spdlog::info("validate-fisher: all {} grid points within tolerance", o.grid);
  return kOk;
}

int cmd_report(const Options& o) {
  auto ck = load_ckpt(o, true);
  require_file(o.dataset, "--dataset");
  const auto file = io::read_dataset(o.dataset);
  const Dataset ds = select_split(file.dataset, o.split);
  const std::string prov = hashes(o);
  const auto times = report::estimate_shape_times(ck.forward, *ck.inverse, ds, true);

  // table2.csv: global time estimation.
  Csv t2({"estimator", "n", "r", "r2", "mae"}, prov);
  for (bool weighted : {false, true}) {
    std::vector<double> pred, truth;
    for (const auto& s : times) {
      if (!s.tau_gt || (weighted && !s.tau_weighted)) continue;
      pred.push_back(weighted ? *s.tau_weighted : s.tau_mean);
      truth.push_back(*s.tau_gt);
    }
    if (pred.size() < 2) continue;
    const auto m = scalar_metrics(pred, truth);
    t2.add({weighted ? "fisher_weighted" : "mean", Csv::num(static_cast<std::int64_t>(pred.size())), Csv::num(m.r),
            Csv::num(m.r2), Csv::num(m.mae)});
  }
  write_text(out_path(o, "table2.csv"), t2.str());

  // table3.csv: per-limb estimation.
  Csv t3({"location", "n", "r", "r2", "mae"}, prov);
  for (Limb limb : {Limb::arm, Limb::leg}) {
    std::vector<double> pred, truth;
    for (const auto& s : times) {
      const auto& est = limb == Limb::arm ? s.tau_arm : s.tau_leg;
      const auto& gt = limb == Limb::arm ? s.tau_gt_arm : s.tau_gt_leg;
      if (!est || !gt) continue;
      pred.push_back(*est);
      truth.push_back(*gt);
    }
    if (pred.size() < 2) continue;
    const auto m = scalar_metrics(pred, truth);
    t3.add({to_string(limb), Csv::num(static_cast<std::int64_t>(pred.size())), Csv::num(m.r), Csv::num(m.r2),
            Csv::num(m.mae)});
  }
  write_text(out_path(o, "table3.csv"), t3.str());

  // table4.csv: longitudinal prediction.
  const auto pairs = report::evaluate_longitudinal(ck.forward, *ck.inverse, ds, ck.template_points, o.seed);
  write_text(out_path(o, "table4.csv"), table4(pairs, prov));
  write_text(out_path(o, "longitudinal.csv"), longitudinal_csv(pairs, prov));

  // Figures.
  const auto grid = report::linspace(ck.t_min, ck.t_max, 51);
  std::vector<double> band_t, band_sigma;
  for (double t : grid) {
    try {
      band_sigma.push_back(population_sigma_tau(ck.forward, ck.template_points, t));
      band_t.push_back(t);
    } catch (const UnidentifiableError&) {
    }
  }
  write_text(out_path(o, "fig3.svg"), report::fig3_svg(times, band_t, band_sigma));

  std::vector<report::SigmaCurve> curves;
  const auto sgrid = report::linspace(0.2, 0.8, 10);
  if (const auto cfg = starman_provenance(file.header.provenance)) {
    static const char* names[] = {"right arm tip", "left arm tip", "left leg tip", "right leg tip"};
    for (int c = 0; c < starman::kControls; ++c) {
      const Limb limb = cfg->control_limb(c);
      const auto& truth = cfg->variant == starman::Variant::G ? cfg->sigma_global
                          : limb == Limb::arm                 ? cfg->sigma_arm
                                                              : cfg->sigma_leg;
      curves.push_back(report::sigma_curve(ck.forward, names[c], cfg->control_points[c], sgrid, truth));
    }
  } else {
    curves.push_back(report::sigma_curve(ck.forward, "template point 0", ck.template_points.front(), sgrid, std::nullopt));
  }
  write_text(out_path(o, "fig4.svg"), report::fig4_svg(curves));

  Csv f4({"curve", "t", "sigma_estimated", "sigma_true"}, prov);
  for (const auto& c : curves) {
    for (std::size_t i = 0; i < c.t.size(); ++i) {
      f4.add({c.name, Csv::num(c.t[i]), Csv::num(c.estimated[i]), c.truth.empty() ? "" : Csv::num(c.truth[i])});
    }
  }
  write_text(out_path(o, "fig4.csv"), f4.str());

  if (o.with_ood) run_ood(o, ck, file.header.provenance, prov);
  return kOk;
}

}  // namespace

int run(std::vector<std::string> args) {
  static bool logging_ready = false;
  if (!logging_ready) {
    setup_logging();
    logging_ready = true;
  }

  Options o;
  CLI::App app{"Probabilistic shape trajectories with intrinsic time", "prism"};
  app.require_subcommand(1);

  auto common = [&](CLI::App* sub) {
    sub->add_option("--seed", o.seed, "seed for every random choice");
    sub->add_option("--out-dir", o.out_dir, "directory for all outputs");
    sub->add_option("--threads", o.threads, "cap on worker threads (0 = runtime default)")->check(CLI::NonNegativeNumber);
  };
  auto net = [&](CLI::App* sub) {
    sub->add_option("--epochs", o.epochs);
    sub->add_option("--layers", o.layers);
    sub->add_option("--width", o.width);
    sub->add_option("--frequencies", o.frequencies);
    sub->add_option("--batch-size", o.batch_size);
    sub->add_option("--lr", o.lr);
  };

  auto* gen = app.add_subcommand("generate", "write a synthetic Starman dataset");
  common(gen);
  gen->add_option("--variant", o.variant)->check(CLI::IsMember({"G", "L"}));
  gen->add_option("--out", o.out, "output file (default <out-dir>/starman_<variant>.psd)");
  gen->add_option("--train-subjects", o.train_subjects);
  gen->add_option("--test-subjects", o.test_subjects);

  auto* tr = app.add_subcommand("train", "fit the Gaussian displacement field");
  common(tr);
  net(tr);
  tr->add_option("--dataset", o.dataset)->required();
  tr->add_option("--out", o.out, "checkpoint path (default <out-dir>/model.pck)");
  tr->add_option("--warm-epochs", o.warm_epochs);
  tr->add_option("--chol-floor", o.chol_floor);
  tr->add_option("--lambda-l1", o.lambda_l1);
  tr->add_option("--lambda-nll", o.lambda_nll);

  auto* ti = app.add_subcommand("train-inverse", "fit the inverse time encoder");
  common(ti);
  net(ti);
  ti->add_option("--ckpt", o.ckpt)->required();
  ti->add_option("--out", o.out, "checkpoint path (default <out-dir>/model_inv.pck)");
  ti->add_option("--steps", o.steps, "optimizer steps per epoch");
  ti->add_flag("--triplet-noise", o.triplet_noise, "draw triplet displacements from N(mu, Sigma)");

  auto* it = app.add_subcommand("infer-time", "estimate intrinsic time of every shape");
  common(it);
  it->add_option("--ckpt", o.ckpt)->required();
  it->add_option("--dataset", o.dataset)->required();
  it->add_option("--split", o.split)->check(CLI::IsMember({"train", "test", "all"}));
  it->add_flag("--maps", o.maps, "also write per-point time maps");

  auto* pr = app.add_subcommand("predict", "longitudinal prediction");
  common(pr);
  pr->add_option("--ckpt", o.ckpt)->required();
  pr->add_option("--dataset", o.dataset)->required();
  pr->add_option("--split", o.split)->check(CLI::IsMember({"train", "test", "all"}));
  pr->add_option("--subject", o.subject, "anchor subject (omit to evaluate every held-out pair)");
  pr->add_option("--obs", o.obs, "anchor observation of the subject (default earliest)");
  pr->add_option("--t0", o.t0, "chronological time of the anchor (default recorded)");
  pr->add_option("--t1", o.t1, "target chronological time");

  auto* od = app.add_subcommand("ood", "synthetic out-of-distribution scoring");
  common(od);
  od->add_option("--ckpt", o.ckpt)->required();
  od->add_option("--dataset", o.dataset, "dataset whose provenance defines the generator");
  od->add_option("--lag", o.lag);
  od->add_option("--control", o.control, "lagged control point");

  auto* vf = app.add_subcommand("validate-fisher", "closed-form Fisher information vs Monte Carlo");
  common(vf);
  vf->add_option("--ckpt", o.ckpt)->required();
  vf->add_option("--grid", o.grid);
  vf->add_option("--mc-samples", o.mc_samples);

  auto* rp = app.add_subcommand("report", "tables and figures for a trained model");
  common(rp);
  rp->add_option("--ckpt", o.ckpt)->required();
  rp->add_option("--dataset", o.dataset)->required();
  rp->add_option("--split", o.split)->check(CLI::IsMember({"train", "test", "all"}));
  rp->add_flag("--ood", o.with_ood, "also run the synthetic OOD experiment");
  rp->add_option("--lag", o.lag);
  rp->add_option("--control", o.control);

  try {
    args = apply_config(std::move(args));
    std::vector<std::string> rev(args.rbegin(), args.rend() - 1);
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }

  if (o.threads > 0) omp_set_num_threads(o.threads);
  try {
    auto* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    if (name == "generate") return cmd_generate(o);
    if (name == "train") return cmd_train(o);
    if (name == "train-inverse") return cmd_train_inverse(o);
    if (name == "infer-time") return cmd_infer_time(o);
    if (name == "predict") return cmd_predict(o);
    if (name == "ood") return cmd_ood(o);
    if (name == "validate-fisher") return cmd_validate_fisher(o);
    if (name == "report") return cmd_report(o);
    return kUsage;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
}

}  // namespace prism::cli
