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

#include "prism/io.hpp"

#include <bit>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>
#include <openssl/evp.h>

#include "prism/errors.hpp"

namespace prism::io {

using nlohmann::json;

namespace {

constexpr std::string_view kDatasetMagic = "PRISM-PSD";
constexpr std::string_view kCheckpointMagic = "PRISM-PCK";

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new()) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) != 1) throw IoError("sha256: init failed");
  }
  ~Sha256() { EVP_MD_CTX_free(ctx_); }
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void update(const void* data, std::size_t n) { EVP_DigestUpdate(ctx_, data, n); }
  void u64(std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    update(b, 8);
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

  std::string hex() {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_, md, &len);
    std::string out;
    for (unsigned int i = 0; i < len; ++i) out += fmt::format("{:02x}", md[i]);
    return out;
  }

 private:
  EVP_MD_CTX* ctx_;
};

// Splits off the first line; returns false when there is no newline.
bool take_line(std::string_view& rest, std::string_view& line) {
  const auto pos = rest.find('\n');
  if (pos == std::string_view::npos) return false;
  line = rest.substr(0, pos);
  rest.remove_prefix(pos + 1);
  return true;
}

int parse_magic(std::string_view line, std::string_view magic) {
  if (line.substr(0, magic.size()) != magic || line.size() < magic.size() + 2 || line[magic.size()] != ' ') {
    throw FormatError(fmt::format("line 1: expected magic '{}'", magic));
  }
  const std::string num(line.substr(magic.size() + 1));
  char* end = nullptr;
  const long v = std::strtol(num.c_str(), &end, 10);
  if (end == num.c_str() || *end != '\0') throw FormatError("line 1: malformed format version");
  return static_cast<int>(v);
}

json vec_json(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Vec vec_from_json(const json& j, int expected_dim, std::size_t line, const char* field) {
  if (!j.is_array()) throw SchemaError(fmt::format("line {}: field '{}' must be an array", line, field));
  if (expected_dim > 0 && static_cast<int>(j.size()) != expected_dim) {
    throw SchemaError(fmt::format("line {}: field '{}' has {} coordinates, file dimension is {}", line, field,
                                  j.size(), expected_dim));
  }
  if (j.empty() || j.size() > static_cast<std::size_t>(kMaxDim)) {
    throw SchemaError(fmt::format("line {}: field '{}' has unsupported dimension {}", line, field, j.size()));
  }
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw SchemaError(fmt::format("line {}: field '{}' must hold numbers", line, field));
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

template <typename T>
T required(const json& obj, const char* key, std::size_t line) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError(fmt::format("line {}: missing field '{}'", line, key));
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw SchemaError(fmt::format("line {}: field '{}' has the wrong type", line, key));
  }
}

void append_vec(std::string& out, const Vec& v) {
  out += '[';
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    fmt::format_to(std::back_inserter(out), "{}", v(i));
  }
  out += ']';
}

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw NonFiniteError(fmt::format("write_dataset: non-finite {}", what));
}

json logistic_json(const starman::LogisticParams& p) {
  return {{"sigma_min", p.sigma_min}, {"sigma_max", p.sigma_max}, {"t50", p.t50}, {"k", p.k}};
}

starman::LogisticParams logistic_from_json(const json& j) {
  return {j.at("sigma_min").get<double>(), j.at("sigma_max").get<double>(), j.at("t50").get<double>(),
          j.at("k").get<double>()};
}

void append_doubles(std::string& out, const std::vector<double>& w) {
  for (double v : w) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) out += static_cast<char>((bits >> (8 * i)) & 0xFF);
  }
}

std::vector<double> read_doubles(std::string_view bytes) {
  std::vector<double> out(bytes.size() / 8);
  for (std::size_t k = 0; k < out.size(); ++k) {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[8 * k + i])) << (8 * i);
    out[k] = std::bit_cast<double>(bits);
  }
  return out;
}

}  // namespace

std::string sha256_hex(std::string_view bytes) {
  Sha256 h;
  h.update(bytes.data(), bytes.size());
  return h.hex();
}

std::string file_sha256(const std::filesystem::path& path) { return sha256_hex(read_file(path)); }

std::string dataset_fingerprint(const Dataset& ds) {
  Sha256 h;
  h.u64(static_cast<std::uint64_t>(ds.dim));
  h.f64(ds.t_min);
  h.f64(ds.t_max);
  h.u64(ds.samples.size());
  for (const ShapeSample& s : ds.samples) {
    h.u64(static_cast<std::uint64_t>(s.subject_id));
    h.u64(static_cast<std::uint64_t>(static_cast<std::uint32_t>(s.obs_index)));
    h.u64(static_cast<std::uint64_t>(static_cast<std::uint32_t>(s.vertex)));
    h.u64(static_cast<std::uint64_t>(s.split));
    h.f64(s.t);
    for (Eigen::Index i = 0; i < s.p.size(); ++i) h.f64(s.p(i));
    for (Eigen::Index i = 0; i < s.d.size(); ++i) h.f64(s.d(i));
    h.u64(s.tau_gt ? 1 : 0);
    h.f64(s.tau_gt.value_or(0.0));
    h.u64(s.limb ? 1 + static_cast<std::uint64_t>(*s.limb) : 0);
  }
  return h.hex();
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failed for '" + path.string() + "'");
  return std::move(ss).str();
}

void atomic_write(const std::filesystem::path& path, std::string_view bytes) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory '" + path.parent_path().string() + "': " + ec.message());
  }
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw IoError("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw IoError("cannot rename '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
  }
}

std::int64_t reproducible_timestamp() {
  const char* env = std::getenv("SOURCE_DATE_EPOCH");
  if (!env || !*env) return 0;
  char* end = nullptr;
  const long long v = std::strtoll(env, &end, 10);
  return (end && *end == '\0') ? static_cast<std::int64_t>(v) : 0;
}

// ---- dataset ---------------------------------------------------------------

void write_dataset(const std::filesystem::path& path, const Dataset& dataset, const DatasetHeader& header) {
  if (header.dim != dataset.dim) throw ConfigError("write_dataset: header and dataset dimensions differ");
  json h = {{"dim", header.dim},
            {"t_min", header.t_min},
            {"t_max", header.t_max},
            {"time_units", header.time_units},
            {"provenance", header.provenance}};
  h["seed"] = header.seed ? json(*header.seed) : json(nullptr);

  std::string out = fmt::format("{} {}\n", kDatasetMagic, kDatasetVersion);
  out += h.dump();
  out += '\n';
  out.reserve(out.size() + dataset.samples.size() * 140);
  for (const ShapeSample& s : dataset.samples) {
    if (s.p.size() != dataset.dim || s.d.size() != dataset.dim) throw ConfigError("write_dataset: sample dimension mismatch");
    require_finite(s.t, "time");
    fmt::format_to(std::back_inserter(out), "{{\"subject\":{},\"obs\":{},\"vertex\":{},\"split\":\"{}\",\"t\":{},\"p\":",
                   s.subject_id, s.obs_index, s.vertex, to_string(s.split), s.t);
    append_vec(out, s.p);
    out += ",\"d\":";
    append_vec(out, s.d);
    if (s.tau_gt) {
      require_finite(*s.tau_gt, "tau");
      fmt::format_to(std::back_inserter(out), ",\"tau\":{}", *s.tau_gt);
    }
    if (s.limb) fmt::format_to(std::back_inserter(out), ",\"limb\":\"{}\"", to_string(*s.limb));
    out += "}\n";
  }
  atomic_write(path, out);
}

DatasetFile parse_dataset(std::string_view text) {
  std::string_view rest = text;
  std::string_view line;
  if (!take_line(rest, line)) throw FormatError("line 1: missing header");
  const int version = parse_magic(line, kDatasetMagic);
  if (version != kDatasetVersion) throw VersionError(version, kDatasetVersion);
  if (!take_line(rest, line)) throw FormatError("line 2: missing header record");

  DatasetFile file;
  json h;
  try {
    h = json::parse(line);
  } catch (const json::exception& e) {
    throw FormatError(fmt::format("line 2: malformed header: {}", e.what()));
  }
  if (!h.is_object()) throw FormatError("line 2: header must be an object");
  auto& hd = file.header;
  hd.format_version = version;
  hd.dim = required<int>(h, "dim", 2);
  hd.t_min = required<double>(h, "t_min", 2);
  hd.t_max = required<double>(h, "t_max", 2);
  hd.time_units = h.value("time_units", std::string("normalized"));
  if (h.contains("seed") && !h["seed"].is_null()) hd.seed = h["seed"].get<std::uint64_t>();
  if (h.contains("provenance")) hd.provenance = h["provenance"];
  if (hd.dim < 1 || hd.dim > kMaxDim) throw SchemaError(fmt::format("line 2: unsupported dimension {}", hd.dim));

  Dataset& ds = file.dataset;
  ds.dim = hd.dim;
  ds.t_min = hd.t_min;
  ds.t_max = hd.t_max;
  std::size_t lineno = 2;
  while (!rest.empty()) {
    ++lineno;
    if (!take_line(rest, line)) throw FormatError(fmt::format("line {}: truncated record (no newline)", lineno));
    if (line.empty()) continue;
    json r;
    try {
      r = json::parse(line);
    } catch (const json::exception& e) {
      throw FormatError(fmt::format("line {}: malformed record: {}", lineno, e.what()));
    }
    if (!r.is_object()) throw FormatError(fmt::format("line {}: record must be an object", lineno));
    ShapeSample s;
    s.subject_id = required<std::int64_t>(r, "subject", lineno);
    s.obs_index = required<std::int32_t>(r, "obs", lineno);
    s.vertex = required<std::int32_t>(r, "vertex", lineno);
    const auto split = required<std::string>(r, "split", lineno);
    if (split == "train") {
      s.split = Split::train;
    } else if (split == "test") {
      s.split = Split::test;
    } else {
      throw SchemaError(fmt::format("line {}: unknown split '{}'", lineno, split));
    }
    s.t = required<double>(r, "t", lineno);
    if (!r.contains("p")) throw SchemaError(fmt::format("line {}: missing field 'p'", lineno));
    if (!r.contains("d")) throw SchemaError(fmt::format("line {}: missing field 'd'", lineno));
    s.p = vec_from_json(r["p"], ds.dim, lineno, "p");
    s.d = vec_from_json(r["d"], ds.dim, lineno, "d");
    if (r.contains("tau")) s.tau_gt = required<double>(r, "tau", lineno);
    if (r.contains("limb")) {
      const auto limb = required<std::string>(r, "limb", lineno);
      if (limb == "arm") {
        s.limb = Limb::arm;
      } else if (limb == "leg") {
        s.limb = Limb::leg;
      } else {
        throw SchemaError(fmt::format("line {}: unknown limb '{}'", lineno, limb));
      }
    }
    ds.samples.push_back(std::move(s));
  }
  return file;
}

DatasetFile read_dataset(const std::filesystem::path& path) { return parse_dataset(read_file(path)); }

std::vector<Vec> template_points(const Dataset& dataset) {
  std::map<std::int32_t, Vec> by_vertex;
  for (const ShapeSample& s : dataset.samples) by_vertex.try_emplace(s.vertex, s.p);
  std::vector<Vec> out;
  out.reserve(by_vertex.size());
  for (auto& [v, p] : by_vertex) out.push_back(p);
  return out;
}

// ---- config (de)serialization ----------------------------------------------

json to_json(const starman::StarmanConfig& c) {
  json cps = json::array(), dirs = json::array();
  for (int i = 0; i < starman::kControls; ++i) {
    cps.push_back(vec_json(c.control_points[i]));
    dirs.push_back(vec_json(c.directions[i]));
  }
  return {{"generator", "starman"},
          {"variant", c.variant == starman::Variant::G ? "G" : "L"},
          {"n_vertices", c.n_vertices},
          {"outer_radius", c.outer_radius},
          {"inner_radius", c.inner_radius},
          {"control_points", cps},
          {"directions", dirs},
          {"rbf_sigma", c.rbf_sigma},
          {"sigma_global", logistic_json(c.sigma_global)},
          {"sigma_arm", logistic_json(c.sigma_arm)},
          {"sigma_leg", logistic_json(c.sigma_leg)},
          {"n_train_subjects", c.n_train_subjects},
          {"n_test_subjects", c.n_test_subjects},
          {"min_obs", c.min_obs},
          {"max_obs", c.max_obs},
          {"t_min", c.t_min},
          {"t_max", c.t_max},
          {"seed", c.seed}};
}

starman::StarmanConfig starman_config_from_json(const json& j) {
  try {
    const auto variant = j.at("variant").get<std::string>();
    if (variant != "G" && variant != "L") throw SchemaError("starman config: unknown variant '" + variant + "'");
    auto c = starman::StarmanConfig::defaults(variant == "G" ? starman::Variant::G : starman::Variant::L,
                                              j.at("seed").get<std::uint64_t>());
    c.n_vertices = j.at("n_vertices").get<int>();
    c.outer_radius = j.at("outer_radius").get<double>();
    c.inner_radius = j.at("inner_radius").get<double>();
    for (int i = 0; i < starman::kControls; ++i) {
      c.control_points[i] = vec_from_json(j.at("control_points").at(i), 2, 2, "control_points");
      c.directions[i] = vec_from_json(j.at("directions").at(i), 2, 2, "directions");
    }
    c.rbf_sigma = j.at("rbf_sigma").get<double>();
    c.sigma_global = logistic_from_json(j.at("sigma_global"));
    c.sigma_arm = logistic_from_json(j.at("sigma_arm"));
    c.sigma_leg = logistic_from_json(j.at("sigma_leg"));
    c.n_train_subjects = j.at("n_train_subjects").get<int>();
    c.n_test_subjects = j.at("n_test_subjects").get<int>();
    c.min_obs = j.at("min_obs").get<int>();
    c.max_obs = j.at("max_obs").get<int>();
    c.t_min = j.at("t_min").get<double>();
    c.t_max = j.at("t_max").get<double>();
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("starman config: ") + e.what());
  }
}

json to_json(const NetArch& a) {
  return {{"kind", a.kind == NetKind::field ? "field" : "inverse"},
          {"dim", a.dim},
          {"hidden_layers", a.hidden_layers},
          {"hidden_width", a.hidden_width},
          {"num_frequencies", a.num_frequencies},
          {"chol_floor", a.chol_floor}};
}

NetArch net_arch_from_json(const json& j) {
  try {
    NetArch a;
    const auto kind = j.at("kind").get<std::string>();
    if (kind != "field" && kind != "inverse") throw SchemaError("arch: unknown kind '" + kind + "'");
    a.kind = kind == "field" ? NetKind::field : NetKind::inverse;
    a.dim = j.at("dim").get<int>();
    a.hidden_layers = j.at("hidden_layers").get<int>();
    a.hidden_width = j.at("hidden_width").get<int>();
    a.num_frequencies = j.at("num_frequencies").get<int>();
    a.chol_floor = j.at("chol_floor").get<double>();
    a.validate();
    return a;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("arch: ") + e.what());
  } catch (const ConfigError& e) {
    throw SchemaError(std::string("arch: ") + e.what());
  }
}

json to_json(const TrainConfig& c) {
  return {{"warm_epochs", c.warm_epochs}, {"lambda_l1", c.lambda_l1}, {"lambda_nll", c.lambda_nll},
          {"lr", c.lr},                   {"lr_min", c.lr_min},       {"batch_size", c.batch_size},
          {"epochs", c.epochs},           {"seed", c.seed}};
}

TrainConfig train_config_from_json(const json& j) {
  try {
    TrainConfig c;
    c.warm_epochs = j.at("warm_epochs").get<int>();
    c.lambda_l1 = j.at("lambda_l1").get<double>();
    c.lambda_nll = j.at("lambda_nll").get<double>();
    c.lr = j.at("lr").get<double>();
    c.lr_min = j.at("lr_min").get<double>();
    c.batch_size = j.at("batch_size").get<int>();
    c.epochs = j.at("epochs").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("train config: ") + e.what());
  }
}

json to_json(const InverseConfig& c) {
  return {{"epochs", c.epochs},
          {"steps_per_epoch", c.steps_per_epoch},
          {"batch_size", c.batch_size},
          {"lr", c.lr},
          {"lr_min", c.lr_min},
          {"seed", c.seed},
          {"t_min", c.triplets.t_min},
          {"t_max", c.triplets.t_max},
          {"jitter_edges", c.triplets.jitter_edges},
          {"add_noise", c.triplets.add_noise}};
}

InverseConfig inverse_config_from_json(const json& j) {
  try {
    InverseConfig c;
    c.epochs = j.at("epochs").get<int>();
    c.steps_per_epoch = j.at("steps_per_epoch").get<int>();
    c.batch_size = j.at("batch_size").get<int>();
    c.lr = j.at("lr").get<double>();
    c.lr_min = j.at("lr_min").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.triplets.t_min = j.at("t_min").get<double>();
    c.triplets.t_max = j.at("t_max").get<double>();
    c.triplets.jitter_edges = j.at("jitter_edges").get<bool>();
    c.triplets.add_noise = j.at("add_noise").get<bool>();
    return c;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("inverse config: ") + e.what());
  }
}

// ---- checkpoint ------------------------------------------------------------

std::string serialize_checkpoint(const Checkpoint& ck) {
  if (ck.forward.weights.size() != ck.forward.arch.weight_count()) {
    throw ConfigError("save_checkpoint: forward weight count does not match its architecture");
  }
  if (ck.inverse && ck.inverse->weights.size() != ck.inverse->arch.weight_count()) {
    throw ConfigError("save_checkpoint: inverse weight count does not match its architecture");
  }
  std::string blob;
  append_doubles(blob, ck.forward.weights);
  if (ck.inverse) append_doubles(blob, ck.inverse->weights);

  json tpl = json::array();
  for (const Vec& p : ck.template_points) tpl.push_back(vec_json(p));
  json h = {{"forward_arch", to_json(ck.forward.arch)},
            {"train_config", to_json(ck.train_config)},
            {"dataset_fingerprint", ck.dataset_fingerprint},
            {"created_at", ck.created_at},
            {"template_points", tpl},
            {"t_min", ck.t_min},
            {"t_max", ck.t_max},
            {"provenance", ck.provenance},
            {"weights_bytes", blob.size()},
            {"weights_sha256", sha256_hex(blob)}};
  h["inverse_arch"] = ck.inverse ? to_json(ck.inverse->arch) : json(nullptr);
  h["inverse_config"] = ck.inverse_config ? to_json(*ck.inverse_config) : json(nullptr);

  std::string out = fmt::format("{} {}\n", kCheckpointMagic, ck.format_version);
  out += h.dump();
  out += '\n';
  out += blob;
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  atomic_write(path, serialize_checkpoint(ckpt));
}

Checkpoint parse_checkpoint(std::string_view bytes) {
  std::string_view rest = bytes;
  std::string_view line;
  if (!take_line(rest, line)) throw FormatError("checkpoint: missing magic line");
  const int version = parse_magic(line, kCheckpointMagic);
  if (version != kCheckpointVersion) throw VersionError(version, kCheckpointVersion);
  if (!take_line(rest, line)) throw FormatError("checkpoint: truncated header");
  json h;
  try {
    h = json::parse(line);
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint: malformed header: ") + e.what());
  }

  Checkpoint ck;
  ck.format_version = version;
  try {
    ck.forward.arch = net_arch_from_json(h.at("forward_arch"));
    ck.train_config = train_config_from_json(h.at("train_config"));
    ck.dataset_fingerprint = h.at("dataset_fingerprint").get<std::string>();
    ck.created_at = h.at("created_at").get<std::int64_t>();
    for (const auto& p : h.at("template_points")) ck.template_points.push_back(vec_from_json(p, ck.forward.arch.dim, 2, "template_points"));
    ck.t_min = h.at("t_min").get<double>();
    ck.t_max = h.at("t_max").get<double>();
    ck.provenance = h.at("provenance");
    if (!h.at("inverse_arch").is_null()) {
      ck.inverse = MlpParams{net_arch_from_json(h["inverse_arch"]), {}};
    }
    if (!h.at("inverse_config").is_null()) ck.inverse_config = inverse_config_from_json(h["inverse_config"]);

    const auto n_bytes = h.at("weights_bytes").get<std::size_t>();
    const std::size_t n_fwd = ck.forward.arch.weight_count();
    const std::size_t n_inv = ck.inverse ? ck.inverse->arch.weight_count() : 0;
    if (n_bytes != 8 * (n_fwd + n_inv)) throw FormatError("checkpoint: weight block size does not match architectures");
    if (rest.size() != n_bytes) {
      throw FormatError(fmt::format("checkpoint: weight block has {} bytes, expected {} (truncated or corrupt file)",
                                    rest.size(), n_bytes));
    }
    if (sha256_hex(rest) != h.at("weights_sha256").get<std::string>()) {
      throw FormatError("checkpoint: weight checksum mismatch");
    }
    auto all = read_doubles(rest);
    ck.forward.weights.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n_fwd));
    if (ck.inverse) ck.inverse->weights.assign(all.begin() + static_cast<std::ptrdiff_t>(n_fwd), all.end());
  } catch (const json::exception& e) {
    throw SchemaError(std::string("checkpoint header: ") + e.what());
  }
  return ck;
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return parse_checkpoint(read_file(path)); }

}  // namespace prism::io
