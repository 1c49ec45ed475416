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

// On-disk formats.
//
// Dataset (.psd), text:
//   line 1   "PRISM-PSD <version>"
//   line 2   header object (dim, t_min, t_max, time_units, seed, provenance)
//   line 3+  one sample object per line
//
// Checkpoint (.pck):
//   line 1   "PRISM-PCK <version>"
//   line 2   header object (architectures, configs, fingerprints, sizes)
//   rest     weights as little-endian IEEE-754 doubles, forward then inverse

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "prism/gaussian_field.hpp"
#include "prism/inverse_encoder.hpp"
#include "prism/sample.hpp"
#include "prism/starman.hpp"

namespace prism::io {

constexpr int kDatasetVersion = 1;
constexpr int kCheckpointVersion = 1;

struct DatasetHeader {
  int format_version = kDatasetVersion;
  int dim = 2;
  double t_min = 0.0;
  double t_max = 1.0;
  std::string time_units = "normalized";
  std::optional<std::uint64_t> seed;
  nlohmann::json provenance = nlohmann::json::object();
};

struct DatasetFile {
  DatasetHeader header;
  Dataset dataset;
};

void write_dataset(const std::filesystem::path& path, const Dataset& dataset, const DatasetHeader& header);
/// Throws IoError, FormatError (with line number), SchemaError, VersionError.
DatasetFile read_dataset(const std::filesystem::path& path);
DatasetFile parse_dataset(std::string_view text);

/// SHA-256 over a canonical binary encoding (IEEE-754 bit patterns).
std::string dataset_fingerprint(const Dataset& dataset);
std::string sha256_hex(std::string_view bytes);
std::string file_sha256(const std::filesystem::path& path);

nlohmann::json to_json(const starman::StarmanConfig& config);
starman::StarmanConfig starman_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const NetArch& arch);
NetArch net_arch_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const InverseConfig& config);
InverseConfig inverse_config_from_json(const nlohmann::json& j);

struct Checkpoint {
  int format_version = kCheckpointVersion;
  GaussianFieldParams forward;
  TrainConfig train_config;
  std::optional<MlpParams> inverse;
  std::optional<InverseConfig> inverse_config;
  std::string dataset_fingerprint;
  std::int64_t created_at = 0;            // SOURCE_DATE_EPOCH when set, else 0
  std::vector<Vec> template_points;       // one per vertex index
  double t_min = 0.0;
  double t_max = 1.0;
  nlohmann::json provenance = nlohmann::json::object();
};

/// Atomic: writes a sibling temp file and renames it over `path`.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);
std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(std::string_view bytes);

/// Writes bytes to a temp file next to `path`, then renames.
void atomic_write(const std::filesystem::path& path, std::string_view bytes);
std::string read_file(const std::filesystem::path& path);

/// Template points indexed by vertex, taken from a dataset's samples.
std::vector<Vec> template_points(const Dataset& dataset);

/// Build timestamp from SOURCE_DATE_EPOCH, 0 when unset.
std::int64_t reproducible_timestamp();

}  // namespace prism::io
