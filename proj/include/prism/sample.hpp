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

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "prism/types.hpp"

namespace prism {

enum class Limb : std::int8_t { arm = 0, leg = 1 };
enum class Split : std::uint8_t { train, test };

/// One observed template point: its displacement at chronological time t.
struct ShapeSample {
  Vec p;
  Vec d;
  double t = 0.0;
  std::int64_t subject_id = 0;
  std::int32_t obs_index = 0;  // observation of the subject this point belongs to
  std::int32_t vertex = 0;     // template vertex index
  Split split = Split::train;
  std::optional<double> tau_gt;
  std::optional<Limb> limb;
};

/// A correspondence-resolved shape: consecutive samples sharing (subject, observation).
struct ShapeView {
  std::int64_t subject_id = 0;
  std::int32_t obs_index = 0;
  double t = 0.0;
  Split split = Split::train;
  std::span<const ShapeSample> points;
};

struct Dataset {
  int dim = 2;
  double t_min = 0.0;
  double t_max = 1.0;
  std::vector<ShapeSample> samples;

  /// Groups consecutive samples into shapes.
  std::vector<ShapeView> shapes() const;
  /// Copy holding only the given split.
  Dataset filter(Split split) const;
  bool empty() const { return samples.empty(); }
};

std::string to_string(Split s);
std::string to_string(Limb l);

}  // namespace prism
