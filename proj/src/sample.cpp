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

#include "prism/sample.hpp"

namespace prism {

std::vector<ShapeView> Dataset::shapes() const {
  std::vector<ShapeView> out;
  std::size_t begin = 0;
  for (std::size_t i = 1; i <= samples.size(); ++i) {
    const bool boundary = i == samples.size() || samples[i].subject_id != samples[begin].subject_id ||
                          samples[i].obs_index != samples[begin].obs_index;
    if (!boundary) continue;
    const ShapeSample& first = samples[begin];
    out.push_back({first.subject_id, first.obs_index, first.t, first.split,
                   std::span<const ShapeSample>(samples.data() + begin, i - begin)});
    begin = i;
  }
  return out;
}

Dataset Dataset::filter(Split split) const {
  Dataset out{dim, t_min, t_max, {}};
  for (const auto& s : samples) {
    if (s.split == split) out.samples.push_back(s);
  }
  return out;
}

std::string to_string(Split s) { return s == Split::train ? "train" : "test"; }
std::string to_string(Limb l) { return l == Limb::arm ? "arm" : "leg"; }

}  // namespace prism
