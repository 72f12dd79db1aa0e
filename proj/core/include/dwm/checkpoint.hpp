// Copyright 2026 The dwm-mpc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DWM_CHECKPOINT_HPP_
#define DWM_CHECKPOINT_HPP_

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dwm/nn.hpp"

namespace dwm {

// Checkpoint layout:
//   line 1: "DWM1"
//   line 2: UTF-8 JSON {"spec": ..., "layout": [[rows, cols], ...], "count": N, "extra": ...}
//   payload: N little-endian float64 values
inline constexpr std::string_view kCheckpointMagic = "DWM1";

struct Checkpoint {
  nn::MlpSpec spec;
  nn::ParamVector params;
  nlohmann::json extra = nlohmann::json::object();
};

nlohmann::json spec_to_json(const nn::MlpSpec& spec);
nn::MlpSpec spec_from_json(const nlohmann::json& j);

void write_checkpoint(std::ostream& out, const nn::MlpSpec& spec, const nn::ParamVector& params,
                      const nlohmann::json& extra = nlohmann::json::object());
Checkpoint read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const nn::MlpSpec& spec,
                     const nn::ParamVector& params,
                     const nlohmann::json& extra = nlohmann::json::object());
// Throws MissingArtifactError if the file does not exist, IoError if malformed.
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Little-endian float64 streams, independent of host byte order.
void write_f64_le(std::ostream& out, std::span<const double> values);
void read_f64_le(std::istream& in, std::span<double> values);

}  // namespace dwm

#endif  // DWM_CHECKPOINT_HPP_
