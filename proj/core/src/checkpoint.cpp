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

#include "dwm/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "dwm/errors.hpp"

namespace dwm {

nlohmann::json spec_to_json(const nn::MlpSpec& spec) {
  return {{"input_dim", spec.input_dim},
          {"hidden_dims", spec.hidden_dims},
          {"output_dim", spec.output_dim},
          {"activation", nn::to_string(spec.activation)},
          {"output_activation", nn::to_string(spec.output_activation)}};
}

nn::MlpSpec spec_from_json(const nlohmann::json& j) {
  nn::MlpSpec spec;
  try {
    spec.input_dim = j.at("input_dim").get<int>();
    spec.hidden_dims = j.at("hidden_dims").get<std::vector<int>>();
    spec.output_dim = j.at("output_dim").get<int>();
    spec.activation = nn::activation_from_string(j.at("activation").get<std::string>());
    spec.output_activation =
        nn::activation_from_string(j.at("output_activation").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("bad mlp spec json: ") + e.what());
  }
  spec.validate();
  return spec;
}

void write_f64_le(std::ostream& out, std::span<const double> values) {
  std::vector<unsigned char> bytes(values.size() * 8);
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto bits = std::bit_cast<std::uint64_t>(values[i]);
    for (int b = 0; b < 8; ++b) {
      bytes[i * 8 + b] = static_cast<unsigned char>((bits >> (8 * b)) & 0xffu);
    }
  }
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing float64 payload");
}

void read_f64_le(std::istream& in, std::span<double> values) {
  std::vector<unsigned char> bytes(values.size() * 8);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
    throw IoError("truncated float64 payload");
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) {
      bits |= static_cast<std::uint64_t>(bytes[i * 8 + b]) << (8 * b);
    }
    values[i] = std::bit_cast<double>(bits);
  }
}

void write_checkpoint(std::ostream& out, const nn::MlpSpec& spec, const nn::ParamVector& params,
                      const nlohmann::json& extra) {
  nn::check_params(spec, params);
  nlohmann::json layout = nlohmann::json::array();
  for (const auto& shape : params.layout()) layout.push_back({shape.rows, shape.cols});
  const nlohmann::json header = {{"spec", spec_to_json(spec)},
                                 {"layout", layout},
                                 {"count", params.size()},
                                 {"extra", extra}};
  out << kCheckpointMagic << '\n' << header.dump() << '\n';
  write_f64_le(out, params.values());
}

Checkpoint read_checkpoint(std::istream& in) {
  std::string magic;
  std::getline(in, magic);
  if (magic != kCheckpointMagic) throw IoError("not a DWM1 checkpoint");
  std::string line;
  if (!std::getline(in, line)) throw IoError("checkpoint header missing");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("checkpoint header is not json: ") + e.what());
  }
  Checkpoint ckpt;
  ckpt.spec = spec_from_json(header.at("spec"));
  const auto count = header.at("count").get<std::size_t>();
  if (count != ckpt.spec.param_count()) throw IoError("checkpoint count does not match spec");
  std::vector<double> values(count);
  read_f64_le(in, values);
  ckpt.params = nn::ParamVector(ckpt.spec.layout(), std::move(values));
  if (header.contains("extra")) ckpt.extra = header["extra"];
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const nn::MlpSpec& spec,
                     const nn::ParamVector& params, const nlohmann::json& extra) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_checkpoint(out, spec, params, extra);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw MissingArtifactError("missing checkpoint " + path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_checkpoint(in);
}

}  // namespace dwm
