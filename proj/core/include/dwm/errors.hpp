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

#ifndef DWM_ERRORS_HPP_
#define DWM_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace dwm {

// Dimension or layout mismatch between a model and its inputs.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed or inconsistent configuration values.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// File could not be read, written or parsed.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A required artifact (dataset, checkpoint, metrics file) is absent.
class MissingArtifactError : public IoError {
 public:
  using IoError::IoError;
};

// Training produced a non-finite loss or parameter.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Illegal environment usage, e.g. stepping a finished episode.
class EnvError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace dwm

#endif  // DWM_ERRORS_HPP_
