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

#ifndef DWM_RNG_HPP_
#define DWM_RNG_HPP_

#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace dwm {

// Seeded generator with platform-independent uniform and Gaussian draws.
//
// std::normal_distribution and std::uniform_real_distribution are
// implementation-defined, so datasets and checkpoints produced with them
// would differ between standard libraries. The engine (mt19937_64) is fully
// specified; the transforms on top of it are fixed here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  // Uniform on [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer on [0, n).
  std::uint64_t index(std::uint64_t n);

  // Standard normal via Box-Muller; the second variate is cached.
  double normal();

  Eigen::VectorXd normal_vector(Eigen::Index n);
  Eigen::VectorXd uniform_vector(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi);

  std::uint64_t next_u64() { return engine_(); }

  // Independent child stream derived from this generator's next output.
  Rng split() { return Rng(mix(engine_())); }

  static std::uint64_t mix(std::uint64_t x);

 private:
  std::mt19937_64 engine_;
  bool has_cached_ = false;
  double cached_ = 0.0;
};

// Deterministic seed derivation for named sub-streams (env noise, batches...).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace dwm

#endif  // DWM_RNG_HPP_
