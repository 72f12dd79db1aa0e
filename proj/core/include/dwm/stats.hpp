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

#ifndef DWM_STATS_HPP_
#define DWM_STATS_HPP_

#include <cstddef>
#include <span>

namespace dwm::stats {

double mean(std::span<const double> xs);
// n - 1 denominator; 0 for fewer than two samples.
double sample_stddev(std::span<const double> xs);

// One-sided paired t-test of H1: mean(treatment - control) > 0.
struct PairedTTest {
  std::size_t n = 0;
  double mean_diff = 0.0;
  double sd_diff = 0.0;
  double t = 0.0;
  double p_one_sided = 1.0;
};
PairedTTest paired_t_test(std::span<const double> treatment, std::span<const double> control);

// RMSE over per-item squared errors q_i, with a delta-method spread:
// sd = std(q) / (2 rmse) and se = sd / sqrt(n).
struct RmseResult {
  double rmse = 0.0;
  double sd = 0.0;
  double se = 0.0;
  std::size_t n = 0;
};
RmseResult rmse_from_squared_errors(std::span<const double> squared_errors);

}  // namespace dwm::stats

#endif  // DWM_STATS_HPP_
