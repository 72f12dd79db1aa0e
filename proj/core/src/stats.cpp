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

#include "dwm/stats.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "dwm/errors.hpp"

namespace dwm::stats {

double mean(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  double sum = 0.0;
  for (double x : xs) sum += x;
  return sum / static_cast<double>(xs.size());
}

double sample_stddev(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

PairedTTest paired_t_test(std::span<const double> treatment, std::span<const double> control) {
  if (treatment.size() != control.size() || treatment.size() < 2) {
    throw ConfigError("paired t-test needs two equal-length samples of size >= 2");
  }
  std::vector<double> diff(treatment.size());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = treatment[i] - control[i];
  PairedTTest out;
  out.n = diff.size();
  out.mean_diff = mean(diff);
  out.sd_diff = sample_stddev(diff);
  if (out.sd_diff == 0.0) {
    out.t = out.mean_diff > 0 ? INFINITY : (out.mean_diff < 0 ? -INFINITY : 0.0);
    out.p_one_sided = out.mean_diff > 0 ? 0.0 : (out.mean_diff < 0 ? 1.0 : 0.5);
    return out;
  }
  out.t = out.mean_diff / (out.sd_diff / std::sqrt(static_cast<double>(out.n)));
  const boost::math::students_t dist(static_cast<double>(out.n - 1));
  out.p_one_sided = boost::math::cdf(boost::math::complement(dist, out.t));
  return out;
}

RmseResult rmse_from_squared_errors(std::span<const double> squared_errors) {
  RmseResult out;
  out.n = squared_errors.size();
  if (out.n == 0) throw ConfigError("rmse over an empty set");
  out.rmse = std::sqrt(mean(squared_errors));
  if (out.rmse > 0.0) {
    double var = 0.0;
    const double m = out.rmse * out.rmse;
    for (double q : squared_errors) var += (q - m) * (q - m);
    var /= static_cast<double>(out.n);
    out.sd = std::sqrt(var) / (2.0 * out.rmse);
    out.se = out.sd / std::sqrt(static_cast<double>(out.n));
  }
  return out;
}

}  // namespace dwm::stats
