// Copyright 2026 The surgtime Authors
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

// Operational accuracy metric for duration predictions.
//
// A prediction y_hat is accurate when |y - y_hat| < tau(y_hat), where
// tau(y_hat) = min(max(p * y_hat, m), M): a fraction of the prediction,
// clamped to [m, M] minutes.

#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "surgtime/errors.hpp"

namespace surgtime {

struct MetricParams {
  double p = 0.2;
  double m = 15.0;  // minutes
  double M = 60.0;  // minutes

  void validate() const {
    if (!(p > 0 && p < 1)) throw InvalidConfig("metric p must lie in (0, 1)");
    if (!(m >= 0)) throw InvalidConfig("metric m must be non-negative");
    if (!(M > m)) throw InvalidConfig("metric M must exceed m");
  }
};

struct PredictionPair {
  double actual = 0;     // minutes
  double predicted = 0;  // minutes
  std::string procedure_name;
};

inline double tolerance(double y_hat, const MetricParams& params) {
  if (!(y_hat > 0)) throw DomainViolation("tolerance requires a positive prediction");
  return std::min(std::max(params.p * y_hat, params.m), params.M);
}

/// 1 when the prediction misses, 0 when it is accurate. A miss of exactly
/// tau counts as a loss.
inline int loss(double y, double y_hat, const MetricParams& params) {
  if (!(y > 0) || !(y_hat > 0)) throw DomainViolation("loss requires positive durations");
  return std::abs(y - y_hat) >= tolerance(y_hat, params) ? 1 : 0;
}

inline double accuracy(std::span<const PredictionPair> pairs, const MetricParams& params) {
  if (pairs.empty()) throw EmptyInput("accuracy of an empty prediction set");
  std::size_t hits = 0;
  for (const auto& pr : pairs) hits += 1 - loss(pr.actual, pr.predicted, params);
  return static_cast<double>(hits) / static_cast<double>(pairs.size());
}

inline double average_error(std::span<const PredictionPair> pairs, const MetricParams& params) {
  if (pairs.empty()) throw EmptyInput("error of an empty prediction set");
  std::size_t misses = 0;
  for (const auto& pr : pairs) misses += loss(pr.actual, pr.predicted, params);
  return static_cast<double>(misses) / static_cast<double>(pairs.size());
}

/// Half-width in log space inside which a prediction is accurate whenever
/// neither clamp of tau is active: min(-ln(1-p), ln(1+p)).
inline double epsilon_bound(double p) {
  if (!(p > 0 && p < 1)) throw DomainViolation("epsilon_bound requires p in (0, 1)");
  return std::min(-std::log1p(-p), std::log1p(p));
}

/// 0.05, 0.10, ..., 0.50.
inline std::vector<double> default_p_grid() {
  std::vector<double> grid;
  for (int i = 1; i <= 10; ++i) grid.push_back(i * 0.05);
  return grid;
}

/// Accuracy at each p with m and M held fixed, ordered by p.
inline std::vector<std::pair<double, double>> sweep_p(std::span<const PredictionPair> pairs,
                                                     std::vector<double> p_grid, double m, double M) {
  if (pairs.empty()) throw EmptyInput("sweep over an empty prediction set");
  if (p_grid.empty()) throw EmptyInput("sweep over an empty p grid");
  std::sort(p_grid.begin(), p_grid.end());
  std::vector<std::pair<double, double>> out;
  out.reserve(p_grid.size());
  for (double p : p_grid) {
    MetricParams params{p, m, M};
    params.validate();
    out.emplace_back(p, accuracy(pairs, params));
  }
  return out;
}

}  // namespace surgtime
