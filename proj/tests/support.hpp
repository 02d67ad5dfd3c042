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

// Fixtures and independent reference implementations shared by the unit
// tests and the acceptance binary. Nothing here calls into the code under
// test beyond plain data types.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "surgtime.hpp"

namespace surgtime::testing {

inline SurgicalCase make_case(std::string id, std::string procedure, std::string surgeon, double actual,
                              double expert = 30.0) {
  SurgicalCase c;
  c.case_id = std::move(id);
  c.procedure_name = std::move(procedure);
  c.surgeon_id = std::move(surgeon);
  c.gender = Gender::Female;
  c.weight_kg = 20;
  c.age_years = 6;
  c.asa = AsaClass::II;
  c.location = Location::OR;
  c.patient_class = PatientClass::OutPatient;
  c.expert_prediction_min = expert;
  c.actual_duration_min = actual;
  return c;
}

/// Small synthetic dataset for tests that need a realistic shape fast.
inline SynthConfig small_synth(std::uint64_t seed = 7) {
  SynthConfig cfg;
  cfg.n_procedures = 4;
  cfg.cases_per_procedure = 30;
  cfg.n_surgeons = 8;
  cfg.surgeons_per_procedure = 3;
  cfg.seed = seed;
  return cfg;
}

inline Hyperparams fast_hyperparams() {
  Hyperparams hp;
  hp.forest.n_trees = 10;
  hp.boost.n_estimators = 10;
  return hp;
}

// ---------------------------------------------------------------------------
// Brute-force CART

/// Weighted mean and SSE computed directly over `rows`, ascending order.
struct DirectStats {
  double weight = 0, mean = 0, sse = 0;
};

inline DirectStats direct_stats(const std::vector<std::size_t>& rows, const std::vector<double>& z,
                                const std::vector<double>& w) {
  DirectStats s;
  double sum = 0;
  for (auto r : rows) {
    s.weight += w[r];
    sum += w[r] * z[r];
  }
  if (!(s.weight > 0)) {
    double plain = 0;
    for (auto r : rows) plain += z[r];
    s.mean = rows.empty() ? 0 : plain / static_cast<double>(rows.size());
    s.weight = 0;
    return s;
  }
  s.mean = sum / s.weight;
  for (auto r : rows) s.sse += w[r] * (z[r] - s.mean) * (z[r] - s.mean);
  return s;
}

struct OracleNode {
  bool leaf = true;
  std::size_t feature = 0;
  double threshold = 0;
  double value = 0;
  int left = -1, right = -1;
};

/// Greedy CART that, at each node, tries every feature and every gap between
/// distinct sorted values, rebuilding both children from scratch for each
/// candidate. Tie and gating rules: a candidate replaces the incumbent only
/// when better by more than 1e-12 times the node SSE; features are scanned
/// in ascending order and thresholds ascending; a node splits only if it has
/// at least min_samples_split rows, is above the depth limit, has unequal
/// targets, and the best split lowers SSE by more than the same tolerance.
class OracleTree {
 public:
  OracleTree(const std::vector<std::vector<double>>& X, const std::vector<double>& z, const std::vector<double>& w,
             std::size_t min_samples_split, std::optional<std::size_t> max_depth)
      : X_(X), z_(z), w_(w), mss_(min_samples_split), max_depth_(max_depth) {
    std::vector<std::size_t> all(z.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    grow(all, 0);
  }

  double predict(const std::vector<double>& x) const {
    int i = 0;
    while (!nodes_[i].leaf) i = x[nodes_[i].feature] <= nodes_[i].threshold ? nodes_[i].left : nodes_[i].right;
    return nodes_[i].value;
  }

  double training_sse() const {
    double sse = 0;
    for (std::size_t r = 0; r < z_.size(); ++r) {
      const double d = z_[r] - predict(X_[r]);
      sse += w_[r] * d * d;
    }
    return sse;
  }

  std::size_t node_count() const { return nodes_.size(); }

 private:
  int grow(const std::vector<std::size_t>& rows, std::size_t depth) {
    const auto stats = direct_stats(rows, z_, w_);
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back(OracleNode{true, 0, 0, stats.mean});

    bool varied = false;
    for (auto r : rows) varied = varied || z_[r] != z_[rows.front()];
    if (rows.size() < mss_ || (max_depth_ && depth >= *max_depth_) || !varied || !(stats.sse > 0)) return id;

    const double tol = 1e-12 * stats.sse;
    double best = std::numeric_limits<double>::infinity();
    std::optional<std::pair<std::size_t, double>> choice;
    for (std::size_t f = 0; f < X_.front().size(); ++f) {
      std::vector<double> vals;
      for (auto r : rows) vals.push_back(X_[r][f]);
      std::sort(vals.begin(), vals.end());
      vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
      for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
        const double t = vals[i] + (vals[i + 1] - vals[i]) / 2;
        std::vector<std::size_t> l, r;
        for (auto row : rows) (X_[row][f] <= t ? l : r).push_back(row);
        const double sse = direct_stats(l, z_, w_).sse + direct_stats(r, z_, w_).sse;
        if (sse < best - tol) {
          best = sse;
          choice = {f, t};
        }
      }
    }
    if (!choice || !(stats.sse - best > tol)) return id;

    std::vector<std::size_t> l, r;
    for (auto row : rows) (X_[row][choice->first] <= choice->second ? l : r).push_back(row);
    nodes_[id].leaf = false;
    nodes_[id].feature = choice->first;
    nodes_[id].threshold = choice->second;
    const int li = grow(l, depth + 1);
    const int ri = grow(r, depth + 1);
    nodes_[id].left = li;
    nodes_[id].right = ri;
    return id;
  }

  const std::vector<std::vector<double>>& X_;
  const std::vector<double>& z_;
  const std::vector<double>& w_;
  std::size_t mss_;
  std::optional<std::size_t> max_depth_;
  std::vector<OracleNode> nodes_;
};

/// Random regression problem with up to 40 rows and 4 features. Half of the
/// draws use a small integer grid so that duplicate values and exact SSE ties
/// are common.
struct RandomProblem {
  std::vector<std::vector<double>> rows;
  std::vector<double> z, w;
  std::size_t min_samples_split = 2;
  std::optional<std::size_t> max_depth;
};

inline RandomProblem random_problem(std::mt19937_64& rng, bool weighted = false) {
  RandomProblem p;
  const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 40)(rng);
  const std::size_t d = std::uniform_int_distribution<std::size_t>(1, 4)(rng);
  const bool grid = std::bernoulli_distribution(0.5)(rng);
  std::uniform_int_distribution<int> small(0, 4);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> x(d);
    for (auto& v : x) v = grid ? small(rng) : unit(rng);
    p.rows.push_back(x);
    p.z.push_back(grid ? small(rng) : std::log(5.0 + 100.0 * unit(rng)));
    // Weights are multiples of 1/4 so weighted sums stay exact.
    p.w.push_back(weighted ? 0.25 * std::uniform_int_distribution<int>(1, 8)(rng) : 1.0);
  }
  p.min_samples_split = std::uniform_int_distribution<std::size_t>(2, 10)(rng);
  if (std::bernoulli_distribution(0.3)(rng)) p.max_depth = std::uniform_int_distribution<std::size_t>(0, 4)(rng);
  return p;
}

// ---------------------------------------------------------------------------
// Weighted median

/// Sorts (value, weight) pairs by value and returns the first value whose
/// running weight reaches half the total.
inline double weighted_median_oracle(std::vector<double> values, std::vector<double> weights) {
  std::vector<std::pair<double, double>> vw;
  for (std::size_t i = 0; i < values.size(); ++i) vw.emplace_back(values[i], weights[i]);
  std::stable_sort(vw.begin(), vw.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  double total = 0;
  for (const auto& p : vw) total += p.second;
  double run = 0;
  for (const auto& p : vw) {
    run += p.second;
    if (run >= total / 2) return p.first;
  }
  return vw.back().first;
}

// ---------------------------------------------------------------------------
// Metric

/// The tolerance rule spelled out with branches instead of min/max.
inline bool accurate_oracle(double y, double y_hat, double p, double m, double M) {
  double tau = p * y_hat;
  if (tau < m) tau = m;
  if (tau > M) tau = M;
  return std::fabs(y - y_hat) < tau;
}

inline double skewness(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  double mean = 0;
  for (double x : v) mean += x;
  mean /= n;
  double m2 = 0, m3 = 0;
  for (double x : v) {
    m2 += (x - mean) * (x - mean);
    m3 += (x - mean) * (x - mean) * (x - mean);
  }
  m2 /= n;
  m3 /= n;
  return m3 / std::pow(m2, 1.5);
}

inline double correlation(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace surgtime::testing
