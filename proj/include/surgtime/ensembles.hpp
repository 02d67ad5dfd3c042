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

// Bagged forests and AdaBoost.R2 over CART trees.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "surgtime/cart.hpp"
#include "surgtime/errors.hpp"

namespace surgtime {

/// Independent stream for member `index` of an ensemble seeded by `seed`.
inline std::mt19937_64 member_rng(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

// ---------------------------------------------------------------------------
// Random forest

struct ForestParams {
  std::size_t n_trees = 100;
  bool bootstrap = true;
  std::optional<std::size_t> max_features;  // unset: all features
  TreeParams tree_params;
  std::uint64_t seed = 0;

  void validate() const {
    if (n_trees < 1) throw InvalidConfig("n_trees must be at least 1");
    if (max_features && *max_features < 1) throw InvalidConfig("max_features must be at least 1");
    tree_params.validate();
  }
};

struct Forest {
  std::vector<RegressionTree> trees;

  std::size_t feature_count() const { return trees.empty() ? 0 : trees.front().feature_count; }
  bool operator==(const Forest&) const = default;
};

inline Forest fit_forest(const FeatureMatrix& X, std::span<const double> z, const ForestParams& params) {
  params.validate();
  if (X.rows() == 0) throw EmptyInput("cannot fit a forest on zero samples");
  if (params.max_features && *params.max_features > X.cols()) {
    throw InvalidConfig("max_features exceeds the feature count");
  }
  const std::size_t n = X.rows();
  const std::vector<double> unit(n, 1.0);
  Forest forest;
  forest.trees.reserve(params.n_trees);
  std::vector<std::size_t> rows(n);
  for (std::size_t t = 0; t < params.n_trees; ++t) {
    auto rng = member_rng(params.seed, t);
    if (params.bootstrap) {
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      for (auto& r : rows) r = pick(rng);
    } else {
      std::iota(rows.begin(), rows.end(), std::size_t{0});
    }
    forest.trees.push_back(fit_tree_rows(X, z, unit, rows, params.tree_params, &rng, params.max_features));
  }
  return forest;
}

inline double predict_forest(const Forest& f, std::span<const double> x) {
  if (f.trees.empty()) throw DegenerateEnsemble("forest has no trees");
  double sum = 0;
  for (const auto& t : f.trees) sum += t.predict(x);
  return sum / static_cast<double>(f.trees.size());
}

// ---------------------------------------------------------------------------
// AdaBoost.R2

enum class BoostLoss { Linear, Square, Exponential };

struct BoostParams {
  std::size_t n_estimators = 50;
  BoostLoss loss_shape = BoostLoss::Linear;
  TreeParams tree_params;
  // Trees are fitted on the weighted sample, which involves no randomness;
  // the seed is carried for configuration round-trips.
  std::uint64_t seed = 0;

  void validate() const {
    if (n_estimators < 1) throw InvalidConfig("n_estimators must be at least 1");
    tree_params.validate();
  }
};

struct BoostedEnsemble {
  std::vector<RegressionTree> trees;
  std::vector<double> log_weights;  // ln(1 / beta_t), one per tree

  std::size_t feature_count() const { return trees.empty() ? 0 : trees.front().feature_count; }
  bool operator==(const BoostedEnsemble&) const = default;
};

// Member weight for a round whose residuals were all zero.
inline constexpr double kPerfectFitLogWeight = 23.025850929940457;  // ln(1e10)
// Member weight for a first round kept despite an average loss >= 0.5.
inline constexpr double kFallbackLogWeight = 1e-10;

/// Per-round diagnostics, filled when a trace is passed to fit_adaboost_r2.
struct BoostTrace {
  std::vector<double> average_loss;               // per attempted round
  std::vector<std::vector<double>> weights_after;  // sample weights after each retained round
};

inline double per_sample_loss(double residual, double max_residual, BoostLoss shape) {
  const double r = residual / max_residual;
  switch (shape) {
    case BoostLoss::Linear:
      return r;
    case BoostLoss::Square:
      return r * r;
    case BoostLoss::Exponential:
      return 1.0 - std::exp(-r);
  }
  return r;
}

inline BoostedEnsemble fit_adaboost_r2(const FeatureMatrix& X, std::span<const double> z, const BoostParams& params,
                                       BoostTrace* trace = nullptr) {
  params.validate();
  const std::size_t n = X.rows();
  if (n < 2) throw EmptyInput("AdaBoost.R2 needs at least 2 samples");
  std::vector<double> w(n, 1.0 / static_cast<double>(n));
  std::vector<double> residual(n), sample_loss(n);
  BoostedEnsemble ens;

  for (std::size_t t = 0; t < params.n_estimators; ++t) {
    RegressionTree tree = fit_tree(X, z, w, params.tree_params);
    double max_residual = 0;
    for (std::size_t i = 0; i < n; ++i) {
      residual[i] = std::abs(z[i] - tree.predict(X.row(i)));
      max_residual = std::max(max_residual, residual[i]);
    }
    if (max_residual == 0) {
      if (trace) trace->average_loss.push_back(0.0);
      ens.trees.push_back(std::move(tree));
      ens.log_weights.push_back(kPerfectFitLogWeight);
      if (trace) trace->weights_after.push_back(w);
      break;
    }
    double avg_loss = 0;
    for (std::size_t i = 0; i < n; ++i) {
      sample_loss[i] = per_sample_loss(residual[i], max_residual, params.loss_shape);
      avg_loss += w[i] * sample_loss[i];
    }
    if (trace) trace->average_loss.push_back(avg_loss);
    if (avg_loss >= 0.5) {
      if (t == 0) {
        ens.trees.push_back(std::move(tree));
        ens.log_weights.push_back(kFallbackLogWeight);
        if (trace) trace->weights_after.push_back(w);
      }
      break;
    }
    if (!(avg_loss > 0)) {
      // Every weighted sample was fitted exactly.
      ens.trees.push_back(std::move(tree));
      ens.log_weights.push_back(kPerfectFitLogWeight);
      if (trace) trace->weights_after.push_back(w);
      break;
    }
    const double beta = avg_loss / (1.0 - avg_loss);
    double total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      w[i] *= std::pow(beta, 1.0 - sample_loss[i]);
      total += w[i];
    }
    for (double& wi : w) wi /= total;
    ens.trees.push_back(std::move(tree));
    ens.log_weights.push_back(std::log(1.0 / beta));
    if (trace) trace->weights_after.push_back(w);
  }
  if (ens.trees.empty()) throw DegenerateEnsemble("no boosting round was retained");
  return ens;
}

/// First value, in ascending order, at which the cumulative weight reaches
/// half the total.
inline double weighted_median(std::span<const double> values, std::span<const double> weights) {
  if (values.empty() || values.size() != weights.size()) throw EmptyInput("weighted median needs matching non-empty inputs");
  std::vector<std::size_t> ord(values.size());
  std::iota(ord.begin(), ord.end(), std::size_t{0});
  std::stable_sort(ord.begin(), ord.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  const double half = 0.5 * std::accumulate(weights.begin(), weights.end(), 0.0);
  double cum = 0;
  for (auto i : ord) {
    cum += weights[i];
    if (cum >= half) return values[i];
  }
  return values[ord.back()];
}

inline double predict_boosted(const BoostedEnsemble& e, std::span<const double> x) {
  if (e.trees.empty()) throw DegenerateEnsemble("boosted ensemble has no members");
  std::vector<double> preds;
  preds.reserve(e.trees.size());
  for (const auto& t : e.trees) preds.push_back(t.predict(x));
  return weighted_median(preds, e.log_weights);
}

// ---------------------------------------------------------------------------
// Importance

namespace detail {

inline void renormalize(std::vector<double>& v) {
  const double total = std::accumulate(v.begin(), v.end(), 0.0);
  if (total > 0) {
    for (double& x : v) x /= total;
  } else {
    std::fill(v.begin(), v.end(), 0.0);
  }
}

}  // namespace detail

inline std::vector<double> ensemble_importance(const Forest& f) {
  std::vector<double> imp(f.feature_count(), 0.0);
  for (const auto& t : f.trees) {
    const auto ti = tree_importance(t);
    for (std::size_t j = 0; j < imp.size(); ++j) imp[j] += ti[j] / static_cast<double>(f.trees.size());
  }
  detail::renormalize(imp);
  return imp;
}

/// Member importances averaged by each member's share of the total log-weight.
inline std::vector<double> ensemble_importance(const BoostedEnsemble& e) {
  std::vector<double> imp(e.feature_count(), 0.0);
  const double total = std::accumulate(e.log_weights.begin(), e.log_weights.end(), 0.0);
  for (std::size_t t = 0; t < e.trees.size(); ++t) {
    const auto ti = tree_importance(e.trees[t]);
    const double share = e.log_weights[t] / total;
    for (std::size_t j = 0; j < imp.size(); ++j) imp[j] += share * ti[j];
  }
  detail::renormalize(imp);
  return imp;
}

}  // namespace surgtime
