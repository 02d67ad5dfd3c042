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

// CART regression trees under weighted squared error.
//
// Splits are axis-aligned "x[f] <= threshold goes left" with thresholds at
// midpoints between consecutive distinct feature values. Among all
// candidate (feature, threshold) pairs the smallest post-split weighted SSE
// wins; features and thresholds are scanned in ascending order and a later
// candidate replaces the incumbent only if it is better by more than
// kSseTieTolerance * parent SSE, so near-ties resolve to the lowest feature
// index, then the lowest threshold.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "surgtime/data_model.hpp"
#include "surgtime/errors.hpp"

namespace surgtime {

inline constexpr double kSseTieTolerance = 1e-12;

struct TreeParams {
  std::size_t min_samples_split = 10;
  std::optional<std::size_t> max_depth;
  std::size_t min_samples_leaf = 1;

  void validate() const {
    if (min_samples_split < 2) throw InvalidConfig("min_samples_split must be at least 2");
    if (min_samples_leaf < 1) throw InvalidConfig("min_samples_leaf must be at least 1");
  }
};

struct TreeNode {
  static constexpr std::int32_t kNone = -1;

  std::int32_t feature = kNone;  // kNone for leaves
  double threshold = 0;
  std::int32_t left = kNone;
  std::int32_t right = kNone;
  double risk_decrease = 0;  // parent SSE minus children SSE, weighted
  double value = 0;          // weighted mean target of the node
  double weight = 0;         // weight sum of the node
  std::size_t samples = 0;

  bool is_leaf() const { return feature == kNone; }
  bool operator==(const TreeNode&) const = default;
};

/// Arena of nodes; node 0 is the root. Nodes are stored in pre-order.
struct RegressionTree {
  std::vector<TreeNode> nodes;
  std::size_t feature_count = 0;

  std::size_t leaf_of(std::span<const double> x) const {
    if (x.size() != feature_count) throw WidthMismatch(feature_count, x.size());
    std::size_t i = 0;
    while (!nodes[i].is_leaf()) {
      const auto& n = nodes[i];
      i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
    }
    return i;
  }

  double predict(std::span<const double> x) const { return nodes[leaf_of(x)].value; }

  std::size_t leaf_count() const {
    return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.is_leaf(); }));
  }

  std::size_t depth() const {
    std::size_t best = 0;
    std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
    while (!stack.empty()) {
      auto [i, d] = stack.back();
      stack.pop_back();
      best = std::max(best, d);
      if (!nodes[i].is_leaf()) {
        stack.emplace_back(static_cast<std::size_t>(nodes[i].left), d + 1);
        stack.emplace_back(static_cast<std::size_t>(nodes[i].right), d + 1);
      }
    }
    return best;
  }

  bool operator==(const RegressionTree&) const = default;
};

inline double predict_tree(const RegressionTree& tree, std::span<const double> x) { return tree.predict(x); }

struct SplitCandidate {
  double threshold = 0;
  double sse = 0;  // weighted SSE summed over both children
};

/// Threshold strictly between a < b that keeps a on the left.
inline double midpoint_threshold(double a, double b) {
  double t = a + (b - a) / 2.0;
  if (!(t < b) || !std::isfinite(t)) t = a;
  return t;
}

namespace detail {

struct NodeStats {
  double weight = 0;
  double mean = 0;
  double sse = 0;
};

/// Two-pass weighted mean and SSE over `idx` in the given order. A node whose
/// weights sum to zero falls back to the unweighted mean and zero SSE.
template <typename Index, typename Z, typename W>
NodeStats node_stats(std::span<const Index> idx, const Z& z, const W& w) {
  NodeStats s;
  double sum = 0;
  for (auto i : idx) {
    s.weight += w(i);
    sum += w(i) * z(i);
  }
  if (!(s.weight > 0)) {
    double plain = 0;
    for (auto i : idx) plain += z(i);
    s.mean = idx.empty() ? 0.0 : plain / static_cast<double>(idx.size());
    s.weight = 0;
    return s;
  }
  s.mean = sum / s.weight;
  for (auto i : idx) {
    const double d = z(i) - s.mean;
    s.sse += w(i) * d * d;
  }
  return s;
}

inline double sse_from_sums(double w, double s, double q) {
  if (!(w > 0)) return 0.0;
  return std::max(0.0, q - s * s / w);
}

class TreeBuilder {
 public:
  TreeBuilder(const FeatureMatrix& X, std::span<const double> z, std::span<const double> w,
              std::span<const std::size_t> rows, const TreeParams& params, std::mt19937_64* rng,
              std::size_t max_features)
      : params_(params), rng_(rng), n_features_(X.cols()), max_features_(max_features) {
    const std::size_t n = rows.size();
    cols_.assign(n_features_, std::vector<double>(n));
    z_.resize(n);
    w_.resize(n);
    for (std::size_t pos = 0; pos < n; ++pos) {
      const auto r = rows[pos];
      for (std::size_t f = 0; f < n_features_; ++f) cols_[f][pos] = X(r, f);
      z_[pos] = z[r];
      w_[pos] = w[r];
    }
    // order_[f] lists positions sorted by feature f; order_[n_features_]
    // lists positions ascending. Every node owns the same [begin, end)
    // range in all of them.
    order_.assign(n_features_ + 1, std::vector<std::uint32_t>(n));
    for (auto& o : order_) std::iota(o.begin(), o.end(), 0u);
    for (std::size_t f = 0; f < n_features_; ++f) {
      const auto& col = cols_[f];
      std::stable_sort(order_[f].begin(), order_[f].end(),
                       [&](std::uint32_t a, std::uint32_t b) { return col[a] < col[b]; });
    }
    goes_left_.resize(n);
    scratch_.resize(n);
    all_features_.resize(n_features_);
    std::iota(all_features_.begin(), all_features_.end(), std::size_t{0});
    tree_.feature_count = n_features_;
  }

  RegressionTree build() && {
    build_node(0, z_.size(), 0);
    return std::move(tree_);
  }

 private:
  std::size_t build_node(std::size_t begin, std::size_t end, std::size_t depth) {
    const std::size_t n = end - begin;
    std::span<const std::uint32_t> positions(order_[n_features_].data() + begin, n);
    const auto stats = node_stats<std::uint32_t>(
        positions, [&](std::uint32_t p) { return z_[p]; }, [&](std::uint32_t p) { return w_[p]; });

    const std::size_t id = tree_.nodes.size();
    TreeNode node;
    node.value = stats.mean;
    node.weight = stats.weight;
    node.samples = n;
    tree_.nodes.push_back(node);

    if (!splittable(positions, n, depth, stats)) return id;

    const double tol = kSseTieTolerance * stats.sse;
    double tot_s = 0, tot_q = 0;
    for (auto p : positions) {
      const double d = z_[p] - stats.mean;
      tot_s += w_[p] * d;
      tot_q += w_[p] * d * d;
    }

    std::optional<std::size_t> best_feature;
    double best_threshold = 0;
    double best_sse = std::numeric_limits<double>::infinity();
    for (std::size_t f : candidate_features()) {
      const auto& col = cols_[f];
      const std::uint32_t* ord = order_[f].data() + begin;
      if (col[ord[0]] == col[ord[n - 1]]) continue;
      double wl = 0, sl = 0, ql = 0;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        const auto p = ord[i];
        const double d = z_[p] - stats.mean;
        wl += w_[p];
        sl += w_[p] * d;
        ql += w_[p] * d * d;
        const double x_here = col[p];
        const double x_next = col[ord[i + 1]];
        if (x_here == x_next) continue;
        const std::size_t nl = i + 1;
        if (nl < params_.min_samples_leaf || n - nl < params_.min_samples_leaf) continue;
        const double sse = sse_from_sums(wl, sl, ql) + sse_from_sums(stats.weight - wl, tot_s - sl, tot_q - ql);
        if (sse < best_sse - tol) {
          best_sse = sse;
          best_feature = f;
          best_threshold = midpoint_threshold(x_here, x_next);
        }
      }
    }
    if (!best_feature || !(stats.sse - best_sse > tol)) return id;

    const std::size_t f = *best_feature;
    for (auto p : positions) goes_left_[p] = cols_[f][p] <= best_threshold ? 1 : 0;
    std::size_t n_left = 0;
    for (auto& o : order_) n_left = partition(o, begin, end);

    tree_.nodes[id].feature = static_cast<std::int32_t>(f);
    tree_.nodes[id].threshold = best_threshold;
    tree_.nodes[id].risk_decrease = std::max(0.0, stats.sse - best_sse);
    const auto left = build_node(begin, begin + n_left, depth + 1);
    const auto right = build_node(begin + n_left, end, depth + 1);
    tree_.nodes[id].left = static_cast<std::int32_t>(left);
    tree_.nodes[id].right = static_cast<std::int32_t>(right);
    return id;
  }

  bool splittable(std::span<const std::uint32_t> positions, std::size_t n, std::size_t depth,
                  const NodeStats& stats) const {
    if (n < params_.min_samples_split || n < 2 * params_.min_samples_leaf) return false;
    if (params_.max_depth && depth >= *params_.max_depth) return false;
    if (!(stats.sse > 0)) return false;
    const auto [lo, hi] = std::minmax_element(positions.begin(), positions.end(),
                                              [&](auto a, auto b) { return z_[a] < z_[b]; });
    return z_[*lo] != z_[*hi];
  }

  const std::vector<std::size_t>& candidate_features() {
    if (!rng_ || max_features_ >= n_features_) return all_features_;
    subset_ = all_features_;
    for (std::size_t i = 0; i < max_features_; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, n_features_ - 1);
      std::swap(subset_[i], subset_[pick(*rng_)]);
    }
    subset_.resize(max_features_);
    std::sort(subset_.begin(), subset_.end());
    return subset_;
  }

  // Stable partition of o[begin, end) by goes_left_; returns the left count.
  std::size_t partition(std::vector<std::uint32_t>& o, std::size_t begin, std::size_t end) {
    std::size_t l = begin, r = 0;
    for (std::size_t i = begin; i < end; ++i) {
      const auto p = o[i];
      if (goes_left_[p]) {
        o[l++] = p;
      } else {
        scratch_[r++] = p;
      }
    }
    std::copy(scratch_.begin(), scratch_.begin() + static_cast<std::ptrdiff_t>(r), o.begin() + static_cast<std::ptrdiff_t>(l));
    return l - begin;
  }

  const TreeParams& params_;
  std::mt19937_64* rng_;
  std::size_t n_features_;
  std::size_t max_features_;
  std::vector<std::vector<double>> cols_;
  std::vector<double> z_, w_;
  std::vector<std::vector<std::uint32_t>> order_;
  std::vector<char> goes_left_;
  std::vector<std::uint32_t> scratch_;
  std::vector<std::size_t> all_features_, subset_;
  RegressionTree tree_;
};

inline void check_fit_inputs(const FeatureMatrix& X, std::span<const double> z, std::span<const double> w) {
  if (X.rows() == 0) throw EmptyInput("cannot fit a tree on zero samples");
  if (z.size() != X.rows() || w.size() != X.rows()) {
    throw EmptyInput("feature, target and weight row counts differ");
  }
  for (double wi : w) {
    if (!(wi >= 0) || !std::isfinite(wi)) throw DomainViolation("sample weights must be finite and non-negative");
  }
}

}  // namespace detail

/// Best threshold on one feature over all rows, or nullopt for a constant
/// column. Returned SSE is the weighted within-child SSE after the split.
inline std::optional<SplitCandidate> best_split(const FeatureMatrix& X, std::span<const double> z,
                                                std::span<const double> w, std::size_t feature_index) {
  if (feature_index >= X.cols()) throw WidthMismatch(X.cols(), feature_index + 1);
  detail::check_fit_inputs(X, z, w);
  const std::size_t n = X.rows();
  std::vector<std::size_t> ord(n);
  std::iota(ord.begin(), ord.end(), std::size_t{0});
  std::stable_sort(ord.begin(), ord.end(),
                   [&](std::size_t a, std::size_t b) { return X(a, feature_index) < X(b, feature_index); });
  std::vector<std::size_t> asc(n);
  std::iota(asc.begin(), asc.end(), std::size_t{0});
  const auto stats = detail::node_stats<std::size_t>(
      asc, [&](std::size_t i) { return z[i]; }, [&](std::size_t i) { return w[i]; });
  double tot_s = 0, tot_q = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = z[i] - stats.mean;
    tot_s += w[i] * d;
    tot_q += w[i] * d * d;
  }
  const double tol = kSseTieTolerance * stats.sse;
  std::optional<SplitCandidate> best;
  double wl = 0, sl = 0, ql = 0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const auto r = ord[i];
    const double d = z[r] - stats.mean;
    wl += w[r];
    sl += w[r] * d;
    ql += w[r] * d * d;
    const double a = X(r, feature_index), b = X(ord[i + 1], feature_index);
    if (a == b) continue;
    const double sse = detail::sse_from_sums(wl, sl, ql) + detail::sse_from_sums(stats.weight - wl, tot_s - sl, tot_q - ql);
    if (!best || sse < best->sse - tol) best = SplitCandidate{midpoint_threshold(a, b), sse};
  }
  return best;
}

/// Fits on the given rows of X (repeats allowed, as in a bootstrap sample).
/// When `rng` is non-null and `max_features` is below the width, each node
/// considers a uniform random subset of that many features.
inline RegressionTree fit_tree_rows(const FeatureMatrix& X, std::span<const double> z, std::span<const double> w,
                                    std::span<const std::size_t> rows, const TreeParams& params,
                                    std::mt19937_64* rng = nullptr,
                                    std::optional<std::size_t> max_features = std::nullopt) {
  params.validate();
  detail::check_fit_inputs(X, z, w);
  if (rows.empty()) throw EmptyInput("cannot fit a tree on zero samples");
  for (auto r : rows) {
    if (r >= X.rows()) throw EmptyInput("row index out of range");
  }
  if (max_features && (*max_features < 1 || *max_features > X.cols())) {
    throw InvalidConfig("max_features must lie in [1, feature count]");
  }
  return detail::TreeBuilder(X, z, w, rows, params, rng, max_features.value_or(X.cols())).build();
}

inline RegressionTree fit_tree(const FeatureMatrix& X, std::span<const double> z, std::span<const double> w,
                               const TreeParams& params, std::mt19937_64* rng = nullptr,
                               std::optional<std::size_t> max_features = std::nullopt) {
  std::vector<std::size_t> rows(X.rows());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return fit_tree_rows(X, z, w, rows, params, rng, max_features);
}

/// Per-feature share of total risk decrease; all zeros for a single leaf.
inline std::vector<double> tree_importance(const RegressionTree& tree) {
  std::vector<double> imp(tree.feature_count, 0.0);
  for (const auto& n : tree.nodes) {
    if (!n.is_leaf()) imp[static_cast<std::size_t>(n.feature)] += n.risk_decrease;
  }
  const double total = std::accumulate(imp.begin(), imp.end(), 0.0);
  if (total > 0) {
    for (double& v : imp) v /= total;
  }
  return imp;
}

/// Weighted training SSE of the tree over all rows of X, summed in row order.
inline double training_sse(const RegressionTree& tree, const FeatureMatrix& X, std::span<const double> z,
                           std::span<const double> w) {
  double sse = 0;
  for (std::size_t i = 0; i < X.rows(); ++i) {
    const double d = z[i] - tree.predict(X.row(i));
    sse += w[i] * d * d;
  }
  return sse;
}

}  // namespace surgtime
