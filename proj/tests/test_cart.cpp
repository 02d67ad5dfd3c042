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

#include <gtest/gtest.h>

#include <random>

#include "support.hpp"

namespace surgtime {
namespace {

FeatureMatrix column(const std::vector<double>& x) {
  std::vector<std::vector<double>> rows;
  for (double v : x) rows.push_back({v});
  return FeatureMatrix::from_rows(rows);
}

std::vector<double> ones(std::size_t n) { return std::vector<double>(n, 1.0); }

TreeParams mss(std::size_t n) {
  TreeParams p;
  p.min_samples_split = n;
  return p;
}

TEST(BestSplit, StepFunction) {
  const auto X = column({1, 2, 3, 4});
  const std::vector<double> z{0, 0, 1, 1};
  const auto s = best_split(X, z, ones(4), 0);
  ASSERT_TRUE(s);
  EXPECT_DOUBLE_EQ(s->threshold, 2.5);
  EXPECT_DOUBLE_EQ(s->sse, 0.0);
}

TEST(BestSplit, ConstantColumnHasNone) {
  const auto X = column({3, 3, 3});
  EXPECT_FALSE(best_split(X, std::vector<double>{1, 2, 3}, ones(3), 0));
}

TEST(BestSplit, TwoSamples) {
  const auto X = column({0, 1});
  const auto s = best_split(X, std::vector<double>{0, 10}, ones(2), 0);
  ASSERT_TRUE(s);
  EXPECT_DOUBLE_EQ(s->threshold, 0.5);
  EXPECT_DOUBLE_EQ(s->sse, 0.0);
}

TEST(BestSplit, TiesKeepLowestThreshold) {
  // Splitting after the first or the third value gives the same SSE.
  const auto X = column({1, 2, 3, 4});
  const std::vector<double> z{0, 1, 0, 1};
  const auto s = best_split(X, z, ones(4), 0);
  ASSERT_TRUE(s);
  EXPECT_DOUBLE_EQ(s->threshold, 1.5);
}

TEST(FitTree, BelowMinSamplesIsLeaf) {
  std::vector<double> x(9), z(9);
  for (int i = 0; i < 9; ++i) x[i] = i, z[i] = i * i;
  const auto t = fit_tree(column(x), z, ones(9), TreeParams{});
  ASSERT_EQ(t.nodes.size(), 1u);
  EXPECT_DOUBLE_EQ(t.nodes[0].value, 204.0 / 9.0);
}

TEST(FitTree, DepthOneStep) {
  const auto t = fit_tree(column({1, 2, 3, 4}), std::vector<double>{0, 0, 1, 1}, ones(4), mss(2));
  EXPECT_EQ(t.depth(), 1u);
  EXPECT_EQ(t.leaf_count(), 2u);
  const double lo[] = {1.5}, hi[] = {3.7}, at[] = {2.5};
  EXPECT_EQ(t.predict(lo), 0.0);
  EXPECT_EQ(t.predict(hi), 1.0);
  EXPECT_EQ(t.predict(at), 0.0);
  EXPECT_EQ(tree_importance(t), std::vector<double>{1.0});
}

TEST(FitTree, EqualTargetsIsLeaf) {
  const auto t = fit_tree(column({1, 2, 3, 4, 5}), std::vector<double>(5, 2.0), ones(5), mss(2));
  EXPECT_EQ(t.nodes.size(), 1u);
  EXPECT_EQ(tree_importance(t), std::vector<double>{0.0});
}

TEST(FitTree, MaxDepthRespected) {
  std::vector<double> x(32), z(32);
  for (int i = 0; i < 32; ++i) x[i] = i, z[i] = i;
  TreeParams p = mss(2);
  p.max_depth = 2;
  const auto t = fit_tree(column(x), z, ones(32), p);
  EXPECT_EQ(t.depth(), 2u);
  EXPECT_EQ(t.leaf_count(), 4u);
}

TEST(FitTree, ZeroWeightRowsAreIgnoredInLeafMeans) {
  const auto X = column({1, 2, 3, 4});
  const std::vector<double> z{0, 0, 1, 100}, w{1, 1, 1, 0};
  const auto t = fit_tree(X, z, w, mss(2));
  const double far[] = {10};
  EXPECT_DOUBLE_EQ(t.predict(far), 1.0);
}

TEST(FitTree, WrongWidthRejected) {
  const auto t = fit_tree(column({1, 2}), std::vector<double>{0, 1}, ones(2), mss(2));
  const double x[] = {1, 2};
  EXPECT_THROW(t.predict(x), WidthMismatch);
}

TEST(TreeImportance, NormalisedByDecrease) {
  // Two splits with risk decreases 3 and 1 on features 0 and 1.
  RegressionTree t;
  t.feature_count = 3;
  TreeNode root, mid, l1, l2, l3;
  root.feature = 0, root.left = 1, root.right = 4, root.risk_decrease = 3;
  mid.feature = 1, mid.left = 2, mid.right = 3, mid.risk_decrease = 1;
  t.nodes = {root, mid, l1, l2, l3};
  const auto imp = tree_importance(t);
  EXPECT_DOUBLE_EQ(imp[0], 0.75);
  EXPECT_DOUBLE_EQ(imp[1], 0.25);
  EXPECT_DOUBLE_EQ(imp[2], 0.0);
}

TEST(FitTree, MatchesBruteForceOracle) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 300; ++trial) {
    const auto prob = testing::random_problem(rng, trial % 3 == 0);
    const auto X = FeatureMatrix::from_rows(prob.rows);
    TreeParams p;
    p.min_samples_split = prob.min_samples_split;
    p.max_depth = prob.max_depth;
    const auto tree = fit_tree(X, prob.z, prob.w, p);
    const testing::OracleTree oracle(prob.rows, prob.z, prob.w, prob.min_samples_split, prob.max_depth);
    EXPECT_EQ(training_sse(tree, X, prob.z, prob.w), oracle.training_sse()) << "trial " << trial;
    EXPECT_EQ(tree.nodes.size(), oracle.node_count()) << "trial " << trial;
    for (const auto& row : prob.rows) ASSERT_EQ(tree.predict(row), oracle.predict(row));
  }
}

TEST(FitTree, Properties) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    const auto prob = testing::random_problem(rng, true);
    const auto X = FeatureMatrix::from_rows(prob.rows);
    TreeParams p;
    p.min_samples_split = prob.min_samples_split;
    p.max_depth = prob.max_depth;
    const auto tree = fit_tree(X, prob.z, prob.w, p);
    // Never worse than the root leaf, and decreases account for the gap.
    const auto root = testing::direct_stats(
        [&] {
          std::vector<std::size_t> r(prob.z.size());
          std::iota(r.begin(), r.end(), std::size_t{0});
          return r;
        }(),
        prob.z, prob.w);
    const double sse = training_sse(tree, X, prob.z, prob.w);
    EXPECT_LE(sse, root.sse + 1e-9);
    double dec = 0;
    for (const auto& n : tree.nodes) {
      if (!n.is_leaf()) {
        EXPECT_GE(n.risk_decrease, 0);
        EXPECT_GE(n.samples, p.min_samples_split);
      }
      dec += n.risk_decrease;
    }
    EXPECT_NEAR(root.sse - dec, sse, 1e-9 * (1 + root.sse));
    const auto imp = tree_importance(tree);
    const double total = std::accumulate(imp.begin(), imp.end(), 0.0);
    if (tree.nodes.size() > 1) {
      EXPECT_NEAR(total, 1.0, 1e-12);
    }
    if (p.max_depth) {
      EXPECT_LE(tree.depth(), *p.max_depth);
    }
  }
}

TEST(FitTree, RowSubsetEqualsExplicitCopy) {
  std::mt19937_64 rng(5);
  const auto prob = testing::random_problem(rng);
  const auto X = FeatureMatrix::from_rows(prob.rows);
  std::vector<std::size_t> rows;
  std::uniform_int_distribution<std::size_t> pick(0, prob.z.size() - 1);
  for (std::size_t i = 0; i < prob.z.size(); ++i) rows.push_back(pick(rng));
  std::sort(rows.begin(), rows.end());
  std::vector<std::vector<double>> sub;
  std::vector<double> zs;
  for (auto r : rows) {
    sub.push_back(prob.rows[r]);
    zs.push_back(prob.z[r]);
  }
  const auto a = fit_tree_rows(X, prob.z, ones(prob.z.size()), rows, mss(2));
  const auto b = fit_tree(FeatureMatrix::from_rows(sub), zs, ones(zs.size()), mss(2));
  EXPECT_EQ(a, b);
}

}  // namespace
}  // namespace surgtime
