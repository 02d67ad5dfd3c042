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

struct Problem {
  FeatureMatrix X;
  std::vector<double> z;
};

Problem noisy_problem(std::uint64_t seed, std::size_t n = 120, std::size_t d = 4) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  std::normal_distribution<double> eps(0, 0.2);
  std::vector<std::vector<double>> rows;
  std::vector<double> z;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> x(d);
    for (auto& v : x) v = u(rng);
    z.push_back(std::log(20.0) + x[0] + 0.5 * (x[1] > 0.5) + eps(rng));
    rows.push_back(x);
  }
  return {FeatureMatrix::from_rows(rows), z};
}

std::vector<double> random_query(std::mt19937_64& rng, std::size_t d) {
  std::uniform_real_distribution<double> u(-0.2, 1.2);
  std::vector<double> q(d);
  for (auto& v : q) v = u(rng);
  return q;
}

TEST(Forest, SingleTreeWithoutBootstrapIsPlainTree) {
  const auto prob = noisy_problem(1);
  ForestParams fp;
  fp.n_trees = 1;
  fp.bootstrap = false;
  const auto forest = fit_forest(prob.X, prob.z, fp);
  const auto tree = fit_tree(prob.X, prob.z, std::vector<double>(prob.z.size(), 1.0), fp.tree_params);
  EXPECT_EQ(forest.trees.front(), tree);
  std::mt19937_64 rng(2);
  for (int i = 0; i < 200; ++i) {
    const auto q = random_query(rng, 4);
    EXPECT_EQ(predict_forest(forest, q), tree.predict(q));
  }
}

TEST(Forest, SameSeedSameForest) {
  const auto prob = noisy_problem(3);
  ForestParams fp;
  fp.n_trees = 8;
  fp.max_features = 2;
  fp.seed = 99;
  EXPECT_EQ(fit_forest(prob.X, prob.z, fp), fit_forest(prob.X, prob.z, fp));
  auto other = fp;
  other.seed = 100;
  EXPECT_NE(fit_forest(prob.X, prob.z, fp), fit_forest(prob.X, prob.z, other));
}

TEST(Forest, ConstantTargets) {
  const auto prob = noisy_problem(4, 30);
  const std::vector<double> z(30, 3.0);
  ForestParams fp;
  fp.n_trees = 5;
  const auto f = fit_forest(prob.X, z, fp);
  for (const auto& t : f.trees) EXPECT_EQ(t.nodes.size(), 1u);
  std::mt19937_64 rng(1);
  EXPECT_EQ(predict_forest(f, random_query(rng, 4)), 3.0);
}

TEST(Forest, PredictionIsMeanOfTrees) {
  auto leaf = [](double v) {
    RegressionTree t;
    t.feature_count = 1;
    TreeNode n;
    n.value = v;
    t.nodes = {n};
    return t;
  };
  const double x[] = {0};
  EXPECT_EQ(predict_forest(Forest{{leaf(1), leaf(3)}}, x), 2.0);
  EXPECT_EQ(predict_forest(Forest{{leaf(7)}}, x), 7.0);
  EXPECT_EQ(predict_forest(Forest{std::vector<RegressionTree>(10, leaf(4.5))}, x), 4.5);
  EXPECT_THROW(predict_forest(Forest{}, x), DegenerateEnsemble);
}

TEST(Forest, ImportanceIsMeanOfTrees) {
  auto stump = [](std::int32_t f) {
    RegressionTree t;
    t.feature_count = 2;
    TreeNode root, l, r;
    root.feature = f, root.left = 1, root.right = 2, root.risk_decrease = 5;
    t.nodes = {root, l, r};
    return t;
  };
  const auto imp = ensemble_importance(Forest{{stump(0), stump(1)}});
  EXPECT_DOUBLE_EQ(imp[0], 0.5);
  EXPECT_DOUBLE_EQ(imp[1], 0.5);
  const auto one = ensemble_importance(Forest{{stump(1)}});
  EXPECT_EQ(one, (std::vector<double>{0, 1}));
}

TEST(WeightedMedian, Examples) {
  EXPECT_EQ(weighted_median(std::vector<double>{1, 2, 3}, std::vector<double>{0.2, 0.2, 0.6}), 3.0);
  EXPECT_EQ(weighted_median(std::vector<double>{5, 1, 9, 3, 7}, std::vector<double>(5, 1.0)), 5.0);
  EXPECT_EQ(weighted_median(std::vector<double>{4.2}, std::vector<double>{0.1}), 4.2);
  EXPECT_THROW(weighted_median(std::vector<double>{}, std::vector<double>{}), EmptyInput);
}

TEST(WeightedMedian, MatchesPrefixOracle) {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 1000; ++i) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 12)(rng);
    std::vector<double> v(n), w(n);
    for (auto& x : v) x = std::uniform_int_distribution<int>(0, 6)(rng);
    for (auto& x : w) x = std::uniform_real_distribution<double>(0.01, 2)(rng);
    EXPECT_EQ(weighted_median(v, w), testing::weighted_median_oracle(v, w));
  }
}

TEST(AdaBoost, SingleRoundIsItsWeightedTree) {
  const auto prob = noisy_problem(5);
  BoostParams bp;
  bp.n_estimators = 1;
  const auto e = fit_adaboost_r2(prob.X, prob.z, bp);
  ASSERT_EQ(e.trees.size(), 1u);
  const std::vector<double> w(prob.z.size(), 1.0 / static_cast<double>(prob.z.size()));
  EXPECT_EQ(e.trees.front(), fit_tree(prob.X, prob.z, w, bp.tree_params));
  std::mt19937_64 rng(6);
  for (int i = 0; i < 200; ++i) {
    const auto q = random_query(rng, 4);
    EXPECT_EQ(predict_boosted(e, q), e.trees.front().predict(q));
  }
}

TEST(AdaBoost, PerfectFitStopsAfterFirstRound) {
  std::vector<std::vector<double>> rows;
  std::vector<double> z;
  for (int i = 0; i < 12; ++i) {
    rows.push_back({static_cast<double>(i)});
    z.push_back(std::log(10.0 + i));
  }
  BoostParams bp;
  bp.tree_params.min_samples_split = 2;
  BoostTrace trace;
  const auto e = fit_adaboost_r2(FeatureMatrix::from_rows(rows), z, bp, &trace);
  ASSERT_EQ(e.trees.size(), 1u);
  EXPECT_EQ(e.log_weights.front(), kPerfectFitLogWeight);
  EXPECT_EQ(trace.average_loss.size(), 1u);
}

TEST(AdaBoost, HandComputedRound) {
  // Three samples on one feature. With min_samples_split=3 and max depth 1
  // the stump keeps {0,1} left (mean 0.5) and {10} right. Residuals are
  // 0.5, 0.5, 0 so the linear losses are 1, 1, 0, giving L = 2/3 >= 0.5:
  // the first round is kept with the fallback weight and boosting stops.
  const auto X = FeatureMatrix::from_rows({{0}, {1}, {2}});
  const std::vector<double> z{0, 1, 10};
  BoostParams bp;
  bp.n_estimators = 5;
  bp.tree_params.min_samples_split = 3;
  bp.tree_params.max_depth = 1;
  BoostTrace trace;
  const auto e = fit_adaboost_r2(X, z, bp, &trace);
  ASSERT_EQ(e.trees.size(), 1u);
  EXPECT_NEAR(trace.average_loss.front(), 2.0 / 3.0, 1e-15);
  EXPECT_EQ(e.log_weights.front(), kFallbackLogWeight);
}

TEST(AdaBoost, WeightUpdateFollowsBeta) {
  // Five samples; the stump splits {0,2} | {10,10,13} with leaves 1 and 11.
  // Residuals 1,1,1,1,2, so square losses are 1/4 (x4) and 1, L = 0.4 and
  // beta = 2/3. Sample weights scale by beta^(1 - loss) and renormalize.
  const auto X = FeatureMatrix::from_rows({{0}, {1}, {2}, {3}, {4}});
  const std::vector<double> z{0, 2, 10, 10, 13};
  BoostParams bp;
  bp.n_estimators = 1;
  bp.loss_shape = BoostLoss::Square;
  bp.tree_params.min_samples_split = 5;
  bp.tree_params.max_depth = 1;
  BoostTrace trace;
  const auto e = fit_adaboost_r2(X, z, bp, &trace);
  ASSERT_EQ(trace.average_loss.size(), 1u);
  EXPECT_NEAR(trace.average_loss[0], 0.4, 1e-15);
  const double beta = 2.0 / 3.0;
  EXPECT_NEAR(e.log_weights[0], std::log(1 / beta), 1e-12);
  const double b = std::pow(beta, 0.75);
  const std::vector<double> expect{b, b, b, b, 1.0};
  const double total = 4 * b + 1;
  for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(trace.weights_after[0][i], expect[i] / total, 1e-12);

  // Linear loss on the same stump: 0.5 (x4) and 1, L = 0.6, kept only as
  // the round-1 fallback.
  bp.loss_shape = BoostLoss::Linear;
  bp.n_estimators = 3;
  BoostTrace lin;
  const auto fallback = fit_adaboost_r2(X, z, bp, &lin);
  EXPECT_NEAR(lin.average_loss[0], 0.6, 1e-15);
  ASSERT_EQ(fallback.trees.size(), 1u);
  EXPECT_EQ(fallback.log_weights[0], kFallbackLogWeight);
}

TEST(AdaBoost, WeightsStayADistribution) {
  const auto prob = noisy_problem(9);
  for (auto shape : {BoostLoss::Linear, BoostLoss::Square, BoostLoss::Exponential}) {
    BoostParams bp;
    bp.n_estimators = 20;
    bp.loss_shape = shape;
    BoostTrace trace;
    const auto e = fit_adaboost_r2(prob.X, prob.z, bp, &trace);
    EXPECT_EQ(e.trees.size(), e.log_weights.size());
    for (const auto& w : trace.weights_after) {
      double total = 0;
      for (double x : w) {
        EXPECT_GE(x, 0);
        total += x;
      }
      EXPECT_NEAR(total, 1.0, 1e-12);
    }
    for (double lw : e.log_weights) EXPECT_GT(lw, 0);
    for (std::size_t t = 0; t < e.trees.size(); ++t) {
      if (t > 0) {
        EXPECT_LT(trace.average_loss[t], 0.5);
      }
    }
  }
}

TEST(AdaBoost, ImportanceWeightedByLogWeight) {
  auto stump = [](std::int32_t f) {
    RegressionTree t;
    t.feature_count = 2;
    TreeNode root, l, r;
    root.feature = f, root.left = 1, root.right = 2, root.risk_decrease = 1;
    t.nodes = {root, l, r};
    return t;
  };
  const BoostedEnsemble e{{stump(0), stump(1)}, {3.0, 1.0}};
  const auto imp = ensemble_importance(e);
  EXPECT_DOUBLE_EQ(imp[0], 0.75);
  EXPECT_DOUBLE_EQ(imp[1], 0.25);
  const BoostedEnsemble one{{stump(1)}, {2.0}};
  EXPECT_EQ(ensemble_importance(one), (std::vector<double>{0, 1}));
}

TEST(MemberRng, StreamsDiffer) {
  auto a = member_rng(1, 0), b = member_rng(1, 1), c = member_rng(1, 0);
  const auto va = a();
  EXPECT_NE(va, b());
  EXPECT_EQ(va, c());
}

}  // namespace
}  // namespace surgtime
