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

#include "support.hpp"

namespace surgtime {
namespace {

using testing::make_case;

Dataset avg_fixture() {
  Dataset ds;
  const double s1[] = {30, 40, 50, 60, 70};
  for (int i = 0; i < 5; ++i) ds.cases.push_back(make_case("a" + std::to_string(i), "P", "S1", s1[i]));
  const double s2[] = {10, 20, 30};
  for (int i = 0; i < 3; ++i) ds.cases.push_back(make_case("b" + std::to_string(i), "P", "S2", s2[i]));
  ds.cases.push_back(make_case("c0", "Q", "S1", 100));
  return ds;
}

TEST(Methods, NamesRoundTrip) {
  for (auto m : kAllMethods) EXPECT_EQ(parse_method(to_string(m)), m);
  EXPECT_EQ(parse_method("rfr_sch"), MethodId::RFR_SCH);
  EXPECT_EQ(parse_method("abr-sch"), MethodId::ABR_SCH);
  EXPECT_FALSE(parse_method("XGB"));
  EXPECT_TRUE(needs_expert(MethodId::SCH));
  EXPECT_FALSE(needs_expert(MethodId::DTR));
  EXPECT_FALSE(is_learned(MethodId::AVG));
}

TEST(Avg, SurgeonMeanWithEnoughCases) {
  const auto ds = avg_fixture();
  const auto pred = fit(MethodId::AVG, ds, {}, 0);
  EXPECT_DOUBLE_EQ(pred.predict(make_case("x", "P", "S1", 1)), 50.0);
}

TEST(Avg, ProcedureFallbackForRareSurgeon) {
  const auto ds = avg_fixture();
  const auto pred = fit(MethodId::AVG, ds, {}, 0);
  const double proc_mean = (30 + 40 + 50 + 60 + 70 + 10 + 20 + 30) / 8.0;
  EXPECT_DOUBLE_EQ(pred.predict(make_case("x", "P", "S2", 1)), proc_mean);
  EXPECT_DOUBLE_EQ(pred.predict(make_case("x", "P", "S9", 1)), proc_mean);
}

TEST(Avg, GlobalMeanForUnseenProcedure) {
  const auto ds = avg_fixture();
  const auto pred = fit(MethodId::AVG, ds, {}, 0);
  double total = 0;
  for (const auto& c : ds) total += c.actual_duration_min;
  EXPECT_DOUBLE_EQ(pred.predict(make_case("x", "Z", "S1", 1)), total / 9.0);
}

TEST(Sch, PassesExpertThrough) {
  const auto pred = fit(MethodId::SCH, avg_fixture(), {}, 0);
  EXPECT_EQ(pred.predict(make_case("x", "P", "S1", 1, 45)), 45.0);
  auto c = make_case("y", "P", "S1", 1);
  c.expert_prediction_min = std::nan("");
  EXPECT_THROW(pred.predict(c), DomainViolation);
}

TEST(Learned, SchVariantAddsOneColumn) {
  const auto ds = synth_generate(testing::small_synth()).dataset;
  const auto hp = testing::fast_hyperparams();
  const auto a = fit(MethodId::DTR, ds, hp, 1);
  const auto b = fit(MethodId::DTR_SCH, ds, hp, 1);
  EXPECT_EQ(b.learned()->schema.width(), a.learned()->schema.width() + 1);
  EXPECT_EQ(b.learned()->schema.feature_names.back(), kExpertFeature);
}

TEST(Learned, SingleLeafPredictsExp) {
  Dataset ds;
  for (int i = 0; i < 4; ++i) ds.cases.push_back(make_case("c" + std::to_string(i), "P", "S1", 30));
  const auto pred = fit(MethodId::DTR, ds, {}, 0);
  EXPECT_NEAR(pred.predict(make_case("x", "Q", "S7", 1)), 30.0, 1e-12);
}

TEST(Learned, AllMethodsPositiveAndDeterministic) {
  const auto ds = synth_generate(testing::small_synth()).dataset;
  const auto hp = testing::fast_hyperparams();
  for (auto m : kAllMethods) {
    const auto p1 = fit(m, ds, hp, 42);
    const auto p2 = fit(m, ds, hp, 42);
    EXPECT_TRUE(p1 == p2) << to_string(m);
    for (const auto& c : ds) EXPECT_GT(p1.predict(c), 0) << to_string(m);
    if (is_learned(m)) {
      const auto imp = *p1.importance();
      double total = 0;
      for (double v : imp) {
        EXPECT_GE(v, 0);
        total += v;
      }
      EXPECT_NEAR(total, 1.0, 1e-9) << to_string(m);
    } else {
      EXPECT_FALSE(p1.importance());
    }
  }
}

TEST(Learned, AutomatedMethodsIgnoreExpertColumn) {
  auto ds = synth_generate(testing::small_synth()).dataset;
  auto poisoned = ds;
  for (auto& c : poisoned.cases) c.expert_prediction_min = 1.0;
  const auto hp = testing::fast_hyperparams();
  for (auto m : {MethodId::AVG, MethodId::DTR, MethodId::RFR, MethodId::ABR}) {
    const auto a = fit(m, ds, hp, 3), b = fit(m, poisoned, hp, 3);
    EXPECT_TRUE(a == b) << to_string(m);
    for (std::size_t i = 0; i < ds.size(); ++i) EXPECT_EQ(a.predict(ds[i]), b.predict(poisoned[i]));
  }
}

TEST(PredictBatch, Shapes) {
  const auto pred = fit(MethodId::SCH, avg_fixture(), {}, 0);
  EXPECT_TRUE(predict_batch(pred, std::vector<SurgicalCase>{}).empty());
  const std::vector<SurgicalCase> one{make_case("x", "P", "S1", 33, 44)};
  const auto out = predict_batch(pred, one);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].actual, 33.0);
  EXPECT_EQ(out[0].predicted, 44.0);
  EXPECT_EQ(out[0].procedure_name, "P");
}

TEST(Fit, EmptyTrainingSetRejected) {
  for (auto m : kAllMethods) EXPECT_THROW(fit(m, Dataset{}, {}, 0), EmptyTrainingSet);
}

}  // namespace
}  // namespace surgtime
