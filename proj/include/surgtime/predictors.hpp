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

// The eight prediction methods behind one interface: two benchmarks (AVG,
// SCH) and three tree learners, each with and without the expert estimate
// as an extra feature.

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "surgtime/cart.hpp"
#include "surgtime/data_model.hpp"
#include "surgtime/ensembles.hpp"
#include "surgtime/errors.hpp"
#include "surgtime/metric.hpp"

namespace surgtime {

enum class MethodId { AVG, SCH, DTR, RFR, ABR, DTR_SCH, RFR_SCH, ABR_SCH };

inline constexpr std::array<MethodId, 8> kAllMethods{MethodId::AVG,     MethodId::SCH,     MethodId::DTR,
                                                     MethodId::RFR,     MethodId::ABR,     MethodId::DTR_SCH,
                                                     MethodId::RFR_SCH, MethodId::ABR_SCH};

inline constexpr std::string_view to_string(MethodId m) {
  switch (m) {
    case MethodId::AVG: return "AVG";
    case MethodId::SCH: return "SCH";
    case MethodId::DTR: return "DTR";
    case MethodId::RFR: return "RFR";
    case MethodId::ABR: return "ABR";
    case MethodId::DTR_SCH: return "DTR-SCH";
    case MethodId::RFR_SCH: return "RFR-SCH";
    case MethodId::ABR_SCH: return "ABR-SCH";
  }
  return "?";
}

/// Accepts "DTR-SCH", "DTR_SCH" and lower-case spellings.
inline std::optional<MethodId> parse_method(std::string_view s) {
  std::string key = to_lower(trim(s));
  for (char& c : key) {
    if (c == '_') c = '-';
  }
  for (auto m : kAllMethods) {
    if (to_lower(to_string(m)) == key) return m;
  }
  return std::nullopt;
}

inline constexpr bool is_learned(MethodId m) { return m != MethodId::AVG && m != MethodId::SCH; }

/// True for the learners that take the expert estimate as a feature.
inline constexpr bool is_sch_variant(MethodId m) {
  return m == MethodId::DTR_SCH || m == MethodId::RFR_SCH || m == MethodId::ABR_SCH;
}

inline constexpr bool needs_expert(MethodId m) { return m == MethodId::SCH || is_sch_variant(m); }

struct Hyperparams {
  TreeParams tree;
  ForestParams forest;
  BoostParams boost;
};

/// Surgeons with fewer training cases of a procedure than this fall back
/// to the procedure-wide mean.
inline constexpr std::size_t kAvgMinSurgeonCount = 5;

struct AvgTable {
  struct Cell {
    double mean = 0;
    std::size_t count = 0;
    bool operator==(const Cell&) const = default;
  };
  std::map<std::pair<std::string, std::string>, Cell> by_surgeon;  // (procedure, surgeon)
  std::map<std::string, double> by_procedure;
  double global_mean = 0;

  double lookup(const SurgicalCase& c) const {
    auto it = by_surgeon.find({c.procedure_name, c.surgeon_id});
    if (it != by_surgeon.end() && it->second.count >= kAvgMinSurgeonCount) return it->second.mean;
    auto p = by_procedure.find(c.procedure_name);
    if (p != by_procedure.end()) return p->second;
    return global_mean;
  }

  bool operator==(const AvgTable&) const = default;
};

inline AvgTable build_avg_table(const Dataset& train) {
  if (train.empty()) throw EmptyTrainingSet();
  struct Acc {
    double sum = 0;
    std::size_t n = 0;
  };
  std::map<std::pair<std::string, std::string>, Acc> cells;
  std::map<std::string, Acc> procs;
  Acc all;
  for (const auto& c : train) {
    const double y = c.actual_duration_min;
    auto& cell = cells[{c.procedure_name, c.surgeon_id}];
    cell.sum += y;
    ++cell.n;
    auto& p = procs[c.procedure_name];
    p.sum += y;
    ++p.n;
    all.sum += y;
    ++all.n;
  }
  AvgTable t;
  for (const auto& [key, acc] : cells) t.by_surgeon[key] = {acc.sum / static_cast<double>(acc.n), acc.n};
  for (const auto& [key, acc] : procs) t.by_procedure[key] = acc.sum / static_cast<double>(acc.n);
  t.global_mean = all.sum / static_cast<double>(all.n);
  return t;
}

using TreeModel = std::variant<RegressionTree, Forest, BoostedEnsemble>;

struct LearnedModel {
  EncodingSchema schema;
  TreeModel model;

  double predict_log(std::span<const double> x) const {
    return std::visit(
        [&](const auto& m) -> double {
          using T = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<T, RegressionTree>) return predict_tree(m, x);
          else if constexpr (std::is_same_v<T, Forest>) return predict_forest(m, x);
          else return predict_boosted(m, x);
        },
        model);
  }

  std::vector<double> importance() const {
    return std::visit(
        [](const auto& m) -> std::vector<double> {
          using T = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<T, RegressionTree>) return tree_importance(m);
          else return ensemble_importance(m);
        },
        model);
  }

  bool operator==(const LearnedModel&) const = default;
};

class Predictor {
 public:
  using State = std::variant<std::monostate, AvgTable, LearnedModel>;

  Predictor(MethodId method, State state) : method_(method), state_(std::move(state)) {}

  MethodId method() const { return method_; }
  const State& state() const { return state_; }
  const LearnedModel* learned() const { return std::get_if<LearnedModel>(&state_); }
  const AvgTable* avg_table() const { return std::get_if<AvgTable>(&state_); }

  /// Predicted duration in minutes; always positive.
  double predict(const SurgicalCase& c) const {
    switch (method_) {
      case MethodId::AVG:
        return std::get<AvgTable>(state_).lookup(c);
      case MethodId::SCH:
        if (!c.has_expert()) throw DomainViolation("case '" + c.case_id + "' has no expert prediction");
        return c.expert_prediction_min;
      default: {
        const auto& lm = std::get<LearnedModel>(state_);
        return inv_log(lm.predict_log(encode(c, lm.schema)));
      }
    }
  }

  /// Relative importance per encoded column, or nullopt for the benchmarks.
  std::optional<std::vector<double>> importance() const {
    if (const auto* lm = learned()) return lm->importance();
    return std::nullopt;
  }

  bool operator==(const Predictor&) const = default;

 private:
  MethodId method_;
  State state_;
};

/// Trains `method` on `train`. Learned methods regress ln(actual minutes) on
/// the encoded features with unit weights; `seed` drives forest randomness.
inline Predictor fit(MethodId method, const Dataset& train, const Hyperparams& hp, std::uint64_t seed) {
  if (train.empty()) throw EmptyTrainingSet();
  if (method == MethodId::AVG) return Predictor(method, build_avg_table(train));
  if (method == MethodId::SCH) return Predictor(method, std::monostate{});

  LearnedModel lm;
  lm.schema = build_schema(train, is_sch_variant(method));
  const FeatureMatrix X = encode_all(train.cases, lm.schema);
  const std::vector<double> z = log_targets(train.cases);
  switch (method) {
    case MethodId::DTR:
    case MethodId::DTR_SCH: {
      const std::vector<double> w(z.size(), 1.0);
      lm.model = fit_tree(X, z, w, hp.tree);
      break;
    }
    case MethodId::RFR:
    case MethodId::RFR_SCH: {
      ForestParams fp = hp.forest;
      fp.seed = seed;
      lm.model = fit_forest(X, z, fp);
      break;
    }
    default: {
      BoostParams bp = hp.boost;
      bp.seed = seed;
      lm.model = fit_adaboost_r2(X, z, bp);
      break;
    }
  }
  return Predictor(method, std::move(lm));
}

inline std::vector<PredictionPair> predict_batch(const Predictor& pred, std::span<const SurgicalCase> cases) {
  std::vector<PredictionPair> out;
  out.reserve(cases.size());
  for (const auto& c : cases) out.push_back({c.actual_duration_min, pred.predict(c), c.procedure_name});
  return out;
}

}  // namespace surgtime
