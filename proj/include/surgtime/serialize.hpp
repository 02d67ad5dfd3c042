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

// JSON and CSV forms of trees, predictors and evaluation reports.

#pragma once

#include <cstdint>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "surgtime/cart.hpp"
#include "surgtime/csv.hpp"
#include "surgtime/ensembles.hpp"
#include "surgtime/evaluation.hpp"
#include "surgtime/format.hpp"
#include "surgtime/predictors.hpp"

namespace surgtime {

using Json = nlohmann::ordered_json;

inline constexpr std::string_view kModelFormat = "surgtime-model";
inline constexpr int kModelVersion = 1;

// ---------------------------------------------------------------------------
// Trees
//
// Internal node: {"feature", "feature_index", "threshold", "risk_decrease",
//                 "n", "weight", "value", "left", "right"}
// Leaf:          {"value", "n", "weight"}

namespace detail {

inline Json node_to_json(const RegressionTree& t, std::size_t i, const std::vector<std::string>& names) {
  const auto& n = t.nodes[i];
  Json j;
  if (!n.is_leaf()) {
    const auto f = static_cast<std::size_t>(n.feature);
    j["feature"] = f < names.size() ? names[f] : "x" + std::to_string(f);
    j["feature_index"] = f;
    j["threshold"] = n.threshold;
    j["risk_decrease"] = n.risk_decrease;
  }
  j["n"] = n.samples;
  j["weight"] = n.weight;
  j["value"] = n.value;
  if (!n.is_leaf()) {
    j["left"] = node_to_json(t, static_cast<std::size_t>(n.left), names);
    j["right"] = node_to_json(t, static_cast<std::size_t>(n.right), names);
  }
  return j;
}

inline std::size_t node_from_json(const Json& j, RegressionTree& t) {
  const std::size_t id = t.nodes.size();
  TreeNode n;
  n.samples = j.at("n").get<std::size_t>();
  n.weight = j.at("weight").get<double>();
  n.value = j.at("value").get<double>();
  t.nodes.push_back(n);
  if (j.contains("left")) {
    const auto f = j.at("feature_index").get<std::size_t>();
    if (f >= t.feature_count) throw InvalidConfig("tree node feature_index out of range");
    t.nodes[id].feature = static_cast<std::int32_t>(f);
    t.nodes[id].threshold = j.at("threshold").get<double>();
    t.nodes[id].risk_decrease = j.at("risk_decrease").get<double>();
    const auto l = node_from_json(j.at("left"), t);
    const auto r = node_from_json(j.at("right"), t);
    t.nodes[id].left = static_cast<std::int32_t>(l);
    t.nodes[id].right = static_cast<std::int32_t>(r);
  }
  return id;
}

}  // namespace detail

inline Json tree_to_json(const RegressionTree& t, const std::vector<std::string>& feature_names = {}) {
  return Json{{"feature_count", t.feature_count}, {"root", detail::node_to_json(t, 0, feature_names)}};
}

inline RegressionTree tree_from_json(const Json& j) {
  RegressionTree t;
  t.feature_count = j.at("feature_count").get<std::size_t>();
  detail::node_from_json(j.at("root"), t);
  return t;
}

// ---------------------------------------------------------------------------
// Schema and predictors

inline Json schema_to_json(const EncodingSchema& s) {
  return Json{{"genders", s.genders},
              {"locations", s.locations},
              {"patient_classes", s.patient_classes},
              {"surgeons", s.surgeons},
              {"procedures", s.procedures},
              {"include_expert", s.include_expert},
              {"feature_names", s.feature_names}};
}

inline EncodingSchema schema_from_json(const Json& j) {
  EncodingSchema s;
  s.genders = j.at("genders").get<std::vector<std::string>>();
  s.locations = j.at("locations").get<std::vector<std::string>>();
  s.patient_classes = j.at("patient_classes").get<std::vector<std::string>>();
  s.surgeons = j.at("surgeons").get<std::vector<std::string>>();
  s.procedures = j.at("procedures").get<std::vector<std::string>>();
  s.include_expert = j.at("include_expert").get<bool>();
  refresh_feature_names(s);
  if (s.feature_names != j.at("feature_names").get<std::vector<std::string>>()) {
    throw InvalidConfig("model schema feature_names disagree with its vocabularies");
  }
  return s;
}

inline std::string_view to_string(BoostLoss l) {
  switch (l) {
    case BoostLoss::Linear: return "linear";
    case BoostLoss::Square: return "square";
    case BoostLoss::Exponential: return "exponential";
  }
  return "linear";
}

inline std::optional<BoostLoss> parse_boost_loss(std::string_view s) {
  const auto key = to_lower(trim(s));
  if (key == "linear") return BoostLoss::Linear;
  if (key == "square") return BoostLoss::Square;
  if (key == "exponential") return BoostLoss::Exponential;
  return std::nullopt;
}

inline Json tree_params_to_json(const TreeParams& p) {
  Json j{{"min_samples_split", p.min_samples_split}, {"min_samples_leaf", p.min_samples_leaf}};
  j["max_depth"] = p.max_depth ? Json(*p.max_depth) : Json(nullptr);
  return j;
}

inline Json hyperparams_to_json(const Hyperparams& hp) {
  Json forest{{"n_trees", hp.forest.n_trees}, {"bootstrap", hp.forest.bootstrap}};
  forest["max_features"] = hp.forest.max_features ? Json(*hp.forest.max_features) : Json(nullptr);
  forest["tree"] = tree_params_to_json(hp.forest.tree_params);
  Json boost{{"n_estimators", hp.boost.n_estimators}, {"loss", std::string(to_string(hp.boost.loss_shape))}};
  boost["tree"] = tree_params_to_json(hp.boost.tree_params);
  return Json{{"tree", tree_params_to_json(hp.tree)}, {"forest", forest}, {"boost", boost}};
}

inline Json predictor_to_json(const Predictor& pred, const Hyperparams* hp = nullptr) {
  Json j{{"format", kModelFormat}, {"version", kModelVersion}, {"method", std::string(to_string(pred.method()))}};
  if (hp) j["hyperparameters"] = hyperparams_to_json(*hp);
  Json model;
  if (const auto* t = pred.avg_table()) {
    model["kind"] = "avg_table";
    Json cells = Json::array();
    for (const auto& [key, cell] : t->by_surgeon) {
      cells.push_back({{"procedure", key.first}, {"surgeon", key.second}, {"mean", cell.mean}, {"count", cell.count}});
    }
    Json procs = Json::array();
    for (const auto& [name, mean] : t->by_procedure) procs.push_back({{"procedure", name}, {"mean", mean}});
    model["cells"] = cells;
    model["procedures"] = procs;
    model["global_mean"] = t->global_mean;
  } else if (const auto* lm = pred.learned()) {
    j["schema"] = schema_to_json(lm->schema);
    const auto& names = lm->schema.feature_names;
    if (const auto* tree = std::get_if<RegressionTree>(&lm->model)) {
      model["kind"] = "tree";
      model["tree"] = tree_to_json(*tree, names);
    } else if (const auto* forest = std::get_if<Forest>(&lm->model)) {
      model["kind"] = "forest";
      Json trees = Json::array();
      for (const auto& member : forest->trees) trees.push_back(tree_to_json(member, names));
      model["trees"] = trees;
    } else {
      const auto& ens = std::get<BoostedEnsemble>(lm->model);
      model["kind"] = "boosted";
      Json members = Json::array();
      for (std::size_t i = 0; i < ens.trees.size(); ++i) {
        members.push_back({{"log_weight", ens.log_weights[i]}, {"tree", tree_to_json(ens.trees[i], names)}});
      }
      model["members"] = members;
    }
  } else {
    model["kind"] = "expert";
  }
  j["model"] = model;
  return j;
}

inline Predictor predictor_from_json(const Json& j) {
  if (j.value("format", std::string()) != kModelFormat) throw InvalidConfig("not a surgtime model artifact");
  if (j.value("version", 0) != kModelVersion) throw InvalidConfig("unsupported model artifact version");
  const auto method = parse_method(j.at("method").get<std::string>());
  if (!method) throw InvalidConfig("unknown method in model artifact");
  const Json& model = j.at("model");
  const auto kind = model.at("kind").get<std::string>();
  if (*method == MethodId::AVG) {
    if (kind != "avg_table") throw InvalidConfig("AVG artifact must hold an avg_table");
    AvgTable t;
    for (const auto& c : model.at("cells")) {
      t.by_surgeon[{c.at("procedure").get<std::string>(), c.at("surgeon").get<std::string>()}] = {
          c.at("mean").get<double>(), c.at("count").get<std::size_t>()};
    }
    for (const auto& p : model.at("procedures")) t.by_procedure[p.at("procedure").get<std::string>()] = p.at("mean").get<double>();
    t.global_mean = model.at("global_mean").get<double>();
    return Predictor(*method, t);
  }
  if (*method == MethodId::SCH) return Predictor(*method, std::monostate{});

  LearnedModel lm;
  lm.schema = schema_from_json(j.at("schema"));
  if (lm.schema.include_expert != is_sch_variant(*method)) {
    throw InvalidConfig("model schema expert flag does not match its method");
  }
  auto check_width = [&](const RegressionTree& t) {
    if (t.feature_count != lm.schema.width()) throw WidthMismatch(lm.schema.width(), t.feature_count);
  };
  if (kind == "tree") {
    auto t = tree_from_json(model.at("tree"));
    check_width(t);
    lm.model = std::move(t);
  } else if (kind == "forest") {
    Forest f;
    for (const auto& tj : model.at("trees")) {
      f.trees.push_back(tree_from_json(tj));
      check_width(f.trees.back());
    }
    if (f.trees.empty()) throw DegenerateEnsemble("forest artifact has no trees");
    lm.model = std::move(f);
  } else if (kind == "boosted") {
    BoostedEnsemble e;
    for (const auto& mj : model.at("members")) {
      e.trees.push_back(tree_from_json(mj.at("tree")));
      check_width(e.trees.back());
      e.log_weights.push_back(mj.at("log_weight").get<double>());
    }
    if (e.trees.empty()) throw DegenerateEnsemble("boosted artifact has no members");
    lm.model = std::move(e);
  } else {
    throw InvalidConfig("unknown model kind '" + kind + "'");
  }
  return Predictor(*method, std::move(lm));
}

// ---------------------------------------------------------------------------
// Evaluation report

inline Json report_to_json(const EvaluationReport& rep) {
  Json j;
  j["metric"] = {{"p", rep.metric.p}, {"m", rep.metric.m}, {"M", rep.metric.M}};
  j["cv"] = {{"repeats", rep.repeats}, {"k", rep.k}, {"seed", rep.seed}, {"stratified", rep.stratified}};
  j["standard_error"] = {
      {"se", "sample standard deviation of the repeat x fold cell accuracies"},
      {"se_of_mean", "se / sqrt(n_cells)"},
      {"sd_repeat_means", "sample standard deviation of the per-repeat mean accuracies"}};
  Json methods = Json::array();
  for (auto m : rep.methods) methods.push_back(std::string(to_string(m)));
  j["methods"] = methods;
  j["rows"] = rep.rows;
  Json summary = Json::array();
  for (const auto& s : rep.summary) {
    summary.push_back(
        {{"procedure", s.procedure}, {"n", s.n}, {"mean_min", s.mean}, {"sd_min", s.sd}, {"sd_defined", s.sd_defined}});
  }
  j["summary"] = summary;
  Json acc = Json::array();
  for (std::size_t mi = 0; mi < rep.methods.size(); ++mi) {
    for (std::size_t ri = 0; ri < rep.rows.size(); ++ri) {
      const auto& a = rep.accuracy[mi][ri];
      acc.push_back({{"method", std::string(to_string(rep.methods[mi]))},
                     {"row", rep.rows[ri]},
                     {"mean", a.mean},
                     {"se", a.se},
                     {"se_of_mean", a.se_of_mean},
                     {"sd_repeat_means", a.sd_repeat_means},
                     {"n_cells", a.n_cells}});
    }
  }
  j["accuracy"] = acc;
  Json imp = Json::array();
  for (const auto& row : rep.importance) {
    Json features = Json::array();
    for (std::size_t i = 0; i < row.feature_names.size(); ++i) {
      features.push_back({{"name", row.feature_names[i]}, {"value", row.values[i]}});
    }
    Json grouped = Json::array();
    for (const auto& [name, v] : row.grouped) grouped.push_back({{"feature", name}, {"value", v}});
    imp.push_back({{"method", std::string(to_string(row.method))}, {"features", features}, {"grouped", grouped}});
  }
  j["importance"] = imp;
  return j;
}

/// Accuracy table: one line per row (Overall first) with N, mean, sd and a
/// mean/se column pair per method.
inline void write_accuracy_csv(std::ostream& out, const EvaluationReport& rep) {
  std::vector<std::string> header{"procedure", "N", "mean_min", "sd_min"};
  for (auto m : rep.methods) {
    header.push_back(std::string(to_string(m)));
    header.push_back(std::string(to_string(m)) + "_se");
  }
  csv::write_row(out, header);
  for (std::size_t ri = 0; ri < rep.rows.size(); ++ri) {
    const auto& s = rep.summary[ri];
    std::vector<std::string> row{rep.rows[ri], std::to_string(s.n), format_fixed(s.mean, 2), format_fixed(s.sd, 2)};
    for (std::size_t mi = 0; mi < rep.methods.size(); ++mi) {
      row.push_back(format_fixed(rep.accuracy[mi][ri].mean, 4));
      row.push_back(format_fixed(rep.accuracy[mi][ri].se, 4));
    }
    csv::write_row(out, row);
  }
}

/// Importance table grouped by source feature; "NA" where a method lacks
/// the feature.
inline void write_importance_csv(std::ostream& out, const EvaluationReport& rep) {
  std::vector<std::string> groups;
  for (const auto& row : rep.importance) {
    for (const auto& [g, v] : row.grouped) {
      if (std::find(groups.begin(), groups.end(), g) == groups.end()) groups.push_back(g);
    }
  }
  std::vector<std::string> header{"feature"};
  for (const auto& row : rep.importance) header.push_back(std::string(to_string(row.method)));
  csv::write_row(out, header);
  for (const auto& g : groups) {
    std::vector<std::string> line{g};
    for (const auto& row : rep.importance) {
      auto it = std::find_if(row.grouped.begin(), row.grouped.end(), [&](const auto& e) { return e.first == g; });
      line.push_back(it == row.grouped.end() ? "NA" : format_fixed(it->second, 4));
    }
    csv::write_row(out, line);
  }
}

}  // namespace surgtime
