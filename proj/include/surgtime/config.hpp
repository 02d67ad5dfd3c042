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

// Flat "key = value" run configuration shared by the CLI subcommands.
//
//   # comment
//   metric.p = 0.2
//   methods = AVG,SCH,RFR-SCH
//
// Unknown keys are rejected. See config_keys() for the full list.

#pragma once

#include <charconv>
#include <cstdint>
#include <functional>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "surgtime/errors.hpp"
#include "surgtime/format.hpp"
#include "surgtime/metric.hpp"
#include "surgtime/predictors.hpp"
#include "surgtime/serialize.hpp"
#include "surgtime/synth.hpp"

namespace surgtime {

struct CvSettings {
  std::size_t repeats = 5;
  std::size_t k = 5;
  std::uint64_t seed = 2017;
  bool stratify = true;
};

struct RunConfig {
  MetricParams metric;
  std::vector<MethodId> methods{kAllMethods.begin(), kAllMethods.end()};
  CvSettings cv;
  Hyperparams hp;
  std::size_t min_procedure_count = 40;
  std::size_t threads = 1;
  std::vector<double> p_grid = default_p_grid();
  std::size_t histogram_bins = 30;
  SynthConfig synth;

  void validate() const {
    metric.validate();
    if (methods.empty()) throw InvalidConfig("methods must not be empty");
    if (cv.repeats < 1) throw InvalidConfig("cv.repeats must be at least 1");
    if (cv.k < 2) throw InvalidConfig("cv.k must be at least 2");
    if (min_procedure_count < 1) throw InvalidConfig("min_procedure_count must be at least 1");
    if (threads < 1) throw InvalidConfig("threads must be at least 1");
    if (histogram_bins < 1) throw InvalidConfig("figures.bins must be at least 1");
    if (p_grid.empty()) throw InvalidConfig("sweep.p_grid must not be empty");
    for (double p : p_grid) {
      if (!(p > 0 && p < 1)) throw InvalidConfig("sweep.p_grid values must lie in (0, 1)");
    }
    hp.tree.validate();
    hp.forest.validate();
    hp.boost.validate();
    surgtime::validate(synth);
  }
};

namespace detail {

inline std::vector<std::string_view> split_list(std::string_view s) {
  std::vector<std::string_view> out;
  while (true) {
    auto comma = s.find(',');
    auto item = trim(s.substr(0, comma));
    if (!item.empty()) out.push_back(item);
    if (comma == std::string_view::npos) break;
    s.remove_prefix(comma + 1);
  }
  return out;
}

inline std::uint64_t parse_u64(std::string_view key, std::string_view v) {
  v = trim(v);
  std::uint64_t out = 0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc{} || res.ptr != v.data() + v.size()) {
    throw InvalidConfig(std::string(key) + ": expected a non-negative integer, got '" + std::string(v) + "'");
  }
  return out;
}

inline std::size_t parse_count(std::string_view key, std::string_view v) {
  return static_cast<std::size_t>(parse_u64(key, v));
}

inline double parse_real(std::string_view key, std::string_view v) {
  double out;
  if (!parse_double(v, out)) throw InvalidConfig(std::string(key) + ": expected a number, got '" + std::string(v) + "'");
  return out;
}

inline bool parse_flag(std::string_view key, std::string_view v) {
  const auto s = to_lower(trim(v));
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw InvalidConfig(std::string(key) + ": expected true/false, got '" + std::string(v) + "'");
}

inline std::optional<std::size_t> parse_optional_count(std::string_view key, std::string_view v, std::string_view none) {
  if (to_lower(trim(v)) == none) return std::nullopt;
  return parse_count(key, v);
}

inline std::vector<double> parse_reals(std::string_view key, std::string_view v) {
  std::vector<double> out;
  for (auto item : split_list(v)) out.push_back(parse_real(key, item));
  return out;
}

inline std::string join_reals(const std::vector<double>& v) {
  std::string out;
  for (double x : v) out += (out.empty() ? "" : ",") + format_double(x);
  return out;
}

struct ConfigKey {
  std::string_view name;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

}  // namespace detail

inline const std::vector<detail::ConfigKey>& config_keys() {
  using detail::ConfigKey;
  using namespace detail;
#define SURGTIME_REAL(key, expr)                                                     \
  ConfigKey{key, [](RunConfig& c, std::string_view v) { expr = parse_real(key, v); }, \
            [](const RunConfig& c) { return format_double(expr); }}
#define SURGTIME_COUNT(key, expr)                                                     \
  ConfigKey{key, [](RunConfig& c, std::string_view v) { expr = parse_count(key, v); }, \
            [](const RunConfig& c) { return std::to_string(expr); }}
#define SURGTIME_FLAG(key, expr)                                                     \
  ConfigKey{key, [](RunConfig& c, std::string_view v) { expr = parse_flag(key, v); }, \
            [](const RunConfig& c) { return std::string(expr ? "true" : "false"); }}
  static const std::vector<ConfigKey> keys{
      SURGTIME_REAL("metric.p", c.metric.p),
      SURGTIME_REAL("metric.m", c.metric.m),
      SURGTIME_REAL("metric.M", c.metric.M),
      ConfigKey{"methods",
                [](RunConfig& c, std::string_view v) {
                  c.methods.clear();
                  for (auto item : split_list(v)) {
                    auto m = parse_method(item);
                    if (!m) throw InvalidConfig("methods: unknown method '" + std::string(item) + "'");
                    c.methods.push_back(*m);
                  }
                },
                [](const RunConfig& c) {
                  std::string out;
                  for (auto m : c.methods) out += (out.empty() ? "" : ",") + std::string(to_string(m));
                  return out;
                }},
      SURGTIME_COUNT("cv.repeats", c.cv.repeats),
      SURGTIME_COUNT("cv.k", c.cv.k),
      ConfigKey{"cv.seed", [](RunConfig& c, std::string_view v) { c.cv.seed = parse_u64("cv.seed", v); },
                [](const RunConfig& c) { return std::to_string(c.cv.seed); }},
      SURGTIME_FLAG("cv.stratify", c.cv.stratify),
      ConfigKey{"tree.min_samples_split",
                [](RunConfig& c, std::string_view v) {
                  const auto n = parse_count("tree.min_samples_split", v);
                  c.hp.tree.min_samples_split = c.hp.forest.tree_params.min_samples_split =
                      c.hp.boost.tree_params.min_samples_split = n;
                },
                [](const RunConfig& c) { return std::to_string(c.hp.tree.min_samples_split); }},
      ConfigKey{"tree.min_samples_leaf",
                [](RunConfig& c, std::string_view v) {
                  const auto n = parse_count("tree.min_samples_leaf", v);
                  c.hp.tree.min_samples_leaf = c.hp.forest.tree_params.min_samples_leaf =
                      c.hp.boost.tree_params.min_samples_leaf = n;
                },
                [](const RunConfig& c) { return std::to_string(c.hp.tree.min_samples_leaf); }},
      ConfigKey{"tree.max_depth",
                [](RunConfig& c, std::string_view v) {
                  const auto d = parse_optional_count("tree.max_depth", v, "none");
                  c.hp.tree.max_depth = c.hp.forest.tree_params.max_depth = c.hp.boost.tree_params.max_depth = d;
                },
                [](const RunConfig& c) {
                  return c.hp.tree.max_depth ? std::to_string(*c.hp.tree.max_depth) : std::string("none");
                }},
      SURGTIME_COUNT("forest.n_trees", c.hp.forest.n_trees),
      SURGTIME_FLAG("forest.bootstrap", c.hp.forest.bootstrap),
      ConfigKey{"forest.max_features",
                [](RunConfig& c, std::string_view v) {
                  c.hp.forest.max_features = parse_optional_count("forest.max_features", v, "all");
                },
                [](const RunConfig& c) {
                  return c.hp.forest.max_features ? std::to_string(*c.hp.forest.max_features) : std::string("all");
                }},
      SURGTIME_COUNT("boost.n_estimators", c.hp.boost.n_estimators),
      ConfigKey{"boost.loss",
                [](RunConfig& c, std::string_view v) {
                  auto l = parse_boost_loss(v);
                  if (!l) throw InvalidConfig("boost.loss: expected linear, square or exponential");
                  c.hp.boost.loss_shape = *l;
                },
                [](const RunConfig& c) { return std::string(to_string(c.hp.boost.loss_shape)); }},
      SURGTIME_COUNT("min_procedure_count", c.min_procedure_count),
      SURGTIME_COUNT("threads", c.threads),
      ConfigKey{"sweep.p_grid", [](RunConfig& c, std::string_view v) { c.p_grid = parse_reals("sweep.p_grid", v); },
                [](const RunConfig& c) { return join_reals(c.p_grid); }},
      SURGTIME_COUNT("figures.bins", c.histogram_bins),
      SURGTIME_COUNT("synth.n_procedures", c.synth.n_procedures),
      SURGTIME_COUNT("synth.cases_per_procedure", c.synth.cases_per_procedure),
      SURGTIME_COUNT("synth.n_surgeons", c.synth.n_surgeons),
      SURGTIME_COUNT("synth.surgeons_per_procedure", c.synth.surgeons_per_procedure),
      SURGTIME_REAL("synth.log_noise_sigma", c.synth.log_noise_sigma),
      SURGTIME_REAL("synth.expert_noise_sigma", c.synth.expert_noise_sigma),
      SURGTIME_REAL("synth.expert_bias", c.synth.expert_bias),
      ConfigKey{"synth.procedure_base_logmeans",
                [](RunConfig& c, std::string_view v) {
                  c.synth.procedure_base_logmeans = parse_reals("synth.procedure_base_logmeans", v);
                },
                [](const RunConfig& c) { return join_reals(c.synth.procedure_base_logmeans); }},
      ConfigKey{"synth.surgeon_offsets",
                [](RunConfig& c, std::string_view v) { c.synth.surgeon_offsets = parse_reals("synth.surgeon_offsets", v); },
                [](const RunConfig& c) { return join_reals(c.synth.surgeon_offsets); }},
      SURGTIME_REAL("synth.surgeon_offset_sd", c.synth.surgeon_offset_sd),
      SURGTIME_REAL("synth.location_offset", c.synth.location_offset),
      SURGTIME_REAL("synth.class_offset", c.synth.class_offset),
      SURGTIME_REAL("synth.weight_coefficient", c.synth.weight_coefficient),
      SURGTIME_REAL("synth.target_weight_age_corr", c.synth.target_weight_age_corr),
      SURGTIME_REAL("synth.or_probability", c.synth.or_probability),
      SURGTIME_REAL("synth.inpatient_probability", c.synth.inpatient_probability),
      ConfigKey{"synth.seed", [](RunConfig& c, std::string_view v) { c.synth.seed = parse_u64("synth.seed", v); },
                [](const RunConfig& c) { return std::to_string(c.synth.seed); }},
  };
#undef SURGTIME_REAL
#undef SURGTIME_COUNT
#undef SURGTIME_FLAG
  return keys;
}

inline void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value) {
  key = trim(key);
  for (const auto& k : config_keys()) {
    if (k.name == key) {
      k.set(cfg, trim(value));
      return;
    }
  }
  throw InvalidConfig("unknown config key '" + std::string(key) + "'");
}

/// Applies every "key = value" line of `in` on top of `cfg`.
inline void parse_config_into(RunConfig& cfg, std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view s = line;
    if (auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
    s = trim(s);
    if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string_view::npos) {
      throw InvalidConfig("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    try {
      apply_setting(cfg, s.substr(0, eq), s.substr(eq + 1));
    } catch (const InvalidConfig& e) {
      throw InvalidConfig("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

inline RunConfig parse_config(std::istream& in) {
  RunConfig cfg;
  parse_config_into(cfg, in);
  return cfg;
}

/// Every key with its current value, in config_keys() order.
inline std::string to_text(const RunConfig& cfg) {
  std::ostringstream out;
  for (const auto& k : config_keys()) out << k.name << " = " << k.get(cfg) << '\n';
  return out.str();
}

}  // namespace surgtime
