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

// Command-line front end. run() is the whole program; tools/surgtime.cpp
// only forwards argv.
//
// Exit status: 0 success, 1 validation or data failure, 2 usage error.

#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "surgtime/config.hpp"
#include "surgtime/data_model.hpp"
#include "surgtime/evaluation.hpp"
#include "surgtime/metric.hpp"
#include "surgtime/predictors.hpp"
#include "surgtime/serialize.hpp"
#include "surgtime/synth.hpp"

namespace surgtime::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 1;
inline constexpr int kExitUsage = 2;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

namespace fs = std::filesystem;

inline std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "' for reading");
  return in;
}

inline std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  return out;
}

inline void write_file(const fs::path& path, const std::string& content) {
  auto out = open_out(path);
  out << content;
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

inline Dataset load_csv(const std::string& path, const CsvOptions& opts = {}) {
  auto in = open_in(path);
  try {
    return load_dataset(in, opts);
  } catch (const Error& e) {
    throw Error(path + ": " + e.what());
  }
}

/// Options shared by every subcommand that reads a RunConfig.
struct Common {
  std::string config_path;
  std::vector<std::string> sets;
  std::string input;
  bool synthetic = false;

  std::optional<double> p, m, M;
  std::optional<std::string> methods;
  std::optional<std::size_t> repeats, k, threads, min_count;
  std::optional<std::uint64_t> seed;
  bool no_stratify = false;
};

inline void add_config_flags(CLI::App* app, Common& c) {
  app->add_option("--config", c.config_path, "Run configuration file (key = value lines)");
  app->add_option("--set", c.sets, "Override one config key, as key=value (repeatable)");
}

inline void add_input_flags(CLI::App* app, Common& c) {
  app->add_option("--input", c.input, "Input cases CSV");
  app->add_flag("--synthetic", c.synthetic, "Use the built-in synthetic generator instead of --input");
}

inline void add_metric_flags(CLI::App* app, Common& c) {
  app->add_option("--p", c.p, "Tolerance fraction p");
  app->add_option("--m", c.m, "Tolerance floor m (minutes)");
  app->add_option("--M", c.M, "Tolerance cap M (minutes)");
}

inline void add_cv_flags(CLI::App* app, Common& c) {
  app->add_option("--methods", c.methods, "Comma-separated methods (AVG,SCH,DTR,RFR,ABR,DTR-SCH,RFR-SCH,ABR-SCH)");
  app->add_option("--repeats", c.repeats, "Cross-validation repeats");
  app->add_option("--k", c.k, "Folds per repeat");
  app->add_option("--seed", c.seed, "Cross-validation seed");
  app->add_flag("--no-stratify", c.no_stratify, "Draw folds from the pooled set instead of per procedure");
  app->add_option("--threads", c.threads, "Worker threads for cross-validation cells");
  app->add_option("--min-procedure-count", c.min_count, "Drop procedures with fewer cases");
}

/// Defaults, then the config file, then --set, then explicit flags.
inline RunConfig resolve_config(const Common& c) {
  RunConfig cfg;
  if (!c.config_path.empty()) {
    auto in = open_in(c.config_path);
    try {
      parse_config_into(cfg, in);
    } catch (const InvalidConfig& e) {
      throw InvalidConfig(c.config_path + ": " + e.what());
    }
  }
  for (const auto& kv : c.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + kv + "'");
    apply_setting(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (c.p) cfg.metric.p = *c.p;
  if (c.m) cfg.metric.m = *c.m;
  if (c.M) cfg.metric.M = *c.M;
  if (c.methods) apply_setting(cfg, "methods", *c.methods);
  if (c.repeats) cfg.cv.repeats = *c.repeats;
  if (c.k) cfg.cv.k = *c.k;
  if (c.seed) cfg.cv.seed = *c.seed;
  if (c.no_stratify) cfg.cv.stratify = false;
  if (c.threads) cfg.threads = *c.threads;
  if (c.min_count) cfg.min_procedure_count = *c.min_count;
  cfg.validate();
  return cfg;
}

inline Dataset resolve_dataset(const Common& c, const RunConfig& cfg) {
  if (c.synthetic == !c.input.empty()) throw UsageError("exactly one of --input or --synthetic is required");
  Dataset ds = c.synthetic ? synth_generate(cfg.synth).dataset : load_csv(c.input);
  return filter_min_count(ds, cfg.min_procedure_count);
}

inline CvResult run_cv(const Dataset& ds, const RunConfig& cfg) {
  const auto plan = make_folds(ds, cfg.cv.repeats, cfg.cv.k, cfg.cv.seed, cfg.cv.stratify);
  return cross_validate(ds, cfg.methods, plan, cfg.metric, cfg.hp, cfg.threads);
}

inline std::string dump(const Json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------------------

inline int cmd_validate(const std::string& path, bool allow_missing, std::ostream& out, std::ostream& err) {
  auto in = open_in(path);
  csv::Reader reader(in);
  std::size_t rows = 0, errors = 0;
  auto report = [&](const std::string& msg) {
    ++errors;
    err << path << ": " << msg << "\n";
  };
  auto header = reader.next();
  std::vector<std::string> want(kCsvColumns.begin(), kCsvColumns.end());
  if (!header || header->fields != want) {
    report("line 1: header must be exactly the 11 schema columns");
  } else {
    CsvOptions opts{allow_missing};
    std::unordered_map<std::string, std::size_t> seen;
    while (true) {
      std::optional<csv::Record> rec;
      try {
        rec = reader.next();
      } catch (const Error& e) {
        report(e.what());
        break;
      }
      if (!rec) break;
      ++rows;
      try {
        auto c = parse_case_row(rec->fields, rec->line_no, opts);
        auto [it, fresh] = seen.emplace(c.case_id, rec->line_no);
        if (!fresh) {
          throw DuplicateId("case_id '" + c.case_id + "' already used on line " + std::to_string(it->second),
                            rec->line_no);
        }
      } catch (const Error& e) {
        report(e.what());
      }
    }
  }
  out << "rows: " << rows << "\nerrors: " << errors << "\n";
  return errors == 0 ? kExitOk : kExitInvalid;
}

inline int cmd_synth(const Common& c, const std::string& output, std::string truth, std::optional<std::uint64_t> seed,
                     std::ostream& out) {
  RunConfig cfg = resolve_config(c);
  if (seed) cfg.synth.seed = *seed;
  const auto res = synth_generate(cfg.synth);
  std::ostringstream data;
  write_dataset(data, res.dataset);
  write_file(output, data.str());
  if (truth.empty()) truth = output + ".truth.csv";
  std::ostringstream t;
  csv::write_row(t, {"case_id", "true_log_duration", "true_median_min"});
  for (std::size_t i = 0; i < res.dataset.size(); ++i) {
    csv::write_row(t, {res.dataset[i].case_id, format_double(res.true_log_duration[i]),
                       format_double(std::exp(res.true_log_duration[i]))});
  }
  write_file(truth, t.str());
  out << "wrote " << res.dataset.size() << " cases to " << output << " (ground truth: " << truth << ")\n";
  return kExitOk;
}

inline int cmd_train(const Common& c, const std::string& method_name, const std::string& output,
                     std::optional<std::uint64_t> seed, std::ostream& out) {
  const RunConfig cfg = resolve_config(c);
  const auto method = parse_method(method_name);
  if (!method) throw UsageError("--method: unknown method '" + method_name + "'");
  Dataset ds;
  if (c.synthetic == !c.input.empty()) throw UsageError("exactly one of --input or --synthetic is required");
  ds = c.synthetic ? synth_generate(cfg.synth).dataset : load_csv(c.input);
  if (c.min_count) ds = filter_min_count(ds, *c.min_count);
  const auto pred = fit(*method, ds, cfg.hp, seed.value_or(cfg.cv.seed));
  write_file(output, dump(predictor_to_json(pred, &cfg.hp)));
  out << "trained " << to_string(*method) << " on " << ds.size() << " cases -> " << output << "\n";
  return kExitOk;
}

inline int cmd_predict(const std::string& model_path, const std::string& input, const std::string& output,
                       std::ostream& out, std::ostream& err) {
  auto min = open_in(model_path);
  Json j;
  try {
    j = Json::parse(min);
  } catch (const std::exception& e) {
    throw Error(model_path + ": not valid JSON: " + e.what());
  }
  Predictor pred = [&] {
    try {
      return predictor_from_json(j);
    } catch (const Error& e) {
      throw Error(model_path + ": " + e.what());
    } catch (const Json::exception& e) {
      throw Error(model_path + ": malformed model artifact: " + e.what());
    }
  }();
  const Dataset ds = load_csv(input, CsvOptions{true});
  if (needs_expert(pred.method())) {
    std::size_t missing = 0;
    for (const auto& c : ds) {
      if (!c.has_expert()) {
        if (++missing <= 10) err << input << ": case '" << c.case_id << "' lacks expert_prediction_min\n";
      }
    }
    if (missing) {
      err << input << ": " << missing << " case(s) lack the expert prediction required by "
          << to_string(pred.method()) << "\n";
      return kExitInvalid;
    }
  }
  std::ostringstream csvout;
  csv::write_row(csvout, {"case_id", "predicted_min"});
  for (const auto& c : ds) csv::write_row(csvout, {c.case_id, format_double(pred.predict(c))});
  write_file(output, csvout.str());
  out << "wrote " << ds.size() << " predictions to " << output << "\n";
  return kExitOk;
}

inline int cmd_evaluate(const Common& c, const std::string& out_dir, std::ostream& out) {
  const RunConfig cfg = resolve_config(c);
  const Dataset ds = resolve_dataset(c, cfg);
  const auto cv = run_cv(ds, cfg);
  const fs::path dir(out_dir);
  write_file(dir / "report.json", dump(report_to_json(cv.report)));
  std::ostringstream acc, imp;
  write_accuracy_csv(acc, cv.report);
  write_importance_csv(imp, cv.report);
  write_file(dir / "accuracy.csv", acc.str());
  write_file(dir / "importance.csv", imp.str());
  write_file(dir / "config.txt", to_text(cfg));
  out << "evaluated " << cv.report.methods.size() << " methods on " << ds.size() << " cases ("
      << cv.report.repeats << "x" << cv.report.k << "-fold); overall accuracy:\n";
  for (std::size_t mi = 0; mi < cv.report.methods.size(); ++mi) {
    const auto& a = cv.report.accuracy[mi][0];
    out << "  " << to_string(cv.report.methods[mi]) << "  " << format_fixed(a.mean, 4) << " ("
        << format_fixed(a.se, 4) << ")\n";
  }
  out << "wrote " << (dir / "report.json").string() << ", accuracy.csv, importance.csv\n";
  return kExitOk;
}

inline int cmd_sweep(const Common& c, const std::string& output, std::ostream& out) {
  const RunConfig cfg = resolve_config(c);
  const Dataset ds = resolve_dataset(c, cfg);
  const auto cv = run_cv(ds, cfg);
  auto grid = cfg.p_grid;
  std::sort(grid.begin(), grid.end());
  const auto curves = sweep_cv(cv, grid, cfg.metric.m, cfg.metric.M);
  std::ostringstream s;
  std::vector<std::string> header{"p"};
  for (auto m : cv.report.methods) header.push_back("accuracy_" + std::string(to_string(m)));
  csv::write_row(s, header);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    std::vector<std::string> row{format_double(grid[g])};
    for (const auto& curve : curves) row.push_back(format_double(curve[g]));
    csv::write_row(s, row);
  }
  write_file(output, s.str());
  out << "wrote " << grid.size() << " grid points (m=" << format_double(cfg.metric.m)
      << ", M=" << format_double(cfg.metric.M) << ") to " << output << "\n";
  return kExitOk;
}

inline int cmd_figures(const Common& c, const std::string& out_dir, std::ostream& out) {
  const RunConfig cfg = resolve_config(c);
  const Dataset ds = resolve_dataset(c, cfg);
  if (ds.empty()) throw EmptyInput("no cases left after filtering");
  const fs::path dir(out_dir);
  std::vector<double> durations, weights, ages;
  for (const auto& cs : ds) {
    durations.push_back(cs.actual_duration_min);
    weights.push_back(cs.weight_kg);
    ages.push_back(cs.age_years);
  }
  auto hist = [&](bool log_scale) {
    std::ostringstream s;
    csv::write_row(s, {"bin_low", "bin_high", "count"});
    for (const auto& b : histogram_data(durations, cfg.histogram_bins, log_scale)) {
      csv::write_row(s, {format_double(b.low), format_double(b.high), std::to_string(b.count)});
    }
    return s.str();
  };
  write_file(dir / "histogram_raw.csv", hist(false));
  write_file(dir / "histogram_log.csv", hist(true));

  std::ostringstream scatter;
  csv::write_row(scatter, {"case_id", "age_years", "weight_kg"});
  for (const auto& cs : ds) csv::write_row(scatter, {cs.case_id, format_double(cs.age_years), format_double(cs.weight_kg)});
  write_file(dir / "weight_age.csv", scatter.str());
  const auto fit_line = ols_fit(ages, weights);
  std::ostringstream fitcsv;
  csv::write_row(fitcsv, {"slope", "intercept", "pearson"});
  csv::write_row(fitcsv, {format_double(fit_line.slope), format_double(fit_line.intercept),
                          format_double(pearson(weights, ages))});
  write_file(dir / "weight_age_fit.csv", fitcsv.str());

  std::ostringstream tau;
  csv::write_row(tau, {"predicted_min", "tau_min"});
  for (int y = 1; y <= 400; ++y) {
    csv::write_row(tau, {std::to_string(y), format_double(tolerance(y, cfg.metric))});
  }
  write_file(dir / "tau_curve.csv", tau.str());
  out << "wrote figure data for " << ds.size() << " cases to " << dir.string() << "\n";
  return kExitOk;
}

}  // namespace detail

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"surgtime: surgical case duration prediction and evaluation"};
  app.require_subcommand(1);
  detail::Common common;

  auto* validate = app.add_subcommand("validate", "Schema-check a cases CSV");
  std::string validate_path;
  bool allow_missing = false;
  validate->add_option("--input", validate_path, "Cases CSV")->required();
  validate->add_flag("--allow-missing-outcomes", allow_missing, "Accept empty expert/actual fields");

  auto* synth = app.add_subcommand("synth", "Write a synthetic cases CSV and its ground truth");
  std::string synth_out, synth_truth;
  std::optional<std::uint64_t> synth_seed;
  detail::add_config_flags(synth, common);
  synth->add_option("--output", synth_out, "Output CSV")->required();
  synth->add_option("--truth", synth_truth, "Ground-truth sidecar CSV (default: <output>.truth.csv)");
  synth->add_option("--seed", synth_seed, "Generator seed");

  auto* train = app.add_subcommand("train", "Fit one method and write a model artifact");
  std::string method_name, model_out;
  std::optional<std::uint64_t> train_seed;
  detail::add_config_flags(train, common);
  detail::add_input_flags(train, common);
  train->add_option("--method", method_name, "Method to fit")->required();
  train->add_option("--output", model_out, "Model artifact (JSON)")->required();
  train->add_option("--seed", train_seed, "Seed for randomized learners");
  train->add_option("--min-procedure-count", common.min_count, "Drop procedures with fewer cases");

  auto* predict = app.add_subcommand("predict", "Apply a model artifact to a cases CSV");
  std::string model_in, predict_in, predict_out;
  predict->add_option("--model", model_in, "Model artifact")->required();
  predict->add_option("--input", predict_in, "Cases CSV (outcome columns may be empty)")->required();
  predict->add_option("--output", predict_out, "Predictions CSV")->required();

  auto* evaluate = app.add_subcommand("evaluate", "Repeated k-fold evaluation of the methods");
  std::string eval_dir;
  detail::add_config_flags(evaluate, common);
  detail::add_input_flags(evaluate, common);
  detail::add_metric_flags(evaluate, common);
  detail::add_cv_flags(evaluate, common);
  evaluate->add_option("--output-dir", eval_dir, "Directory for report.json, accuracy.csv, importance.csv")->required();

  auto* sweep = app.add_subcommand("sweep", "Cross-validated accuracy as p varies with m and M fixed");
  std::string sweep_out;
  std::optional<std::string> p_grid;
  detail::add_config_flags(sweep, common);
  detail::add_input_flags(sweep, common);
  detail::add_metric_flags(sweep, common);
  detail::add_cv_flags(sweep, common);
  sweep->add_option("--p-grid", p_grid, "Comma-separated p values (default 0.05..0.50 step 0.05)");
  sweep->add_option("--output", sweep_out, "Sweep CSV")->required();

  auto* figures = app.add_subcommand("figures", "Write histogram, weight-age and tolerance-curve data");
  std::string fig_dir;
  std::optional<std::size_t> bins;
  detail::add_config_flags(figures, common);
  detail::add_input_flags(figures, common);
  detail::add_metric_flags(figures, common);
  figures->add_option("--bins", bins, "Histogram bins");
  figures->add_option("--min-procedure-count", common.min_count, "Drop procedures with fewer cases");
  figures->add_option("--output-dir", fig_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (*validate) return detail::cmd_validate(validate_path, allow_missing, out, err);
    if (*synth) return detail::cmd_synth(common, synth_out, synth_truth, synth_seed, out);
    if (*train) return detail::cmd_train(common, method_name, model_out, train_seed, out);
    if (*predict) return detail::cmd_predict(model_in, predict_in, predict_out, out, err);
    if (*evaluate) return detail::cmd_evaluate(common, eval_dir, out);
    if (*sweep) {
      if (p_grid) common.sets.push_back("sweep.p_grid=" + *p_grid);
      return detail::cmd_sweep(common, sweep_out, out);
    }
    if (*figures) {
      if (bins) common.sets.push_back("figures.bins=" + std::to_string(*bins));
      return detail::cmd_figures(common, fig_dir, out);
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  }
  return kExitUsage;
}

}  // namespace surgtime::cli
