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

// Repeated stratified k-fold cross-validation and descriptive statistics.

#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <map>
#include <mutex>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "surgtime/data_model.hpp"
#include "surgtime/ensembles.hpp"
#include "surgtime/errors.hpp"
#include "surgtime/metric.hpp"
#include "surgtime/predictors.hpp"

namespace surgtime {

inline constexpr std::string_view kOverallRow = "Overall";

/// splitmix64 step; used to derive independent seeds from a base seed.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) {
  return mix_seed(mix_seed(mix_seed(mix_seed(base) ^ a) ^ b) ^ c);
}

// ---------------------------------------------------------------------------
// Fold assignment

struct FoldPlan {
  std::size_t repeats = 5;
  std::size_t k = 5;
  std::uint64_t seed = 0;
  bool stratified = true;
  std::vector<std::string> case_ids;                 // dataset order
  std::vector<std::vector<std::size_t>> assignment;  // [repeat][case index] -> fold

  std::size_t fold_of(std::size_t repeat, std::string_view case_id) const {
    auto it = std::find(case_ids.begin(), case_ids.end(), case_id);
    if (it == case_ids.end()) throw DomainViolation("case '" + std::string(case_id) + "' is not in the fold plan");
    return assignment.at(repeat)[static_cast<std::size_t>(it - case_ids.begin())];
  }

  std::vector<std::size_t> test_indices(std::size_t repeat, std::size_t fold) const {
    std::vector<std::size_t> out;
    const auto& a = assignment.at(repeat);
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i] == fold) out.push_back(i);
    }
    return out;
  }

  std::vector<std::size_t> train_indices(std::size_t repeat, std::size_t fold) const {
    std::vector<std::size_t> out;
    const auto& a = assignment.at(repeat);
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i] != fold) out.push_back(i);
    }
    return out;
  }
};

/// Per repeat: shuffle each procedure stratum (strata in name order) and deal
/// its cases round-robin into k folds. The dealing position carries across
/// strata so overall fold sizes also differ by at most one. With
/// stratified=false the whole dataset is one stratum.
inline FoldPlan make_folds(const Dataset& ds, std::size_t repeats, std::size_t k, std::uint64_t seed,
                           bool stratified = true) {
  if (repeats < 1) throw InvalidConfig("repeats must be at least 1");
  if (k < 2) throw InvalidConfig("k must be at least 2");
  std::map<std::string, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    strata[stratified ? ds[i].procedure_name : std::string(kOverallRow)].push_back(i);
  }
  if (strata.empty()) throw StratumTooSmall(std::string(kOverallRow), 0, k);
  for (const auto& [name, members] : strata) {
    if (members.size() < k) throw StratumTooSmall(name, members.size(), k);
  }
  FoldPlan plan;
  plan.repeats = repeats;
  plan.k = k;
  plan.seed = seed;
  plan.stratified = stratified;
  for (const auto& c : ds) plan.case_ids.push_back(c.case_id);
  plan.assignment.assign(repeats, std::vector<std::size_t>(ds.size(), 0));
  for (std::size_t r = 0; r < repeats; ++r) {
    std::mt19937_64 rng(derive_seed(seed, r));
    std::size_t deal = 0;
    for (const auto& [name, members] : strata) {
      auto shuffled = members;
      std::shuffle(shuffled.begin(), shuffled.end(), rng);
      for (auto i : shuffled) plan.assignment[r][i] = deal++ % k;
    }
  }
  return plan;
}

// ---------------------------------------------------------------------------
// Descriptive statistics

inline double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Sample standard deviation (n - 1 denominator); 0 for fewer than 2 values.
inline double sample_sd(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double mu = mean_of(v);
  double ss = 0;
  for (double x : v) ss += (x - mu) * (x - mu);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

/// Moment skewness g1 = m3 / m2^(3/2).
inline double sample_skewness(std::span<const double> v) {
  if (v.size() < 2) throw DegenerateInput("skewness needs at least 2 values");
  const double mu = mean_of(v);
  double m2 = 0, m3 = 0;
  for (double x : v) {
    const double d = x - mu;
    m2 += d * d;
    m3 += d * d * d;
  }
  m2 /= static_cast<double>(v.size());
  m3 /= static_cast<double>(v.size());
  if (!(m2 > 0)) throw DegenerateInput("skewness of a constant sample");
  return m3 / std::pow(m2, 1.5);
}

namespace detail {

struct Moments {
  double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
};

inline Moments centered_moments(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size() || xs.size() < 2) throw DegenerateInput("need two equal-length samples of size >= 2");
  Moments m;
  m.mx = mean_of(xs);
  m.my = mean_of(ys);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - m.mx, dy = ys[i] - m.my;
    m.sxx += dx * dx;
    m.syy += dy * dy;
    m.sxy += dx * dy;
  }
  return m;
}

}  // namespace detail

inline double pearson(std::span<const double> xs, std::span<const double> ys) {
  const auto m = detail::centered_moments(xs, ys);
  if (!(m.sxx > 0) || !(m.syy > 0)) throw DegenerateInput("pearson correlation of a constant sample");
  return std::clamp(m.sxy / std::sqrt(m.sxx * m.syy), -1.0, 1.0);
}

struct LineFit {
  double slope = 0;
  double intercept = 0;
};

inline LineFit ols_fit(std::span<const double> xs, std::span<const double> ys) {
  const auto m = detail::centered_moments(xs, ys);
  if (!(m.sxx > 0)) throw DegenerateInput("least squares with constant x");
  LineFit f;
  f.slope = m.sxy / m.sxx;
  f.intercept = m.my - f.slope * m.mx;
  return f;
}

struct HistogramBin {
  double low = 0;
  double high = 0;
  std::size_t count = 0;
};

/// Equal-width bins over [min, max] of the values (natural log of them when
/// log_scale). Bins are [low, high) except the last, which is closed. A
/// sample with zero range yields one bin holding everything.
inline std::vector<HistogramBin> histogram_data(std::span<const double> values, std::size_t bins, bool log_scale) {
  if (values.empty()) throw EmptyInput("histogram of no values");
  if (bins < 1) throw InvalidConfig("histogram needs at least one bin");
  std::vector<double> v;
  v.reserve(values.size());
  for (double x : values) v.push_back(log_scale ? log_duration(x) : x);
  const auto [lo_it, hi_it] = std::minmax_element(v.begin(), v.end());
  const double lo = *lo_it, hi = *hi_it;
  if (!(hi > lo)) return {{lo, hi, v.size()}};
  const double width = (hi - lo) / static_cast<double>(bins);
  std::vector<HistogramBin> out(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    out[b].low = lo + width * static_cast<double>(b);
    out[b].high = b + 1 == bins ? hi : lo + width * static_cast<double>(b + 1);
  }
  for (double x : v) {
    auto b = static_cast<std::size_t>(std::floor((x - lo) / width));
    b = std::min(b, bins - 1);
    // Keep the bin choice consistent with the published edges.
    while (b > 0 && x < out[b].low) --b;
    while (b + 1 < bins && x >= out[b + 1].low) ++b;
    ++out[b].count;
  }
  return out;
}

struct ProcedureSummary {
  std::string procedure;  // kOverallRow for the pooled row
  std::size_t n = 0;
  double mean = 0;        // minutes
  double sd = 0;          // minutes, n - 1 denominator
  bool sd_defined = true; // false for a single case, where sd is reported as 0
};

/// Overall row first, then procedures by name.
inline std::vector<ProcedureSummary> summarize(const Dataset& ds) {
  if (ds.empty()) throw EmptyInput("summary of an empty dataset");
  std::map<std::string, std::vector<double>> by_proc;
  std::vector<double> all;
  for (const auto& c : ds) {
    by_proc[c.procedure_name].push_back(c.actual_duration_min);
    all.push_back(c.actual_duration_min);
  }
  auto row = [](std::string name, const std::vector<double>& v) {
    return ProcedureSummary{std::move(name), v.size(), mean_of(v), sample_sd(v), v.size() >= 2};
  };
  std::vector<ProcedureSummary> out{row(std::string(kOverallRow), all)};
  for (const auto& [name, v] : by_proc) out.push_back(row(name, v));
  return out;
}

// ---------------------------------------------------------------------------
// Cross-validation

struct AccuracyStat {
  double mean = 0;
  double se = 0;               // sample sd of the cell accuracies
  double se_of_mean = 0;       // se / sqrt(n_cells)
  double sd_repeat_means = 0;  // sample sd of the per-repeat mean accuracies
  std::size_t n_cells = 0;
};

struct ImportanceRow {
  MethodId method = MethodId::DTR;
  std::vector<std::string> feature_names;
  std::vector<double> values;
  std::vector<std::pair<std::string, double>> grouped;  // summed per source feature
};

struct EvaluationReport {
  MetricParams metric;
  std::size_t repeats = 0;
  std::size_t k = 0;
  std::uint64_t seed = 0;
  bool stratified = true;
  std::vector<MethodId> methods;
  std::vector<std::string> rows;                 // kOverallRow, then procedures by name
  std::vector<std::vector<AccuracyStat>> accuracy;  // [method][row]
  std::vector<ProcedureSummary> summary;         // aligned with rows
  std::vector<ImportanceRow> importance;         // learned methods, in `methods` order
};

/// Outcome of one method in one repeat x fold cell.
struct CellMethodResult {
  std::vector<PredictionPair> pairs;         // in-fold cases, dataset order
  std::vector<std::string> feature_names;    // learned methods only
  std::vector<double> importance;            // learned methods only
};

struct CvCell {
  std::size_t repeat = 0;
  std::size_t fold = 0;
  std::vector<CellMethodResult> methods;  // aligned with the requested methods
};

struct CvResult {
  EvaluationReport report;
  std::vector<CvCell> cells;  // repeat-major
};

namespace detail {

inline CvCell run_cell(const Dataset& ds, std::span<const MethodId> methods, const FoldPlan& plan, std::size_t r,
                       std::size_t f, const Hyperparams& hp) {
  CvCell cell;
  cell.repeat = r;
  cell.fold = f;
  Dataset train, test;
  train.provenance = test.provenance = ds.provenance;
  for (auto i : plan.train_indices(r, f)) train.cases.push_back(ds[i]);
  for (auto i : plan.test_indices(r, f)) test.cases.push_back(ds[i]);
  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    const MethodId m = methods[mi];
    try {
      const auto pred = fit(m, train, hp, derive_seed(plan.seed, r, f, static_cast<std::uint64_t>(m) + 1));
      CellMethodResult res;
      res.pairs = predict_batch(pred, test.cases);
      if (const auto* lm = pred.learned()) {
        res.feature_names = lm->schema.feature_names;
        res.importance = lm->importance();
      }
      cell.methods.push_back(std::move(res));
    } catch (const Error& e) {
      throw Error("repeat " + std::to_string(r) + ", fold " + std::to_string(f) + ", method " +
                  std::string(to_string(m)) + ": " + e.what());
    }
  }
  return cell;
}

inline AccuracyStat accuracy_stat(const std::vector<std::pair<std::size_t, double>>& by_cell, std::size_t repeats) {
  // by_cell holds (repeat, accuracy) for each cell that had test cases.
  AccuracyStat s;
  std::vector<double> acc;
  std::vector<std::vector<double>> per_repeat(repeats);
  for (const auto& [r, a] : by_cell) {
    acc.push_back(a);
    per_repeat[r].push_back(a);
  }
  s.n_cells = acc.size();
  if (acc.empty()) return s;
  s.mean = mean_of(acc);
  s.se = sample_sd(acc);
  s.se_of_mean = s.se / std::sqrt(static_cast<double>(acc.size()));
  std::vector<double> repeat_means;
  for (const auto& v : per_repeat) {
    if (!v.empty()) repeat_means.push_back(mean_of(v));
  }
  s.sd_repeat_means = sample_sd(repeat_means);
  return s;
}

}  // namespace detail

/// Mean accuracy per (method, row) across the cells of `cells`, where
/// `row` is a procedure name or kOverallRow.
inline double cell_accuracy(const CellMethodResult& res, std::string_view row, const MetricParams& metric,
                            bool* present = nullptr) {
  std::vector<PredictionPair> subset;
  std::span<const PredictionPair> view = res.pairs;
  if (row != kOverallRow) {
    for (const auto& pr : res.pairs) {
      if (pr.procedure_name == row) subset.push_back(pr);
    }
    view = subset;
  }
  if (present) *present = !view.empty();
  return view.empty() ? 0.0 : accuracy(view, metric);
}

/// Builds the report from per-cell results.
inline EvaluationReport assemble_report(const Dataset& ds, std::span<const MethodId> methods, const FoldPlan& plan,
                                        const MetricParams& metric, std::span<const CvCell> cells) {
  EvaluationReport rep;
  rep.metric = metric;
  rep.repeats = plan.repeats;
  rep.k = plan.k;
  rep.seed = plan.seed;
  rep.stratified = plan.stratified;
  rep.methods.assign(methods.begin(), methods.end());
  rep.summary = summarize(ds);
  for (const auto& s : rep.summary) rep.rows.push_back(s.procedure);

  rep.accuracy.assign(methods.size(), {});
  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    for (const auto& row : rep.rows) {
      std::vector<std::pair<std::size_t, double>> by_cell;
      for (const auto& cell : cells) {
        bool present = false;
        const double a = cell_accuracy(cell.methods[mi], row, metric, &present);
        if (present) by_cell.emplace_back(cell.repeat, a);
      }
      rep.accuracy[mi].push_back(detail::accuracy_stat(by_cell, plan.repeats));
    }
  }

  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    if (!is_learned(methods[mi])) continue;
    ImportanceRow row;
    row.method = methods[mi];
    row.feature_names = build_schema(ds, is_sch_variant(methods[mi])).feature_names;
    std::map<std::string, double> sum;
    for (const auto& cell : cells) {
      const auto& res = cell.methods[mi];
      for (std::size_t j = 0; j < res.feature_names.size(); ++j) sum[res.feature_names[j]] += res.importance[j];
    }
    for (const auto& name : row.feature_names) {
      row.values.push_back(cells.empty() ? 0.0 : sum[name] / static_cast<double>(cells.size()));
    }
    detail::renormalize(row.values);
    for (std::size_t j = 0; j < row.feature_names.size(); ++j) {
      const auto group = feature_group(row.feature_names[j]);
      auto it = std::find_if(row.grouped.begin(), row.grouped.end(), [&](const auto& g) { return g.first == group; });
      if (it == row.grouped.end()) {
        row.grouped.emplace_back(group, row.values[j]);
      } else {
        it->second += row.values[j];
      }
    }
    rep.importance.push_back(std::move(row));
  }
  return rep;
}

/// Fits every method in every repeat x fold cell of `plan` and scores the
/// held-out fold. Cells may run on `threads` workers; results do not depend
/// on the thread count.
inline CvResult cross_validate(const Dataset& ds, std::span<const MethodId> methods, const FoldPlan& plan,
                               const MetricParams& metric, const Hyperparams& hp, std::size_t threads = 1) {
  metric.validate();
  if (methods.empty()) throw InvalidConfig("no methods to evaluate");
  if (plan.case_ids.size() != ds.size()) throw InvalidConfig("fold plan was built on a different dataset");
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (plan.case_ids[i] != ds[i].case_id) throw InvalidConfig("fold plan was built on a different dataset");
  }
  const std::size_t n_cells = plan.repeats * plan.k;
  std::vector<CvCell> cells(n_cells);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    while (true) {
      const std::size_t c = next.fetch_add(1);
      if (c >= n_cells) return;
      try {
        cells[c] = detail::run_cell(ds, methods, plan, c / plan.k, c % plan.k, hp);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next = n_cells;
      }
    }
  };
  threads = std::clamp<std::size_t>(threads, 1, n_cells);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  CvResult out;
  out.report = assemble_report(ds, methods, plan, metric, cells);
  out.cells = std::move(cells);
  return out;
}

/// Cross-validated accuracy curve: for each p, the mean over cells of the
/// overall accuracy with m and M fixed. Result is [method][grid point].
inline std::vector<std::vector<double>> sweep_cv(const CvResult& cv, std::vector<double> p_grid, double m, double M) {
  std::sort(p_grid.begin(), p_grid.end());
  std::vector<std::vector<double>> out(cv.report.methods.size());
  for (std::size_t mi = 0; mi < out.size(); ++mi) {
    for (double p : p_grid) {
      MetricParams params{p, m, M};
      params.validate();
      std::vector<double> acc;
      for (const auto& cell : cv.cells) acc.push_back(accuracy(cell.methods[mi].pairs, params));
      out[mi].push_back(mean_of(acc));
    }
  }
  return out;
}

}  // namespace surgtime
