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

// Surgical-case records, CSV ingestion, and numeric feature encoding.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "surgtime/csv.hpp"
#include "surgtime/errors.hpp"
#include "surgtime/format.hpp"

namespace surgtime {

enum class Gender { Male, Female };
enum class Location { OR, APU };
enum class PatientClass { InPatient, OutPatient };
enum class Provenance { Csv, Synthetic };

/// ASA physical status. Class VI never occurs among scheduled cases.
enum class AsaClass : int { I = 1, II = 2, III = 3, IV = 4, V = 5 };

inline constexpr std::string_view to_string(Gender g) { return g == Gender::Male ? "M" : "F"; }
inline constexpr std::string_view to_string(Location l) { return l == Location::OR ? "OR" : "APU"; }
inline constexpr std::string_view to_string(PatientClass c) {
  return c == PatientClass::InPatient ? "IN" : "OUT";
}
inline constexpr std::string_view to_string(AsaClass a) {
  constexpr std::array<std::string_view, 5> names{"I", "II", "III", "IV", "V"};
  return names[static_cast<int>(a) - 1];
}

/// One scheduled procedure. Durations and predictions are in minutes.
///
/// A dataset loaded for prediction only may carry NaN in
/// `expert_prediction_min` / `actual_duration_min`; see CsvOptions.
struct SurgicalCase {
  std::string case_id;
  Gender gender = Gender::Male;
  double weight_kg = 0;
  double age_years = 0;
  AsaClass asa = AsaClass::I;
  std::string surgeon_id;
  Location location = Location::OR;
  PatientClass patient_class = PatientClass::OutPatient;
  std::string procedure_name;
  double expert_prediction_min = 0;
  double actual_duration_min = 0;

  bool has_expert() const { return !std::isnan(expert_prediction_min); }
  bool has_actual() const { return !std::isnan(actual_duration_min); }

  bool operator==(const SurgicalCase&) const = default;
};

struct Dataset {
  std::vector<SurgicalCase> cases;
  Provenance provenance = Provenance::Csv;

  std::size_t size() const { return cases.size(); }
  bool empty() const { return cases.empty(); }
  const SurgicalCase& operator[](std::size_t i) const { return cases[i]; }
  auto begin() const { return cases.begin(); }
  auto end() const { return cases.end(); }
};

inline constexpr std::array<std::string_view, 11> kCsvColumns{
    "case_id",      "procedure_name", "surgeon_id", "gender",
    "weight_kg",    "age_years",      "asa",        "location",
    "patient_class", "expert_prediction_min", "actual_duration_min"};

struct CsvOptions {
  // Empty expert/actual fields load as NaN instead of failing. Used when
  // scoring new cases whose outcome is not yet known.
  bool allow_missing_outcomes = false;
};

// ---------------------------------------------------------------------------
// Log transform

inline double log_duration(double minutes) {
  if (!(minutes > 0)) throw DomainViolation("log_duration requires a positive duration");
  return std::log(minutes);
}

inline double inv_log(double log_minutes) { return std::exp(log_minutes); }

// ---------------------------------------------------------------------------
// Row parsing

namespace detail {

inline double parse_number(std::string_view s, std::string_view column, std::size_t line_no) {
  double v;
  if (!parse_double(s, v)) {
    throw MalformedRow("column " + std::string(column) + ": not a number: '" + std::string(s) + "'",
                       line_no);
  }
  return v;
}

inline double parse_positive(std::string_view s, std::string_view column, std::size_t line_no) {
  const double v = parse_number(s, column, line_no);
  if (!(v > 0)) throw DomainViolation(std::string(column) + " must be positive", line_no);
  return v;
}

inline AsaClass parse_asa(std::string_view raw, std::size_t line_no) {
  static const std::map<std::string, int, std::less<>> table{
      {"i", 1},  {"ii", 2}, {"iii", 3}, {"iv", 4}, {"v", 5}, {"vi", 6},
      {"1", 1},  {"2", 2},  {"3", 3},   {"4", 4},  {"5", 5}, {"6", 6}};
  const std::string key = to_lower(trim(raw));
  auto it = table.find(key);
  if (it == table.end()) throw MalformedRow("unrecognised ASA class '" + std::string(raw) + "'", line_no);
  if (it->second > 5) throw DomainViolation("ASA class must be I-V, got '" + std::string(raw) + "'", line_no);
  return static_cast<AsaClass>(it->second);
}

template <typename Enum>
Enum parse_enum(std::string_view raw, std::string_view column,
                std::initializer_list<std::pair<std::string_view, Enum>> accepted,
                std::size_t line_no) {
  const std::string key = to_lower(trim(raw));
  for (const auto& [name, value] : accepted) {
    if (key == name) return value;
  }
  throw MalformedRow("column " + std::string(column) + ": unrecognised value '" + std::string(raw) + "'",
                     line_no);
}

}  // namespace detail

/// Parses one data row in kCsvColumns order.
inline SurgicalCase parse_case_row(std::span<const std::string> row, std::size_t line_no,
                                   const CsvOptions& opts = {}) {
  if (row.size() != kCsvColumns.size()) {
    throw MalformedRow("expected " + std::to_string(kCsvColumns.size()) + " fields, got " +
                           std::to_string(row.size()),
                       line_no);
  }
  SurgicalCase c;
  c.case_id = std::string(trim(row[0]));
  c.procedure_name = std::string(trim(row[1]));
  c.surgeon_id = std::string(trim(row[2]));
  if (c.case_id.empty()) throw MalformedRow("empty case_id", line_no);
  if (c.procedure_name.empty()) throw DomainViolation("empty procedure_name", line_no);
  if (c.surgeon_id.empty()) throw DomainViolation("empty surgeon_id", line_no);

  c.gender = detail::parse_enum<Gender>(
      row[3], "gender",
      {{"m", Gender::Male}, {"male", Gender::Male}, {"f", Gender::Female}, {"female", Gender::Female}},
      line_no);
  c.weight_kg = detail::parse_positive(row[4], "weight_kg", line_no);
  c.age_years = detail::parse_number(row[5], "age_years", line_no);
  if (c.age_years < 0) throw DomainViolation("age_years must be non-negative", line_no);
  c.asa = detail::parse_asa(row[6], line_no);
  c.location = detail::parse_enum<Location>(row[7], "location",
                                            {{"or", Location::OR}, {"apu", Location::APU}}, line_no);
  c.patient_class = detail::parse_enum<PatientClass>(
      row[8], "patient_class",
      {{"in", PatientClass::InPatient},
       {"inpatient", PatientClass::InPatient},
       {"out", PatientClass::OutPatient},
       {"outpatient", PatientClass::OutPatient}},
      line_no);

  auto outcome = [&](std::size_t col) {
    if (opts.allow_missing_outcomes && trim(row[col]).empty()) {
      return std::numeric_limits<double>::quiet_NaN();
    }
    return detail::parse_positive(row[col], kCsvColumns[col], line_no);
  };
  c.expert_prediction_min = outcome(9);
  c.actual_duration_min = outcome(10);
  return c;
}

/// Reads a CSV with the exact kCsvColumns header. Duplicate case_id values
/// are rejected.
inline Dataset load_dataset(std::istream& in, const CsvOptions& opts = {}) {
  csv::Reader reader(in);
  auto header = reader.next();
  if (!header) throw MalformedRow("missing header", 1);
  if (header->fields.size() != kCsvColumns.size() ||
      !std::equal(kCsvColumns.begin(), kCsvColumns.end(), header->fields.begin(),
                  [](std::string_view want, const std::string& got) { return trim(got) == want; })) {
    std::string want;
    for (auto col : kCsvColumns) want += (want.empty() ? "" : ",") + std::string(col);
    throw MalformedRow("header must be exactly: " + want, header->line_no);
  }
  Dataset ds;
  ds.provenance = Provenance::Csv;
  std::unordered_map<std::string, std::size_t> seen;
  while (auto rec = reader.next()) {
    SurgicalCase c = parse_case_row(rec->fields, rec->line_no, opts);
    auto [it, inserted] = seen.emplace(c.case_id, rec->line_no);
    if (!inserted) {
      throw DuplicateId("case_id '" + c.case_id + "' already used on line " + std::to_string(it->second),
                        rec->line_no);
    }
    ds.cases.push_back(std::move(c));
  }
  return ds;
}

inline std::vector<std::string> case_to_row(const SurgicalCase& c) {
  auto num = [](double v) { return std::isnan(v) ? std::string() : format_double(v); };
  return {c.case_id,
          c.procedure_name,
          c.surgeon_id,
          std::string(to_string(c.gender)),
          num(c.weight_kg),
          num(c.age_years),
          std::string(to_string(c.asa)),
          std::string(to_string(c.location)),
          std::string(to_string(c.patient_class)),
          num(c.expert_prediction_min),
          num(c.actual_duration_min)};
}

/// Writes the dataset in the format load_dataset reads. Numbers use the
/// shortest round-tripping representation.
inline void write_dataset(std::ostream& out, const Dataset& ds) {
  csv::write_row(out, std::vector<std::string>(kCsvColumns.begin(), kCsvColumns.end()));
  for (const auto& c : ds.cases) csv::write_row(out, case_to_row(c));
}

/// Keeps the cases whose procedure occurs at least `min_count` times.
inline Dataset filter_min_count(const Dataset& ds, std::size_t min_count) {
  if (min_count < 1) throw DomainViolation("min_count must be at least 1");
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& c : ds.cases) ++counts[c.procedure_name];
  Dataset out;
  out.provenance = ds.provenance;
  for (const auto& c : ds.cases) {
    if (counts[c.procedure_name] >= min_count) out.cases.push_back(c);
  }
  return out;
}

/// Distinct procedure names, sorted.
inline std::vector<std::string> procedure_names(const Dataset& ds) {
  std::vector<std::string> names;
  for (const auto& c : ds.cases) names.push_back(c.procedure_name);
  std::sort(names.begin(), names.end());
  names.erase(std::unique(names.begin(), names.end()), names.end());
  return names;
}

// ---------------------------------------------------------------------------
// Encoding

/// Column layout for encoded feature vectors. Vocabularies come from the
/// training set only; unseen levels encode as an all-zero block.
struct EncodingSchema {
  std::vector<std::string> genders;
  std::vector<std::string> locations;
  std::vector<std::string> patient_classes;
  std::vector<std::string> surgeons;
  std::vector<std::string> procedures;
  bool include_expert = false;
  std::vector<std::string> feature_names;

  std::size_t width() const { return feature_names.size(); }

  bool operator==(const EncodingSchema&) const = default;
};

inline constexpr std::string_view kExpertFeature = "expert_prediction_log";

/// Source feature a column belongs to: the part before '=' for one-hot
/// columns, otherwise the column name itself.
inline std::string feature_group(std::string_view column) {
  auto eq = column.find('=');
  return std::string(eq == std::string_view::npos ? column : column.substr(0, eq));
}

namespace detail {

template <typename F>
std::vector<std::string> sorted_levels(const Dataset& ds, F key) {
  std::vector<std::string> out;
  for (const auto& c : ds.cases) out.emplace_back(key(c));
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

inline void one_hot_into(std::span<double> block, const std::vector<std::string>& vocab,
                         std::string_view level) {
  std::fill(block.begin(), block.end(), 0.0);
  auto it = std::lower_bound(vocab.begin(), vocab.end(), level);
  if (it != vocab.end() && *it == level) block[static_cast<std::size_t>(it - vocab.begin())] = 1.0;
}

}  // namespace detail

/// Rebuilds feature_names from the vocabularies.
inline void refresh_feature_names(EncodingSchema& s) {
  s.feature_names = {"weight", "age", "asa"};
  auto block = [&](std::string_view name, const std::vector<std::string>& vocab) {
    for (const auto& level : vocab) s.feature_names.push_back(std::string(name) + "=" + level);
  };
  block("gender", s.genders);
  block("location", s.locations);
  block("patient_class", s.patient_classes);
  block("surgeon_id", s.surgeons);
  block("procedure_name", s.procedures);
  if (s.include_expert) s.feature_names.emplace_back(kExpertFeature);
}

inline EncodingSchema build_schema(const Dataset& train, bool include_expert) {
  if (train.empty()) throw EmptyTrainingSet();
  EncodingSchema s;
  s.genders = detail::sorted_levels(train, [](const SurgicalCase& c) { return to_string(c.gender); });
  s.locations = detail::sorted_levels(train, [](const SurgicalCase& c) { return to_string(c.location); });
  s.patient_classes =
      detail::sorted_levels(train, [](const SurgicalCase& c) { return to_string(c.patient_class); });
  s.surgeons = detail::sorted_levels(train, [](const SurgicalCase& c) { return c.surgeon_id; });
  s.procedures = detail::sorted_levels(train, [](const SurgicalCase& c) { return c.procedure_name; });
  s.include_expert = include_expert;
  refresh_feature_names(s);
  return s;
}

/// Encodes into `out`, which must have schema.width() elements.
inline void encode_into(const SurgicalCase& c, const EncodingSchema& s, std::span<double> out) {
  if (out.size() != s.width()) throw WidthMismatch(s.width(), out.size());
  out[0] = c.weight_kg;
  out[1] = c.age_years;
  out[2] = static_cast<double>(static_cast<int>(c.asa));
  std::size_t pos = 3;
  auto block = [&](const std::vector<std::string>& vocab, std::string_view level) {
    detail::one_hot_into(out.subspan(pos, vocab.size()), vocab, level);
    pos += vocab.size();
  };
  block(s.genders, to_string(c.gender));
  block(s.locations, to_string(c.location));
  block(s.patient_classes, to_string(c.patient_class));
  block(s.surgeons, c.surgeon_id);
  block(s.procedures, c.procedure_name);
  if (s.include_expert) {
    if (!c.has_expert()) {
      throw DomainViolation("case '" + c.case_id + "' has no expert prediction but the model uses it");
    }
    out[pos] = log_duration(c.expert_prediction_min);
  }
}

inline std::vector<double> encode(const SurgicalCase& c, const EncodingSchema& s) {
  std::vector<double> out(s.width());
  encode_into(c, s, out);
  return out;
}

/// Dense row-major matrix of encoded feature vectors.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {}

  /// Builds from nested rows; every row must have the same width.
  static FeatureMatrix from_rows(const std::vector<std::vector<double>>& rows) {
    FeatureMatrix m(rows.size(), rows.empty() ? 0 : rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != m.cols_) throw WidthMismatch(m.cols_, rows[i].size());
      std::copy(rows[i].begin(), rows[i].end(), m.row(i).begin());
    }
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }

  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline FeatureMatrix encode_all(std::span<const SurgicalCase> cases, const EncodingSchema& s) {
  FeatureMatrix m(cases.size(), s.width());
  for (std::size_t i = 0; i < cases.size(); ++i) encode_into(cases[i], s, m.row(i));
  return m;
}

/// Natural-log actual durations, the regression target.
inline std::vector<double> log_targets(std::span<const SurgicalCase> cases) {
  std::vector<double> z;
  z.reserve(cases.size());
  for (const auto& c : cases) z.push_back(log_duration(c.actual_duration_min));
  return z;
}

}  // namespace surgtime
