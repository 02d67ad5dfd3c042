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

// Seeded synthetic surgical-case generator with a known log-space target.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "surgtime/data_model.hpp"
#include "surgtime/errors.hpp"

namespace surgtime {

struct SynthConfig {
  std::size_t n_procedures = 12;
  std::size_t cases_per_procedure = 80;
  std::size_t n_surgeons = 30;
  // Each procedure is performed by a fixed pool of this many surgeons.
  std::size_t surgeons_per_procedure = 4;

  double log_noise_sigma = 0.25;     // std of eta on the actual duration
  double expert_noise_sigma = 0.15;  // std of eta' on the expert prediction
  // Log-minute shift of expert predictions; negative means surgeons
  // underestimate.
  double expert_bias = -0.2;

  // Empty means default_base_logmeans(n_procedures).
  std::vector<double> procedure_base_logmeans;
  // Empty means drawn from Normal(0, surgeon_offset_sd^2) with the seed.
  std::vector<double> surgeon_offsets;
  double surgeon_offset_sd = 0.15;
  double location_offset = 0.25;     // added when location is OR
  double class_offset = 0.15;        // added for in-patients
  double weight_coefficient = 0.3;   // per ln(kg)

  double target_weight_age_corr = 0.85;
  double or_probability = 0.5;
  double inpatient_probability = 0.3;
  std::uint64_t seed = 20170101;
};

struct SynthResult {
  Dataset dataset;
  std::vector<double> true_log_duration;  // g(x), aligned with dataset.cases
  double weight_log_scatter = 0;          // std of the log-weight scatter actually used
};

inline constexpr double kSynthAgeMin = 0.5;
inline constexpr double kSynthAgeMax = 18.0;
// Median weight curve: ln w = ln(kBirthWeight) + kLogWeightPerYear * age.
inline constexpr double kBirthWeightKg = 4.0;
inline const double kLogWeightPerYear = (std::log(60.0) - std::log(4.0)) / 18.0;

inline std::vector<std::string> default_procedure_names(std::size_t n) {
  static const std::array<const char*, 12> names{
      "Adenoidectomy",
      "Bilateral Ear Myringotomy with Tubes",
      "Bone Marrow Aspiration",
      "Bronchoscopy (Pulmonary)",
      "Colonoscopy with Biopsy",
      "Dental Rehabilitation",
      "Esophagogastroduodenoscopy (EGD) with Biopsy",
      "Laparoscopic Appendectomy",
      "Lumbar Puncture with Intrathecal Chemotherapy",
      "Myringotomy with Tubes",
      "Portacath Removal",
      "Tonsillectomy And Adenoidectomy"};
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) {
    if (n <= names.size()) {
      out.emplace_back(names[i]);
    } else {
      std::string id = std::to_string(i + 1);
      out.push_back("Procedure " + std::string(3 - std::min<std::size_t>(3, id.size()), '0') + id);
    }
  }
  return out;
}

/// Base log-minutes per procedure: a fixed ladder of typical pediatric case
/// lengths, cycled when more than 12 procedures are requested.
inline std::vector<double> default_base_logmeans(std::size_t n) {
  static const std::array<double, 12> minutes{8, 9.5, 11, 12.5, 14, 15.5, 17.5, 19.5, 22, 25, 29, 35};
  std::vector<double> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(std::log(minutes[i % minutes.size()]));
  return out;
}

/// Std of the log-weight scatter giving Pearson(weight, age) == target under
/// age ~ U[kSynthAgeMin, kSynthAgeMax]. Closed form from lognormal moments;
/// throws InvalidConfig when the target exceeds what zero scatter gives.
inline double weight_scatter_for_corr(double target) {
  const double lo = kSynthAgeMin, hi = kSynthAgeMax, k = kLogWeightPerYear;
  const double span = hi - lo;
  auto mean_exp = [&](double kk) { return (std::exp(kk * hi) - std::exp(kk * lo)) / (kk * span); };
  auto prim = [&](double a) { return (a / k - 1.0 / (k * k)) * std::exp(k * a); };
  const double m1 = mean_exp(k);
  const double m2 = mean_exp(2 * k);
  const double n1 = (prim(hi) - prim(lo)) / span;
  const double mean_age = 0.5 * (lo + hi);
  const double var_age = span * span / 12.0;
  const double cov = n1 - mean_age * m1;
  const double ratio = ((cov / target) * (cov / target) / var_age + m1 * m1) / m2;
  if (ratio < 1.0) {
    throw InvalidConfig("target_weight_age_corr " + format_double(target) +
                        " exceeds the correlation reachable with zero scatter");
  }
  return std::sqrt(std::log(ratio));
}

inline void validate(const SynthConfig& cfg) {
  if (cfg.n_procedures < 1 || cfg.cases_per_procedure < 1 || cfg.n_surgeons < 1 ||
      cfg.surgeons_per_procedure < 1) {
    throw InvalidConfig("synthetic counts must be at least 1");
  }
  if (!(cfg.log_noise_sigma >= 0) || !(cfg.expert_noise_sigma >= 0) || !(cfg.surgeon_offset_sd >= 0)) {
    throw InvalidConfig("noise standard deviations must be non-negative");
  }
  if (!(cfg.target_weight_age_corr > 0 && cfg.target_weight_age_corr < 1)) {
    throw InvalidConfig("target_weight_age_corr must lie in (0, 1)");
  }
  if (!(cfg.or_probability >= 0 && cfg.or_probability <= 1) ||
      !(cfg.inpatient_probability >= 0 && cfg.inpatient_probability <= 1)) {
    throw InvalidConfig("probabilities must lie in [0, 1]");
  }
  if (!cfg.procedure_base_logmeans.empty() && cfg.procedure_base_logmeans.size() != cfg.n_procedures) {
    throw InvalidConfig("procedure_base_logmeans must have n_procedures entries");
  }
  if (!cfg.surgeon_offsets.empty() && cfg.surgeon_offsets.size() != cfg.n_surgeons) {
    throw InvalidConfig("surgeon_offsets must have n_surgeons entries");
  }
}

inline SynthResult synth_generate(const SynthConfig& cfg) {
  validate(cfg);
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> std_normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const auto names = default_procedure_names(cfg.n_procedures);
  const auto base = cfg.procedure_base_logmeans.empty() ? default_base_logmeans(cfg.n_procedures)
                                                        : cfg.procedure_base_logmeans;
  std::vector<double> surgeon_offset = cfg.surgeon_offsets;
  if (surgeon_offset.empty()) {
    for (std::size_t s = 0; s < cfg.n_surgeons; ++s) {
      surgeon_offset.push_back(cfg.surgeon_offset_sd * std_normal(rng));
    }
  }
  std::vector<std::string> surgeon_ids;
  const std::size_t id_width = std::to_string(cfg.n_surgeons).size();
  for (std::size_t s = 0; s < cfg.n_surgeons; ++s) {
    std::string num = std::to_string(s + 1);
    surgeon_ids.push_back("S" + std::string(id_width - num.size(), '0') + num);
  }

  const std::size_t pool_size = std::min(cfg.surgeons_per_procedure, cfg.n_surgeons);
  std::vector<std::vector<std::size_t>> pools(cfg.n_procedures);
  std::vector<std::size_t> all(cfg.n_surgeons);
  for (auto& pool : pools) {
    std::iota(all.begin(), all.end(), std::size_t{0});
    // Partial Fisher-Yates: the first pool_size entries are the pool.
    for (std::size_t i = 0; i < pool_size; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, all.size() - 1);
      std::swap(all[i], all[pick(rng)]);
    }
    pool.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(pool_size));
  }

  const double scatter = weight_scatter_for_corr(cfg.target_weight_age_corr);
  std::uniform_real_distribution<double> age_dist(kSynthAgeMin, kSynthAgeMax);
  std::discrete_distribution<int> asa_dist({45, 35, 15, 4, 1});

  SynthResult out;
  out.weight_log_scatter = scatter;
  out.dataset.provenance = Provenance::Synthetic;
  const std::size_t total = cfg.n_procedures * cfg.cases_per_procedure;
  const std::size_t id_digits = std::max<std::size_t>(5, std::to_string(total).size());
  out.dataset.cases.reserve(total);
  out.true_log_duration.reserve(total);

  std::size_t serial = 0;
  for (std::size_t p = 0; p < cfg.n_procedures; ++p) {
    std::uniform_int_distribution<std::size_t> pick_surgeon(0, pools[p].size() - 1);
    for (std::size_t i = 0; i < cfg.cases_per_procedure; ++i) {
      SurgicalCase c;
      std::string num = std::to_string(++serial);
      c.case_id = "syn-" + std::string(id_digits - num.size(), '0') + num;
      c.procedure_name = names[p];
      const std::size_t surgeon = pools[p][pick_surgeon(rng)];
      c.surgeon_id = surgeon_ids[surgeon];
      c.gender = unit(rng) < 0.5 ? Gender::Male : Gender::Female;
      c.age_years = age_dist(rng);
      c.weight_kg = std::exp(std::log(kBirthWeightKg) + kLogWeightPerYear * c.age_years +
                             scatter * std_normal(rng));
      c.asa = static_cast<AsaClass>(asa_dist(rng) + 1);
      c.location = unit(rng) < cfg.or_probability ? Location::OR : Location::APU;
      c.patient_class = unit(rng) < cfg.inpatient_probability ? PatientClass::InPatient
                                                              : PatientClass::OutPatient;

      const double g = base[p] + cfg.weight_coefficient * std::log(c.weight_kg) +
                       surgeon_offset[surgeon] +
                       (c.location == Location::OR ? cfg.location_offset : 0.0) +
                       (c.patient_class == PatientClass::InPatient ? cfg.class_offset : 0.0);
      const double eta = cfg.log_noise_sigma * std_normal(rng);
      const double eta_expert = cfg.expert_noise_sigma * std_normal(rng);
      c.actual_duration_min = std::exp(g + eta);
      c.expert_prediction_min = std::exp(g + cfg.expert_bias + eta_expert);
      out.dataset.cases.push_back(std::move(c));
      out.true_log_duration.push_back(g);
    }
  }
  return out;
}

}  // namespace surgtime
