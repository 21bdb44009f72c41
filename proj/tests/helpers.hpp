#pragma once

// Shared fixtures and generators for the test suites.

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "paircal/study.hpp"

namespace testutil {

using namespace paircal;

// Seven-pair reference summaries from the motivating study's published
// tables: crude and calibrated deltas with their standard errors.
inline const std::vector<double> kCrudeDeltas = {-0.8, -0.1, 0.3, 3.8,
                                                 4.5,  -2.6, -1.3};
inline const std::vector<double> kCrudeSqrtV = {2.7, 2.6, 2.0, 2.7, 2.1, 2.6, 2.2};
inline const std::vector<double> kCalibratedDeltas = {0.9, 3.0, 0.1, 1.9,
                                                      2.3, 0.5, 0.8};
inline const std::vector<double> kCalibratedSqrtV = {2.1, 2.4, 1.5, 2.0,
                                                     1.7, 2.2, 1.7};

inline std::vector<PairSummary> make_summaries(const std::vector<double>& deltas,
                                               const std::vector<double>& sqrt_v,
                                               SummaryKind kind) {
  std::vector<PairSummary> out;
  for (size_t i = 0; i < deltas.size(); ++i) {
    PairSummary s;
    s.pair_id = std::to_string(i + 1);
    s.delta = deltas[i];
    s.variance = sqrt_v[i] * sqrt_v[i];
    s.kind = kind;
    out.push_back(s);
  }
  return out;
}

inline std::vector<PairSummary> crude_table1() {
  return make_summaries(kCrudeDeltas, kCrudeSqrtV, SummaryKind::Crude);
}

inline std::vector<PairSummary> calibrated_table1() {
  return make_summaries(kCalibratedDeltas, kCalibratedSqrtV, SummaryKind::Calibrated);
}

inline ClusterArm make_arm(const std::string& pair_id, ArmRole role,
                           const std::vector<double>& outcomes,
                           std::int64_t n_served = 0) {
  ClusterArm arm;
  arm.pair_id = pair_id;
  arm.role = role;
  for (double y : outcomes) {
    PatientRecord r;
    r.pair_id = pair_id;
    r.role = role;
    r.outcome = y;
    arm.records.push_back(r);
  }
  arm.n_sampled = static_cast<std::int64_t>(outcomes.size());
  arm.n_served = n_served > 0 ? n_served : arm.n_sampled;
  return arm;
}

/// Randomized patient-level study with one continuous and one categorical
/// covariate; covariate distributions differ between arms so calibration has
/// something to correct. treatment_effect shifts intervention outcomes.
inline Study random_study(std::mt19937_64& rng, int n_pairs, int patients_lo = 5,
                          int patients_hi = 15, double treatment_effect = 0.0,
                          double covariate_slope = 2.0) {
  std::uniform_int_distribution<int> n_dist(patients_lo, patients_hi);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  Study study;
  study.covariate_schema.continuous_names = {"x"};
  study.covariate_schema.categorical_names = {"grp"};
  study.covariate_schema.categorical_levels = {{"a", "b"}};

  for (int p = 0; p < n_pairs; ++p) {
    Pair pair;
    pair.pair_id = "p" + std::to_string(p + 1);
    const double pair_effect = normal(rng);
    for (ArmRole role : {ArmRole::Control, ArmRole::Intervention}) {
      ClusterArm arm;
      arm.pair_id = pair.pair_id;
      arm.role = role;
      const int n = n_dist(rng);
      const double x_shift = normal(rng) * 0.8;  // per-arm covariate imbalance
      const double p_b = 0.2 + 0.6 * unif(rng);
      for (int k = 0; k < n; ++k) {
        PatientRecord rec;
        rec.pair_id = pair.pair_id;
        rec.role = role;
        const double x = normal(rng) + x_shift;
        const bool is_b = unif(rng) < p_b;
        rec.covariates.continuous = {x};
        rec.covariates.categorical = {is_b ? "b" : "a"};
        rec.outcome = pair_effect + covariate_slope * x + (is_b ? 1.5 : 0.0) +
                      0.7 * normal(rng) +
                      (role == ArmRole::Intervention ? treatment_effect : 0.0);
        arm.records.push_back(rec);
      }
      arm.n_sampled = n;
      arm.n_served = n * (1 + (p % 3));  // unequal served populations
      if (role == ArmRole::Control) pair.control = std::move(arm);
      else pair.intervention = std::move(arm);
    }
    study.pairs.push_back(std::move(pair));
  }
  return validate_study(std::move(study));
}

inline std::vector<PairSummary> random_summaries(std::mt19937_64& rng, int n,
                                                 SummaryKind kind = SummaryKind::Crude) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.2, 3.0);
  std::vector<PairSummary> out;
  for (int i = 0; i < n; ++i) {
    PairSummary s;
    s.pair_id = "p" + std::to_string(i + 1);
    s.delta = 2.0 * normal(rng);
    s.variance = unif(rng);
    s.kind = kind;
    out.push_back(s);
  }
  return out;
}

}  // namespace testutil
