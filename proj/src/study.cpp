#include "paircal/study.hpp"

#include <cmath>
#include <set>

namespace paircal {

namespace {

void check_arm(const ClusterArm& arm, const CovariateSchema& schema,
               std::vector<ValidationIssue>& issues) {
  const std::string ctx = "pair " + arm.pair_id + " " + arm_role_name(arm.role) + " arm";
  if (arm.n_sampled != static_cast<std::int64_t>(arm.records.size())) {
    issues.push_back({ErrorCode::SchemaMismatch, ctx,
                      "n_sampled=" + std::to_string(arm.n_sampled) + " but " +
                          std::to_string(arm.records.size()) + " records present"});
  }
  if (static_cast<std::int64_t>(arm.records.size()) < 2) {
    issues.push_back({ErrorCode::TooFewPatients, ctx,
                      "needs at least 2 patients for an estimable variance, has " +
                          std::to_string(arm.records.size())});
  }
  if (arm.n_served < arm.n_sampled) {
    issues.push_back({ErrorCode::SchemaMismatch, ctx,
                      "n_served=" + std::to_string(arm.n_served) +
                          " smaller than n_sampled=" + std::to_string(arm.n_sampled)});
  }
  for (size_t k = 0; k < arm.records.size(); ++k) {
    const PatientRecord& rec = arm.records[k];
    const std::string rctx = ctx + " patient " + std::to_string(k + 1);
    if (!std::isfinite(rec.outcome)) {
      issues.push_back({ErrorCode::SchemaMismatch, rctx, "outcome is not finite"});
    }
    if (rec.covariates.continuous.size() != schema.continuous_names.size() ||
        rec.covariates.categorical.size() != schema.categorical_names.size()) {
      issues.push_back({ErrorCode::SchemaMismatch, rctx,
                        "covariate dimensions do not match study schema"});
      continue;
    }
    for (double x : rec.covariates.continuous) {
      if (!std::isfinite(x)) {
        issues.push_back({ErrorCode::SchemaMismatch, rctx, "continuous covariate not finite"});
        break;
      }
    }
    for (size_t j = 0; j < rec.covariates.categorical.size(); ++j) {
      const auto& levels = schema.categorical_levels[j];
      const std::string& lab = rec.covariates.categorical[j];
      bool known = false;
      for (const auto& l : levels) known = known || (l == lab);
      if (!known) {
        issues.push_back({ErrorCode::SchemaMismatch, rctx,
                          "level '" + lab + "' not in declared levels of " +
                              schema.categorical_names[j]});
      }
    }
    if (rec.role != arm.role) {
      issues.push_back({ErrorCode::SchemaMismatch, rctx, "record role disagrees with arm role"});
    }
  }
}

}  // namespace

Study validate_study(Study raw) {
  std::vector<ValidationIssue> issues;
  if (raw.covariate_schema.categorical_levels.size() !=
      raw.covariate_schema.categorical_names.size()) {
    issues.push_back({ErrorCode::SchemaMismatch, "schema",
                      "categorical level sets do not match categorical names"});
  }
  std::set<std::string> seen;
  for (const Pair& pair : raw.pairs) {
    if (!seen.insert(pair.pair_id).second) {
      issues.push_back({ErrorCode::SchemaMismatch, "pair " + pair.pair_id,
                        "duplicate pair id"});
    }
    if (pair.control.records.empty() && pair.control.n_sampled == 0) {
      issues.push_back({ErrorCode::MissingArm, "pair " + pair.pair_id,
                        "control arm is missing"});
    } else {
      if (pair.control.role != ArmRole::Control)
        issues.push_back({ErrorCode::SchemaMismatch, "pair " + pair.pair_id,
                          "control slot holds a non-control arm"});
      check_arm(pair.control, raw.covariate_schema, issues);
    }
    if (pair.intervention.records.empty() && pair.intervention.n_sampled == 0) {
      issues.push_back({ErrorCode::MissingArm, "pair " + pair.pair_id,
                        "intervention arm is missing"});
    } else {
      if (pair.intervention.role != ArmRole::Intervention)
        issues.push_back({ErrorCode::SchemaMismatch, "pair " + pair.pair_id,
                          "intervention slot holds a non-intervention arm"});
      check_arm(pair.intervention, raw.covariate_schema, issues);
    }
  }
  if (!issues.empty()) throw ValidationError(std::move(issues));
  return raw;
}

std::pair<double, double> arm_mean_and_variance(const ClusterArm& arm) {
  const size_t n = arm.records.size();
  double mean = 0.0;
  for (const auto& r : arm.records) mean += r.outcome;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (const auto& r : arm.records) {
    const double d = r.outcome - mean;
    ss += d * d;
  }
  const double s2 = ss / static_cast<double>(n - 1);
  return {mean, s2 / static_cast<double>(n)};
}

PairSummary crude_pair_summary(const Pair& pair) {
  const auto [m1, v1] = arm_mean_and_variance(pair.control);
  const auto [m2, v2] = arm_mean_and_variance(pair.intervention);
  PairSummary s;
  s.pair_id = pair.pair_id;
  s.delta = m1 - m2;
  s.variance = v1 + v2;
  s.kind = SummaryKind::Crude;
  return s;
}

std::vector<PairSummary> crude_summaries(const Study& study) {
  std::vector<PairSummary> out;
  out.reserve(study.pairs.size());
  for (const Pair& p : study.pairs) out.push_back(crude_pair_summary(p));
  return out;
}

Pair swap_pair_arms(const Pair& pair) {
  Pair out;
  out.pair_id = pair.pair_id;
  out.control = pair.intervention;
  out.intervention = pair.control;
  out.control.role = ArmRole::Control;
  out.intervention.role = ArmRole::Intervention;
  for (auto& r : out.control.records) r.role = ArmRole::Control;
  for (auto& r : out.intervention.records) r.role = ArmRole::Intervention;
  return out;
}

Study with_swapped_arms(Study study, const std::vector<bool>& swap_mask) {
  for (size_t i = 0; i < study.pairs.size() && i < swap_mask.size(); ++i)
    if (swap_mask[i]) study.pairs[i] = swap_pair_arms(study.pairs[i]);
  return study;
}

}  // namespace paircal
