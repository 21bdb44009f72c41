#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "paircal/error.hpp"

namespace paircal {

// Arm roles use the post-randomization relabeling: within every pair the
// practice assigned control is c=1 and the one assigned intervention is c=2.
enum class ArmRole : int { Control = 1, Intervention = 2 };

inline const char* arm_role_name(ArmRole r) {
  return r == ArmRole::Control ? "control" : "intervention";
}

/// Covariate values for one patient. Continuous values and categorical level
/// labels are kept separate; both follow the study-wide schema order.
struct CovariateVector {
  std::vector<double> continuous;
  std::vector<std::string> categorical;
};

struct PatientRecord {
  std::string pair_id;
  ArmRole role = ArmRole::Control;
  double outcome = 0.0;
  CovariateVector covariates;
  double weight = 1.0;  // optional WLS weight, from a "weight" data column
};

/// Schema shared by every record of a study. Categorical levels are the
/// declared level sets; the first level of each is the reference level
/// dropped during design-matrix encoding.
struct CovariateSchema {
  std::vector<std::string> continuous_names;
  std::vector<std::string> categorical_names;
  std::vector<std::vector<std::string>> categorical_levels;

  bool empty() const { return continuous_names.empty() && categorical_names.empty(); }
};

/// One clinical practice within a pair. n_served (N_{p,c}) drives the pooled
/// covariate weights; when a data file omits it the loader defaults it to
/// n_sampled with a warning.
struct ClusterArm {
  std::string pair_id;
  ArmRole role = ArmRole::Control;
  std::int64_t n_sampled = 0;
  std::int64_t n_served = 0;
  std::vector<PatientRecord> records;
};

struct Pair {
  std::string pair_id;
  ClusterArm control;
  ClusterArm intervention;

  const ClusterArm& arm(ArmRole r) const {
    return r == ArmRole::Control ? control : intervention;
  }
};

struct Study {
  std::vector<Pair> pairs;
  CovariateSchema covariate_schema;
};

enum class SummaryKind { Crude, Calibrated };

inline const char* summary_kind_name(SummaryKind k) {
  return k == SummaryKind::Crude ? "crude" : "calibrated";
}

/// Per-pair estimate (delta, variance); the unit of all second-level inference.
struct PairSummary {
  std::string pair_id;
  double delta = 0.0;
  double variance = 0.0;
  SummaryKind kind = SummaryKind::Crude;
};

/// Checks every type invariant, aggregating problems with pair/arm context.
/// Returns the study unchanged when everything holds.
Study validate_study(Study raw);

/// Sample mean and estimated variance of that mean, s^2/n with s^2 the
/// unbiased (n-1 divisor) sample variance.
std::pair<double, double> arm_mean_and_variance(const ClusterArm& arm);

/// Crude within-pair contrast: control mean minus intervention mean, with
/// variance the sum of the two per-arm variance-of-mean terms.
PairSummary crude_pair_summary(const Pair& pair);

std::vector<PairSummary> crude_summaries(const Study& study);

/// Exchanges the two arms of a pair, relabeling roles accordingly. This is
/// the label-swap image of the randomization: the practice that was control
/// becomes intervention and vice versa.
Pair swap_pair_arms(const Pair& pair);

/// Applies swap_pair_arms to every pair whose mask entry is true. The mask is
/// indexed by position in study.pairs.
Study with_swapped_arms(Study study, const std::vector<bool>& swap_mask);

}  // namespace paircal
