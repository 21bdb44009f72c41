#pragma once

#include <span>
#include <string>
#include <vector>

#include "paircal/study.hpp"

namespace paircal {

enum class TStatFlavor { Welch, Pooled };

/// Standardized within-pair difference of a continuous covariate: control
/// mean minus intervention mean over the pooled standard deviation.
double effect_size(const Pair& pair, int continuous_index);

/// Two-sample t statistic for a continuous covariate; Welch (unequal
/// variances) by default.
double t_statistic(const Pair& pair, int continuous_index,
                   TStatFlavor flavor = TStatFlavor::Welch);

/// Within-pair odds ratio for one level of a categorical covariate, with 0.5
/// added to every cell so the ratio stays finite.
double odds_ratio(const Pair& pair, int categorical_index, const std::string& level);

struct ImbalanceRow {
  std::string covariate;
  std::string level;  // empty for continuous covariates
  bool continuous = false;
  std::vector<double> effect_sizes;  // per pair, continuous only
  std::vector<double> t_statistics;  // per pair, continuous only
  std::vector<double> odds_ratios;   // per pair, categorical only
};

struct ImbalanceReport {
  std::vector<std::string> pair_ids;
  std::vector<ImbalanceRow> rows;
};

/// Per-pair imbalance metrics for every covariate in the schema.
ImbalanceReport imbalance_report(const Study& study);

struct DependenceCheck {
  std::vector<double> deltas;  // x axis
  std::vector<double> sqrt_v;  // y axis
  double r_squared = 0.0;
  double slope = 0.0;
  double intercept = 0.0;
  bool degenerate = false;  // response (or regressor) constant; r_squared = 0
};

/// Least-squares regression of sqrt(v_p) on delta_p across pairs; a visibly
/// nonzero R^2 warns that the second-level independence assumption may fail.
DependenceCheck dependence_check(std::span<const PairSummary> summaries);

}  // namespace paircal
