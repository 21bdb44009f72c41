#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "paircal/glm.hpp"
#include "paircal/permutation.hpp"
#include "paircal/study.hpp"

namespace paircal {

enum class AnalysisMode { PatientLevel, SummaryLevel };
enum class CovarianceMode { Diagonal, Full };

enum class EstimatorChoice {
  FirstLevel,
  TwoLevel,
  Profile,
  Bayes,
  PermutationExact,
  PermutationMC,
};

struct AnalysisConfig {
  AnalysisMode mode = AnalysisMode::PatientLevel;
  bool calibration = true;  // requires PatientLevel
  std::set<EstimatorChoice> estimators = {
      EstimatorChoice::FirstLevel, EstimatorChoice::TwoLevel,
      EstimatorChoice::Profile, EstimatorChoice::Bayes,
      EstimatorChoice::PermutationExact};
  LinkFunction link = LinkFunction::Identity;
  CovarianceMode covariance_mode = CovarianceMode::Diagonal;
  SandwichFlavor sandwich = SandwichFlavor::HC0;
  bool cluster_robust = false;
  std::uint64_t seed = 0;
  std::int64_t mc_draws = 100000;
  PermutationStatistic permutation_statistic = PermutationStatistic::UnweightedMean;
  bool permutation_full_refit = false;  // patient-level label-swap refits
  std::optional<std::pair<double, double>> outcome_rescale;  // logit support

  void validate() const;
};

AnalysisConfig config_from_json_file(const std::string& path);
AnalysisConfig config_from_json_text(const std::string& text,
                                     const std::string& source_name);
std::string config_to_json_text(const AnalysisConfig& config);

struct StudyLoad {
  Study study;
  std::vector<std::string> warnings;
};

/// Patient file columns: pair_id, role, outcome, then covariates (numeric
/// columns continuous, quoted/text columns categorical; a column named
/// "weight" supplies optional per-record WLS weights). Cluster file columns:
/// pair_id, role, n_served; when the path is empty n_served defaults to the
/// sampled count with a warning. A JSON schema sidecar can override column
/// typing and declare categorical levels.
StudyLoad load_patient_csv(const std::string& data_path,
                           const std::string& clusters_path = "",
                           const std::string& schema_path = "");

/// Summary file columns: pair_id, delta, sqrt_v (or variance), kind.
std::vector<PairSummary> load_summary_csv(const std::string& path);

/// Optional per-record weights captured from the patient file's "weight"
/// column, aligned with build_design row order (pairs in id order, control
/// arm first, records in file order).
std::optional<Eigen::VectorXd> design_weights(const Study& study);

/// FNV-1a 64-bit content digest used for report provenance.
std::string file_digest(const std::string& path);

const char* analysis_mode_name(AnalysisMode m);
const char* covariance_mode_name(CovarianceMode m);
const char* estimator_choice_name(EstimatorChoice e);

}  // namespace paircal
