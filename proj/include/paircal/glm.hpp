#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "paircal/study.hpp"

namespace paircal {

enum class LinkFunction { Identity, Logit };

inline const char* link_name(LinkFunction l) {
  return l == LinkFunction::Identity ? "identity" : "logit";
}

enum class SandwichFlavor { HC0, HC1 };

/// Patient-level design: one intercept column per (pair, arm) cell followed
/// by encoded covariate columns. Column order is deterministic: pairs in id
/// order, control before intervention, covariates in schema order with
/// categorical reference levels dropped.
struct DesignMatrix {
  Eigen::MatrixXd X;
  Eigen::VectorXd outcomes;
  std::vector<std::string> column_names;
  std::vector<std::string> pair_ids;       // pair order used for cell columns
  std::vector<int> row_cell;               // row -> cell column index
  int n_cells = 0;                         // 2 * number of pairs
  int n_covariate_cols = 0;
  CovariateSchema schema;                  // empty when covariates excluded
  std::vector<std::string> dropped_reference_levels;

  int cell_column(int pair_index, ArmRole role) const {
    return 2 * pair_index + (role == ArmRole::Control ? 0 : 1);
  }
  int cols() const { return n_cells + n_covariate_cols; }
};

/// Encodes one covariate vector into the design's covariate columns.
Eigen::VectorXd encode_covariates(const CovariateSchema& schema,
                                  const CovariateVector& cov);

/// Builds the cell-saturated design for a validated study. Throws
/// RankDeficient (naming the offending columns) when the matrix is not full
/// column rank at relative tolerance 1e-8. Set include_covariates=false for
/// the intercepts-only design (covariate coefficients forced to zero).
DesignMatrix build_design(const Study& study, bool include_covariates = true);

struct FitOptions {
  SandwichFlavor sandwich = SandwichFlavor::HC0;
  bool cluster_robust = false;             // meat summed per (pair, arm) cell
  std::optional<Eigen::VectorXd> weights;  // per-record WLS weights, default 1
  double logit_tol = 1e-10;
  int logit_max_iter = 100;
};

/// Fitted coefficients with heteroskedasticity-robust covariance. Carries the
/// design layout so downstream calibration only needs (study, fit).
struct CoefficientFit {
  Eigen::VectorXd theta;       // cell intercepts then covariate coefficients
  Eigen::MatrixXd covariance;  // robust sandwich estimate
  LinkFunction link = LinkFunction::Identity;
  std::vector<std::string> column_names;
  std::vector<std::string> pair_ids;
  int n_cells = 0;
  int n_covariate_cols = 0;
  CovariateSchema schema;
  int iterations = 0;  // 0 for the identity link closed form

  int cell_column(int pair_index, ArmRole role) const {
    return 2 * pair_index + (role == ArmRole::Control ? 0 : 1);
  }
};

/// Identity link: ordinary (optionally weighted) least squares. Logit link:
/// Gauss-Newton iteratively reweighted least squares on the first-moment
/// residuals, converging when the max coefficient change drops below
/// logit_tol. Covariance is the HC sandwich.
CoefficientFit fit(const DesignMatrix& design, const Eigen::VectorXd& outcomes,
                   LinkFunction link, const FitOptions& options = {});

inline CoefficientFit fit(const DesignMatrix& design, LinkFunction link,
                          const FitOptions& options = {}) {
  return fit(design, design.outcomes, link, options);
}

double inverse_link(LinkFunction link, double eta);
double inverse_link_derivative(LinkFunction link, double eta);

}  // namespace paircal
