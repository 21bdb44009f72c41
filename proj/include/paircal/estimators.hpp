#pragma once

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <vector>

#include "paircal/study.hpp"

namespace paircal {

enum class EstimatorMethod {
  FirstLevelMLE,
  TwoLevelMLE,
  ProfileMLE,
  BayesUniformShrinkage,
};

const char* estimator_method_name(EstimatorMethod m);

struct EffectEstimate {
  EstimatorMethod method = EstimatorMethod::FirstLevelMLE;
  double point = 0.0;
  std::optional<double> se;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  std::optional<double> tau2;
  std::optional<double> p_value;
};

/// Unweighted mean of the pair deltas with delete-one jackknife standard
/// error; valid with no assumptions beyond the design identity that the
/// expected pair difference equals the overall effect.
EffectEstimate first_level_mle(std::span<const PairSummary> summaries);

/// Marginal-likelihood MLE of (effect, tau2) with per-pair total variance
/// v_p + tau2, or Sigma + tau2*I when a full covariance is supplied. The
/// effect profiles out in closed form (inverse-variance weighted mean); tau2
/// is maximized by a bracketed grid scan plus Brent refinement on [0,
/// 10*var(deltas)]. Wald CI from observed information.
EffectEstimate two_level_mle(std::span<const PairSummary> summaries,
                             const std::optional<Eigen::MatrixXd>& full_cov = {});

/// Same point as two_level_mle; the 95% interval inverts the profile
/// likelihood ratio at the chi-square(1) cutoff 3.84. No se is reported.
EffectEstimate profile_mle(std::span<const PairSummary> summaries,
                           const std::optional<Eigen::MatrixXd>& full_cov = {});

struct BayesConfig {
  /// Prior scale of the uniform shrinkage prior v0/(v0+tau2)^2. Defaults to
  /// the harmonic mean of the pair variances. Zero collapses the prior to a
  /// point mass at tau2 = 0.
  std::optional<double> v0;
  double quad_rel_tol = 1e-10;
  double prior_tail_mass = 1e-6;  // mass allowed beyond the tau2 cutoff
};

/// Posterior mean and central 95% interval for the effect under a flat prior
/// on the effect and the uniform shrinkage prior on tau2; the effect
/// integrates out in closed form, tau2 by adaptive quadrature. The reported
/// p-value is the two-sided posterior tail probability of the sign.
EffectEstimate bayes_uniform_shrinkage(std::span<const PairSummary> summaries,
                                       const std::optional<Eigen::MatrixXd>& full_cov = {},
                                       const BayesConfig& config = {});

/// Marginal log-likelihood of (effect, tau2); exposed so tests can verify
/// optimizer dominance on a grid.
double marginal_log_likelihood(std::span<const PairSummary> summaries,
                               const std::optional<Eigen::MatrixXd>& full_cov,
                               double effect, double tau2);

}  // namespace paircal
