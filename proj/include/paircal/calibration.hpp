#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "paircal/glm.hpp"
#include "paircal/study.hpp"

namespace paircal {

/// Weighted empirical covariate distribution of a pair, pooling both arms.
/// Patient j of arm c carries weight (N_{p,c}/n_{p,c}) / (N_{p,1}+N_{p,2}),
/// so each arm's total mass is its served fraction pi_{p,c} and the weights
/// sum to one.
struct PooledCovariateDistribution {
  std::string pair_id;
  std::vector<CovariateVector> support;  // control arm patients, then intervention
  std::vector<double> weights;
};

PooledCovariateDistribution pooled_distribution(const Pair& pair);

/// Calibrated mean for one (pair, arm): the fitted covariate-conditional mean
/// of that cell averaged over the pair's pooled covariate distribution.
double calibrated_mean(const Pair& pair, ArmRole role, const CoefficientFit& fit);

/// Calibrated means for every cell with their delta-method joint covariance.
/// Pair order follows fit.pair_ids; cell (p, c) flattens to index 2p+(c-1).
struct CalibratedEstimates {
  std::vector<std::string> pair_ids;
  Eigen::MatrixXd mu;                // N x 2, columns are (control, intervention)
  Eigen::MatrixXd covariance;        // 2N x 2N over the flattened cells
  std::vector<PairSummary> deltas;   // kind = Calibrated, variance = diag below
  Eigen::MatrixXd delta_covariance;  // N x N
};

/// Computes calibrated means, the delta-method covariance J Sigma_theta J',
/// and the per-pair calibrated differences. The pooled weights are treated as
/// fixed; only coefficient uncertainty propagates.
CalibratedEstimates calibrate_study(const Study& study, const CoefficientFit& fit);

}  // namespace paircal
