#include "paircal/calibration.hpp"

#include <algorithm>
#include <cmath>

namespace paircal {

namespace {

int pair_index_in_fit(const CoefficientFit& fit, const std::string& pair_id) {
  for (size_t i = 0; i < fit.pair_ids.size(); ++i)
    if (fit.pair_ids[i] == pair_id) return static_cast<int>(i);
  throw Error(ErrorCode::SchemaMismatch,
              "fit does not cover pair '" + pair_id + "'");
}

}  // namespace

PooledCovariateDistribution pooled_distribution(const Pair& pair) {
  PooledCovariateDistribution out;
  out.pair_id = pair.pair_id;
  const double n_served_total =
      static_cast<double>(pair.control.n_served + pair.intervention.n_served);
  for (const ClusterArm* arm : {&pair.control, &pair.intervention}) {
    const double w = (static_cast<double>(arm->n_served) /
                      static_cast<double>(arm->n_sampled)) /
                     n_served_total;
    for (const PatientRecord& rec : arm->records) {
      out.support.push_back(rec.covariates);
      out.weights.push_back(w);
    }
  }
  return out;
}

double calibrated_mean(const Pair& pair, ArmRole role, const CoefficientFit& fit) {
  const int pi = pair_index_in_fit(fit, pair.pair_id);
  const double intercept = fit.theta[fit.cell_column(pi, role)];
  const Eigen::VectorXd theta_cov = fit.theta.tail(fit.n_covariate_cols);

  const PooledCovariateDistribution pooled = pooled_distribution(pair);
  double acc = 0.0;
  for (size_t j = 0; j < pooled.support.size(); ++j) {
    double eta = intercept;
    if (fit.n_covariate_cols > 0)
      eta += theta_cov.dot(encode_covariates(fit.schema, pooled.support[j]));
    acc += pooled.weights[j] * inverse_link(fit.link, eta);
  }
  return acc;
}

CalibratedEstimates calibrate_study(const Study& study, const CoefficientFit& fit) {
  const int n_pairs = static_cast<int>(fit.pair_ids.size());
  const int p = static_cast<int>(fit.theta.size());

  // study pairs looked up by the fit's pair order
  std::vector<const Pair*> by_fit(n_pairs, nullptr);
  for (const Pair& pair : study.pairs) {
    for (int i = 0; i < n_pairs; ++i)
      if (fit.pair_ids[i] == pair.pair_id) by_fit[i] = &pair;
  }
  for (int i = 0; i < n_pairs; ++i)
    if (!by_fit[i])
      throw Error(ErrorCode::SchemaMismatch,
                  "study lacks pair '" + fit.pair_ids[i] + "' covered by the fit");

  CalibratedEstimates out;
  out.pair_ids = fit.pair_ids;
  out.mu.resize(n_pairs, 2);
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(2 * n_pairs, p);

  const Eigen::VectorXd theta_cov = fit.theta.tail(fit.n_covariate_cols);
  for (int pi = 0; pi < n_pairs; ++pi) {
    const Pair& pair = *by_fit[pi];
    const PooledCovariateDistribution pooled = pooled_distribution(pair);

    // encode each support point once; both arms share the pooled support
    std::vector<Eigen::VectorXd> xs;
    xs.reserve(pooled.support.size());
    if (fit.n_covariate_cols > 0)
      for (const auto& cv : pooled.support)
        xs.push_back(encode_covariates(fit.schema, cv));

    for (ArmRole role : {ArmRole::Control, ArmRole::Intervention}) {
      const int cell = fit.cell_column(pi, role);
      const double intercept = fit.theta[cell];
      double mu_acc = 0.0;
      Eigen::VectorXd jrow = Eigen::VectorXd::Zero(p);
      for (size_t j = 0; j < pooled.support.size(); ++j) {
        double eta = intercept;
        if (fit.n_covariate_cols > 0) eta += theta_cov.dot(xs[j]);
        const double wj = pooled.weights[j];
        mu_acc += wj * inverse_link(fit.link, eta);
        const double slope = wj * inverse_link_derivative(fit.link, eta);
        jrow[cell] += slope;
        if (fit.n_covariate_cols > 0) jrow.tail(fit.n_covariate_cols) += slope * xs[j];
      }
      out.mu(pi, role == ArmRole::Control ? 0 : 1) = mu_acc;
      jac.row(cell) = jrow.transpose();
    }
  }

  Eigen::MatrixXd cov = jac * fit.covariance * jac.transpose();
  out.covariance = 0.5 * (cov + cov.transpose());

  // contraction: delta_p = mu(p, control) - mu(p, intervention)
  Eigen::MatrixXd contract = Eigen::MatrixXd::Zero(n_pairs, 2 * n_pairs);
  for (int pi = 0; pi < n_pairs; ++pi) {
    contract(pi, 2 * pi) = 1.0;
    contract(pi, 2 * pi + 1) = -1.0;
  }
  Eigen::MatrixXd dcov = contract * out.covariance * contract.transpose();
  out.delta_covariance = 0.5 * (dcov + dcov.transpose());

  out.deltas.reserve(n_pairs);
  for (int pi = 0; pi < n_pairs; ++pi) {
    PairSummary s;
    s.pair_id = fit.pair_ids[pi];
    s.delta = out.mu(pi, 0) - out.mu(pi, 1);
    s.variance = out.delta_covariance(pi, pi);
    s.kind = SummaryKind::Calibrated;
    out.deltas.push_back(s);
  }
  return out;
}

}  // namespace paircal
