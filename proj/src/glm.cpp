#include "paircal/glm.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace paircal {

double inverse_link(LinkFunction link, double eta) {
  if (link == LinkFunction::Identity) return eta;
  return 1.0 / (1.0 + std::exp(-eta));
}

double inverse_link_derivative(LinkFunction link, double eta) {
  if (link == LinkFunction::Identity) return 1.0;
  const double mu = inverse_link(LinkFunction::Logit, eta);
  return mu * (1.0 - mu);
}

Eigen::VectorXd encode_covariates(const CovariateSchema& schema,
                                  const CovariateVector& cov) {
  int n_cols = static_cast<int>(schema.continuous_names.size());
  for (const auto& levels : schema.categorical_levels)
    n_cols += std::max<int>(0, static_cast<int>(levels.size()) - 1);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n_cols);
  int j = 0;
  for (double x : cov.continuous) out[j++] = x;
  for (size_t c = 0; c < schema.categorical_names.size(); ++c) {
    const auto& levels = schema.categorical_levels[c];
    // reference level = first declared level, omitted
    for (size_t l = 1; l < levels.size(); ++l)
      out[j++] = (cov.categorical[c] == levels[l]) ? 1.0 : 0.0;
  }
  return out;
}

namespace {

std::vector<std::string> covariate_column_names(const CovariateSchema& schema) {
  std::vector<std::string> names;
  for (const auto& n : schema.continuous_names) names.push_back(n);
  for (size_t c = 0; c < schema.categorical_names.size(); ++c) {
    const auto& levels = schema.categorical_levels[c];
    for (size_t l = 1; l < levels.size(); ++l)
      names.push_back(schema.categorical_names[c] + "=" + levels[l]);
  }
  return names;
}

void check_full_rank(const DesignMatrix& d) {
  if (d.X.rows() < d.X.cols()) {
    throw Error(ErrorCode::RankDeficient,
                "design has " + std::to_string(d.X.rows()) + " rows but " +
                    std::to_string(d.X.cols()) + " columns");
  }
  Eigen::BDCSVD<Eigen::MatrixXd> svd(d.X);
  const auto& sv = svd.singularValues();
  const double tol = 1e-8 * sv[0];
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv[i] > tol) ++rank;
  if (rank == d.X.cols()) return;

  // Name the offending columns via the pivoted QR permutation: the columns
  // pivoted past the numerical rank are the dependent set.
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(d.X);
  qr.setThreshold(1e-8);
  const auto perm = qr.colsPermutation().indices();
  std::ostringstream msg;
  msg << "design matrix is rank deficient (rank " << rank << " of "
      << d.X.cols() << "); dependent columns:";
  for (int i = rank; i < d.X.cols(); ++i) msg << " '" << d.column_names[perm[i]] << "'";
  throw Error(ErrorCode::RankDeficient, msg.str());
}

}  // namespace

DesignMatrix build_design(const Study& study, bool include_covariates) {
  DesignMatrix d;
  const int n_pairs = static_cast<int>(study.pairs.size());
  d.n_cells = 2 * n_pairs;

  if (include_covariates) d.schema = study.covariate_schema;
  std::vector<std::string> cov_names = covariate_column_names(d.schema);
  d.n_covariate_cols = static_cast<int>(cov_names.size());

  // pairs in id order
  std::vector<int> order(n_pairs);
  for (int i = 0; i < n_pairs; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return study.pairs[a].pair_id < study.pairs[b].pair_id;
  });

  long n_rows = 0;
  for (const auto& p : study.pairs)
    n_rows += static_cast<long>(p.control.records.size() + p.intervention.records.size());

  d.X = Eigen::MatrixXd::Zero(n_rows, d.n_cells + d.n_covariate_cols);
  d.outcomes.resize(n_rows);
  d.row_cell.reserve(n_rows);

  long row = 0;
  for (int pi = 0; pi < n_pairs; ++pi) {
    const Pair& pair = study.pairs[order[pi]];
    d.pair_ids.push_back(pair.pair_id);
    for (ArmRole role : {ArmRole::Control, ArmRole::Intervention}) {
      const int cell = d.cell_column(pi, role);
      for (const PatientRecord& rec : pair.arm(role).records) {
        d.X(row, cell) = 1.0;
        if (d.n_covariate_cols > 0) {
          d.X.row(row).tail(d.n_covariate_cols) =
              encode_covariates(d.schema, rec.covariates).transpose();
        }
        d.outcomes[row] = rec.outcome;
        d.row_cell.push_back(cell);
        ++row;
      }
    }
  }

  d.column_names.resize(d.n_cells + d.n_covariate_cols);
  for (int pi = 0; pi < n_pairs; ++pi) {
    d.column_names[2 * pi] = "cell[" + d.pair_ids[pi] + ",control]";
    d.column_names[2 * pi + 1] = "cell[" + d.pair_ids[pi] + ",intervention]";
  }
  for (int j = 0; j < d.n_covariate_cols; ++j)
    d.column_names[d.n_cells + j] = cov_names[j];
  for (size_t c = 0; c < d.schema.categorical_names.size(); ++c) {
    const auto& levels = d.schema.categorical_levels[c];
    if (!levels.empty())
      d.dropped_reference_levels.push_back(d.schema.categorical_names[c] + "=" +
                                           levels[0]);
  }

  check_full_rank(d);
  return d;
}

namespace {

Eigen::MatrixXd sandwich_covariance(const Eigen::MatrixXd& jac,
                                    const Eigen::VectorXd& resid,
                                    const Eigen::VectorXd& w,
                                    const std::vector<int>& row_cell,
                                    int n_cells, const FitOptions& opt) {
  const long n = jac.rows();
  const int p = static_cast<int>(jac.cols());

  Eigen::MatrixXd jtwj = Eigen::MatrixXd::Zero(p, p);
  for (long i = 0; i < n; ++i)
    jtwj.noalias() += w[i] * jac.row(i).transpose() * jac.row(i);
  Eigen::MatrixXd bread = jtwj.ldlt().solve(Eigen::MatrixXd::Identity(p, p));

  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(p, p);
  if (opt.cluster_robust) {
    // score sums per (pair, arm) cell
    Eigen::MatrixXd cell_scores = Eigen::MatrixXd::Zero(n_cells, p);
    for (long i = 0; i < n; ++i)
      cell_scores.row(row_cell[i]) += w[i] * resid[i] * jac.row(i);
    meat = cell_scores.transpose() * cell_scores;
  } else {
    for (long i = 0; i < n; ++i) {
      const double s = w[i] * resid[i];
      meat.noalias() += (s * s) * jac.row(i).transpose() * jac.row(i);
    }
  }
  if (opt.sandwich == SandwichFlavor::HC1 && n > p)
    meat *= static_cast<double>(n) / static_cast<double>(n - p);

  Eigen::MatrixXd cov = bread * meat * bread;
  return 0.5 * (cov + cov.transpose());
}

}  // namespace

CoefficientFit fit(const DesignMatrix& design, const Eigen::VectorXd& outcomes,
                   LinkFunction link, const FitOptions& options) {
  const long n = design.X.rows();
  const int p = static_cast<int>(design.X.cols());
  if (outcomes.size() != n)
    throw Error(ErrorCode::SchemaMismatch,
                "outcome length " + std::to_string(outcomes.size()) +
                    " does not match design rows " + std::to_string(n));

  Eigen::VectorXd w = Eigen::VectorXd::Ones(n);
  if (options.weights) {
    if (options.weights->size() != n)
      throw Error(ErrorCode::SchemaMismatch, "weight length does not match design rows");
    w = *options.weights;
  }

  CoefficientFit out;
  out.link = link;
  out.column_names = design.column_names;
  out.pair_ids = design.pair_ids;
  out.n_cells = design.n_cells;
  out.n_covariate_cols = design.n_covariate_cols;
  out.schema = design.schema;

  if (link == LinkFunction::Identity) {
    const Eigen::MatrixXd wx = w.array().sqrt().matrix().asDiagonal() * design.X;
    const Eigen::VectorXd wy = w.array().sqrt().matrix().asDiagonal() * outcomes;
    out.theta = wx.colPivHouseholderQr().solve(wy);
    const Eigen::VectorXd resid = outcomes - design.X * out.theta;
    out.covariance = sandwich_covariance(design.X, resid, w, design.row_cell,
                                         design.n_cells, options);
    return out;
  }

  // Logit link, constrained to outcomes strictly inside (0,1).
  for (long i = 0; i < n; ++i) {
    if (!(outcomes[i] > 0.0 && outcomes[i] < 1.0))
      throw Error(ErrorCode::DomainError,
                  "logit link requires outcomes strictly in (0,1); row " +
                      std::to_string(i + 1) + " has " + std::to_string(outcomes[i]));
  }

  // Start from logit of cell means, covariate coefficients at zero.
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(p);
  {
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(design.n_cells);
    Eigen::VectorXd cnt = Eigen::VectorXd::Zero(design.n_cells);
    for (long i = 0; i < n; ++i) {
      sum[design.row_cell[i]] += outcomes[i];
      cnt[design.row_cell[i]] += 1.0;
    }
    for (int c = 0; c < design.n_cells; ++c) {
      const double m = std::clamp(sum[c] / cnt[c], 1e-6, 1.0 - 1e-6);
      theta[c] = std::log(m / (1.0 - m));
    }
  }

  std::ostringstream trace;
  double max_change = 0.0;
  int iter = 0;
  Eigen::VectorXd eta(n), mu(n), g(n), resid(n);
  Eigen::MatrixXd jac(n, p);
  for (iter = 1; iter <= options.logit_max_iter; ++iter) {
    eta = design.X * theta;
    for (long i = 0; i < n; ++i) {
      mu[i] = inverse_link(LinkFunction::Logit, eta[i]);
      g[i] = mu[i] * (1.0 - mu[i]);
      resid[i] = outcomes[i] - mu[i];
    }
    jac = g.asDiagonal() * design.X;
    const Eigen::MatrixXd jtwj =
        jac.transpose() * w.asDiagonal() * jac +
        1e-12 * Eigen::MatrixXd::Identity(p, p);
    const Eigen::VectorXd step = jtwj.ldlt().solve(jac.transpose() * (w.asDiagonal() * resid));
    theta += step;
    max_change = step.cwiseAbs().maxCoeff();
    trace << "iter " << iter << " max|dtheta|=" << max_change << "\n";
    if (max_change < options.logit_tol) break;
  }
  if (max_change >= options.logit_tol)
    throw Error(ErrorCode::NoConvergence,
                "logit IRLS did not converge in " + std::to_string(options.logit_max_iter) +
                    " iterations; trace:\n" + trace.str());

  out.theta = theta;
  out.iterations = iter;
  eta = design.X * theta;
  for (long i = 0; i < n; ++i) {
    mu[i] = inverse_link(LinkFunction::Logit, eta[i]);
    g[i] = mu[i] * (1.0 - mu[i]);
    resid[i] = outcomes[i] - mu[i];
  }
  jac = g.asDiagonal() * design.X;
  out.covariance = sandwich_covariance(jac, resid, w, design.row_cell,
                                       design.n_cells, options);
  return out;
}

}  // namespace paircal
