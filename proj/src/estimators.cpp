#include "paircal/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "paircal/detail/brent.hpp"
#include "paircal/detail/stats.hpp"

namespace paircal {

namespace {

constexpr double kZ95 = 1.96;
constexpr double kChi2_95 = 3.84;  // chi-square(1) 95% cutoff
constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<double> deltas_of(std::span<const PairSummary> s) {
  std::vector<double> d(s.size());
  for (size_t i = 0; i < s.size(); ++i) d[i] = s[i].delta;
  return d;
}

void check_inputs(std::span<const PairSummary> s) {
  if (s.size() < 2)
    throw Error(ErrorCode::TooFewPairs,
                "second-level inference needs at least 2 pair summaries, got " +
                    std::to_string(s.size()));
  for (const auto& x : s)
    if (x.variance < 0.0)
      throw Error(ErrorCode::NegativeVariance,
                  "pair '" + x.pair_id + "' has negative variance");
}

/// Marginal model delta_hat ~ N(effect, V + tau2 I) with V either diagonal
/// (pair variances) or a full covariance. Precomputes the eigendecomposition
/// in the full case so every tau2 evaluation is O(N) after a rotation.
class MarginalModel {
 public:
  MarginalModel(std::span<const PairSummary> s,
                const std::optional<Eigen::MatrixXd>& full_cov) {
    const int n = static_cast<int>(s.size());
    Eigen::VectorXd d(n);
    for (int i = 0; i < n; ++i) d[i] = s[i].delta;
    if (full_cov) {
      if (full_cov->rows() != n || full_cov->cols() != n)
        throw Error(ErrorCode::SchemaMismatch,
                    "full covariance dimension does not match summary count");
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(*full_cov);
      lambda_ = es.eigenvalues();
      // floor roundoff-negative eigenvalues so tau2 = 0 stays evaluable
      const double floor = 1e-14 * std::max(1.0, lambda_.cwiseAbs().maxCoeff());
      for (int i = 0; i < n; ++i)
        if (lambda_[i] < floor) lambda_[i] = floor;
      // rotate data and the ones vector into the eigenbasis
      d_rot_ = es.eigenvectors().transpose() * d;
      ones_rot_ = es.eigenvectors().transpose() * Eigen::VectorXd::Ones(n);
    } else {
      lambda_.resize(n);
      for (int i = 0; i < n; ++i) lambda_[i] = s[i].variance;
      d_rot_ = d;
      ones_rot_ = Eigen::VectorXd::Ones(n);
    }
    sample_var_ = detail::sample_variance(
        std::span<const double>(d.data(), static_cast<size_t>(n)));
    mean_ = d.mean();
  }

  int n() const { return static_cast<int>(lambda_.size()); }
  double sample_variance() const { return sample_var_; }
  double mean_delta() const { return mean_; }
  double min_variance() const { return lambda_.minCoeff(); }

  struct Moments {
    double log_det = 0.0;  // log|V + tau2 I|
    double u = 0.0;        // 1' W 1
    double b = 0.0;        // 1' W d
    double q = 0.0;        // d' W d
    bool valid = false;
  };

  Moments moments(double tau2) const {
    Moments m;
    for (int i = 0; i < lambda_.size(); ++i) {
      const double s2 = lambda_[i] + tau2;
      if (!(s2 > 0.0)) return m;  // singular total variance
      m.log_det += std::log(s2);
      const double w = 1.0 / s2;
      m.u += w * ones_rot_[i] * ones_rot_[i];
      m.b += w * ones_rot_[i] * d_rot_[i];
      m.q += w * d_rot_[i] * d_rot_[i];
    }
    m.valid = m.u > 0.0;
    return m;
  }

  double profile_effect(double tau2) const {
    const Moments m = moments(tau2);
    return m.b / m.u;
  }

  double neg_log_lik(double effect, double tau2) const {
    const Moments m = moments(tau2);
    if (!m.valid) return kInf;
    const double quad = m.q - 2.0 * effect * m.b + effect * effect * m.u;
    return 0.5 * (m.log_det + quad +
                  n() * std::log(2.0 * std::acos(-1.0)));
  }

  /// Negative log-likelihood at the closed-form profile effect.
  double profile_neg_log_lik(double tau2) const {
    const Moments m = moments(tau2);
    if (!m.valid) return kInf;
    const double quad = m.q - m.b * m.b / m.u;
    return 0.5 * (m.log_det + quad + n() * std::log(2.0 * std::acos(-1.0)));
  }

  /// Observed-information standard error of the effect at (effect, tau2).
  /// Uses the joint 2x2 information when tau2 is interior and the matrix is
  /// positive definite; otherwise conditions on tau2.
  double observed_info_se(double effect, double tau2) const {
    double i_dd = 0.0, i_dt = 0.0, tr_w2 = 0.0, r_w3_r = 0.0;
    for (int i = 0; i < lambda_.size(); ++i) {
      const double w = 1.0 / (lambda_[i] + tau2);
      const double r = d_rot_[i] - effect * ones_rot_[i];
      i_dd += w * ones_rot_[i] * ones_rot_[i];
      i_dt += w * w * ones_rot_[i] * r;
      tr_w2 += w * w;
      r_w3_r += w * w * w * r * r;
    }
    const double i_tt = r_w3_r - 0.5 * tr_w2;
    if (tau2 > 0.0) {
      const double det = i_dd * i_tt - i_dt * i_dt;
      if (i_dd > 0.0 && i_tt > 0.0 && det > 0.0) return std::sqrt(i_tt / det);
    }
    return i_dd > 0.0 ? std::sqrt(1.0 / i_dd) : 0.0;
  }

 private:
  Eigen::VectorXd lambda_;
  Eigen::VectorXd d_rot_;
  Eigen::VectorXd ones_rot_;
  double sample_var_ = 0.0;
  double mean_ = 0.0;
};

struct Tau2Fit {
  double tau2 = 0.0;
  double neg_log_lik = 0.0;
};

Tau2Fit maximize_over_tau2(const MarginalModel& model) {
  const double hi = std::max(10.0 * model.sample_variance(), 1e-8);
  auto f = [&](double t2) { return model.profile_neg_log_lik(t2); };
  auto [t2, val] = detail::grid_then_brent(f, 0.0, hi, 129, 1e-10);
  // project to the boundary when it is at least as good
  const double at_zero = f(0.0);
  if (at_zero <= val) return {0.0, at_zero};
  return {t2, val};
}

EffectEstimate wald_estimate(EstimatorMethod method, double point, double se,
                             double tau2) {
  EffectEstimate e;
  e.method = method;
  e.point = point;
  e.se = se;
  e.ci_lo = point - kZ95 * se;
  e.ci_hi = point + kZ95 * se;
  e.tau2 = tau2;
  e.p_value = detail::two_sided_normal_p(point, se);
  return e;
}

}  // namespace

const char* estimator_method_name(EstimatorMethod m) {
  switch (m) {
    case EstimatorMethod::FirstLevelMLE: return "first_level_mle";
    case EstimatorMethod::TwoLevelMLE: return "two_level_mle";
    case EstimatorMethod::ProfileMLE: return "profile_mle";
    case EstimatorMethod::BayesUniformShrinkage: return "bayes_uniform_shrinkage";
  }
  return "unknown";
}

EffectEstimate first_level_mle(std::span<const PairSummary> summaries) {
  check_inputs(summaries);
  const std::vector<double> d = deltas_of(summaries);
  const size_t n = d.size();
  const double point = detail::mean(d);

  // delete-one-pair jackknife
  double total = 0.0;
  for (double x : d) total += x;
  std::vector<double> loo(n);
  double loo_mean = 0.0;
  for (size_t i = 0; i < n; ++i) {
    loo[i] = (total - d[i]) / static_cast<double>(n - 1);
    loo_mean += loo[i];
  }
  loo_mean /= static_cast<double>(n);
  double ss = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double dev = loo[i] - loo_mean;
    ss += dev * dev;
  }
  const double se =
      std::sqrt(ss * static_cast<double>(n - 1) / static_cast<double>(n));

  EffectEstimate e = wald_estimate(EstimatorMethod::FirstLevelMLE, point, se, 0.0);
  e.tau2.reset();
  return e;
}

double marginal_log_likelihood(std::span<const PairSummary> summaries,
                               const std::optional<Eigen::MatrixXd>& full_cov,
                               double effect, double tau2) {
  check_inputs(summaries);
  return -MarginalModel(summaries, full_cov).neg_log_lik(effect, tau2);
}

EffectEstimate two_level_mle(std::span<const PairSummary> summaries,
                             const std::optional<Eigen::MatrixXd>& full_cov) {
  check_inputs(summaries);
  const MarginalModel model(summaries, full_cov);

  if (model.sample_variance() == 0.0 && model.min_variance() <= 0.0) {
    // all deltas identical with zero first-level variance: degenerate fit
    EffectEstimate e = wald_estimate(EstimatorMethod::TwoLevelMLE,
                                     model.mean_delta(), 0.0, 0.0);
    return e;
  }

  const Tau2Fit t = maximize_over_tau2(model);
  const double point = model.profile_effect(t.tau2);
  const double se = model.observed_info_se(point, t.tau2);
  return wald_estimate(EstimatorMethod::TwoLevelMLE, point, se, t.tau2);
}

EffectEstimate profile_mle(std::span<const PairSummary> summaries,
                           const std::optional<Eigen::MatrixXd>& full_cov) {
  check_inputs(summaries);
  const MarginalModel model(summaries, full_cov);
  const EffectEstimate mle = two_level_mle(summaries, full_cov);

  // profile log-likelihood in the effect: maximize over tau2 at fixed effect
  auto profile_nll = [&](double effect) {
    const double spread = effect - model.mean_delta();
    const double hi =
        std::max(10.0 * (model.sample_variance() + spread * spread), 1e-8);
    auto f = [&](double t2) { return model.neg_log_lik(effect, t2); };
    auto [t2, val] = detail::grid_then_brent(f, 0.0, hi, 65, 1e-10);
    const double at_zero = f(0.0);
    return std::min(val, at_zero);
  };

  const double nll_hat = profile_nll(mle.point);
  const double target = nll_hat + 0.5 * kChi2_95;

  // expand outward until the likelihood-ratio boundary is bracketed, then
  // bisect to 1e-8
  auto solve_side = [&](double direction) {
    double step = std::max({mle.se.value_or(0.0), std::sqrt(model.sample_variance()),
                            1e-3});
    double inner = mle.point;
    double outer = mle.point + direction * step;
    int guard = 0;
    while (profile_nll(outer) < target && guard++ < 200) {
      inner = outer;
      step *= 2.0;
      outer = mle.point + direction * step;
    }
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (inner + outer);
      if (std::fabs(outer - inner) < 1e-8) return mid;
      if (profile_nll(mid) < target) inner = mid;
      else outer = mid;
    }
    return 0.5 * (inner + outer);
  };

  EffectEstimate e;
  e.method = EstimatorMethod::ProfileMLE;
  e.point = mle.point;
  e.tau2 = mle.tau2;
  if (model.sample_variance() == 0.0 && model.min_variance() <= 0.0) {
    e.ci_lo = e.ci_hi = e.point;
    return e;
  }
  e.ci_lo = solve_side(-1.0);
  e.ci_hi = solve_side(+1.0);
  return e;
}

EffectEstimate bayes_uniform_shrinkage(std::span<const PairSummary> summaries,
                                       const std::optional<Eigen::MatrixXd>& full_cov,
                                       const BayesConfig& config) {
  check_inputs(summaries);
  const MarginalModel model(summaries, full_cov);

  double v0 = 0.0;
  if (config.v0) {
    v0 = *config.v0;
    if (v0 < 0.0) throw Error(ErrorCode::InvalidConfig, "v0 must be nonnegative");
  } else {
    // harmonic mean of the pair variances
    double inv_sum = 0.0;
    bool any_zero = false;
    for (const auto& s : summaries) {
      if (s.variance <= 0.0) any_zero = true;
      else inv_sum += 1.0 / s.variance;
    }
    if (any_zero || inv_sum <= 0.0)
      throw Error(ErrorCode::DegenerateVariances,
                  "uniform shrinkage prior needs positive pair variances "
                  "(or an explicit v0)");
    v0 = static_cast<double>(summaries.size()) / inv_sum;
  }

  EffectEstimate e;
  e.method = EstimatorMethod::BayesUniformShrinkage;

  if (v0 == 0.0) {
    // prior collapses to a point mass at tau2 = 0
    const MarginalModel::Moments m = model.moments(0.0);
    if (!m.valid)
      throw Error(ErrorCode::DegenerateVariances,
                  "point-mass prior at tau2=0 needs positive pair variances");
    const double point = m.b / m.u;
    const double sd = std::sqrt(1.0 / m.u);
    e.point = point;
    e.se = sd;
    e.ci_lo = point - 1.959963984540054 * sd;
    e.ci_hi = point + 1.959963984540054 * sd;
    e.tau2 = 0.0;
    const double p_neg = detail::normal_cdf((0.0 - point) / sd);
    e.p_value = 2.0 * std::min(p_neg, 1.0 - p_neg);
    return e;
  }

  // Integration runs in the shrinkage variable s = v0/(v0+tau2), on which the
  // prior is uniform; s_min equals the prior tail mass allowed past tau2_max.
  const double s_min = std::max(config.prior_tail_mass, 1e-12);
  auto tau2_of = [&](double s) { return v0 * (1.0 - s) / s; };

  // log marginal of tau2 with the effect integrated out under a flat prior
  auto log_marginal = [&](double tau2) {
    const MarginalModel::Moments m = model.moments(tau2);
    if (!m.valid) return -kInf;
    const double ssw = m.q - m.b * m.b / m.u;
    return -0.5 * (m.log_det + ssw + std::log(m.u) +
                   (model.n() - 1) * std::log(2.0 * std::acos(-1.0)));
  };

  // stabilize the exponentials around the peak
  double log_scale = -kInf;
  for (int i = 0; i <= 256; ++i) {
    const double s = s_min + (1.0 - s_min) * i / 256.0;
    log_scale = std::max(log_scale, log_marginal(tau2_of(s)));
  }

  auto weight = [&](double s) { return std::exp(log_marginal(tau2_of(s)) - log_scale); };

  // adaptive Simpson on [a, b]
  struct Simpson {
    static double run(const std::function<double(double)>& f, double a, double b,
                      double fa, double fm, double fb, double whole, double tol,
                      int depth) {
      const double m = 0.5 * (a + b);
      const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
      const double flm = f(lm), frm = f(rm);
      const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
      const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
      if (depth <= 0 || std::fabs(left + right - whole) < 15.0 * tol)
        return left + right + (left + right - whole) / 15.0;
      return run(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
             run(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
    }
    static double integrate(const std::function<double(double)>& f, double a,
                            double b, double tol) {
      // pre-split into panels so narrow peaks are not stepped over
      const int panels = 32;
      double total = 0.0;
      for (int i = 0; i < panels; ++i) {
        const double x0 = a + (b - a) * i / panels;
        const double x1 = a + (b - a) * (i + 1) / panels;
        const double xm = 0.5 * (x0 + x1);
        const double f0 = f(x0), f1 = f(x1), fm = f(xm);
        const double whole = (x1 - x0) / 6.0 * (f0 + 4.0 * fm + f1);
        total += run(f, x0, x1, f0, fm, f1, whole, tol / panels, 40);
      }
      return total;
    }
  };

  auto integrate = [&](const std::function<double(double)>& g) {
    auto f = [&](double s) { return weight(s) * g(s); };
    return Simpson::integrate(f, s_min, 1.0, config.quad_rel_tol);
  };

  const double z_norm = integrate([](double) { return 1.0; });
  if (!(z_norm > 0.0))
    throw Error(ErrorCode::DegenerateVariances, "posterior normalization is zero");

  const double post_mean = integrate([&](double s) {
                             return model.profile_effect(tau2_of(s));
                           }) / z_norm;
  const double post_tau2 = integrate([&](double s) { return tau2_of(s); }) / z_norm;
  const double post_m2 = integrate([&](double s) {
                           const MarginalModel::Moments m = model.moments(tau2_of(s));
                           const double mu = m.b / m.u;
                           return mu * mu + 1.0 / m.u;
                         }) / z_norm;
  const double post_sd = std::sqrt(std::max(0.0, post_m2 - post_mean * post_mean));

  // posterior CDF of the effect: normal mixture over tau2
  auto post_cdf = [&](double z) {
    return integrate([&](double s) {
             const MarginalModel::Moments m = model.moments(tau2_of(s));
             return detail::normal_cdf((z - m.b / m.u) * std::sqrt(m.u));
           }) / z_norm;
  };
  auto quantile = [&](double prob) {
    double lo = post_mean - 12.0 * post_sd - 1e-9;
    double hi = post_mean + 12.0 * post_sd + 1e-9;
    while (post_cdf(lo) > prob) lo -= 10.0 * post_sd;
    while (post_cdf(hi) < prob) hi += 10.0 * post_sd;
    for (int it = 0; it < 200 && hi - lo > 1e-9 * (1.0 + std::fabs(post_mean));
         ++it) {
      const double mid = 0.5 * (lo + hi);
      if (post_cdf(mid) < prob) lo = mid;
      else hi = mid;
    }
    return 0.5 * (lo + hi);
  };

  e.point = post_mean;
  e.se = post_sd;
  e.ci_lo = quantile(0.025);
  e.ci_hi = quantile(0.975);
  e.tau2 = post_tau2;
  const double p_neg = post_cdf(0.0);
  e.p_value = 2.0 * std::min(p_neg, 1.0 - p_neg);
  return e;
}

}  // namespace paircal
