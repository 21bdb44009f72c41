#include "paircal/permutation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "paircal/detail/brent.hpp"
#include "paircal/detail/stats.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace paircal {

namespace {

constexpr int kExactCap = 25;         // 2^25 ~ 3.3e7 statistic evaluations
constexpr int kDistributionCap = 20;  // retained distributions stay under 8 MiB
constexpr int kMaskCap = 64;          // sign vectors are packed into one word

/// Evaluates the chosen statistic on sign-flipped deltas without per-call
/// allocation. Copyable so each worker thread owns its scratch buffers.
class StatisticEvaluator {
 public:
  StatisticEvaluator(std::span<const double> deltas, const StatisticSpec& spec)
      : deltas_(deltas.begin(), deltas.end()), kind_(spec.kind) {
    const int n = static_cast<int>(deltas_.size());
    flipped_.resize(n);
    if (kind_ != PermutationStatistic::TwoLevelMLE) return;

    if (spec.full_cov) {
      if (spec.full_cov->rows() != n || spec.full_cov->cols() != n)
        throw Error(ErrorCode::SchemaMismatch,
                    "full covariance dimension does not match delta count");
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(*spec.full_cov);
      lambda_.assign(es.eigenvalues().data(), es.eigenvalues().data() + n);
      const double floor =
          1e-14 * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
      for (double& l : lambda_)
        if (l < floor) l = floor;
      qt_ = es.eigenvectors().transpose();
      Eigen::Map<const Eigen::VectorXd> d(deltas_.data(), n);
      const Eigen::VectorXd z = qt_ * d;
      z_.assign(z.data(), z.data() + n);
      eps_rot_.resize(n);
      eps_.resize(n);
      full_ = true;
    } else {
      if (spec.variances.size() != deltas_.size())
        throw Error(ErrorCode::SchemaMismatch,
                    "variance count does not match delta count for the "
                    "two-level statistic");
      for (double v : spec.variances)
        if (v < 0.0)
          throw Error(ErrorCode::NegativeVariance,
                      "two-level statistic requires nonnegative variances");
      lambda_ = spec.variances;
    }
  }

  int size() const { return static_cast<int>(deltas_.size()); }

  double operator()(std::uint64_t mask) {
    const int n = size();
    for (int i = 0; i < n; ++i)
      flipped_[i] = (mask >> i) & 1u ? -deltas_[i] : deltas_[i];
    if (kind_ != PermutationStatistic::TwoLevelMLE) {
      double s = 0.0;
      for (double x : flipped_) s += x;
      return s / static_cast<double>(n);
    }
    return two_level_point(mask);
  }

 private:
  // Two-level MLE on the flipped data, profiling the effect in closed form
  // and maximizing over tau2 with the same bracketed grid+Brent scheme the
  // estimator module uses. In full-covariance mode the flip E*Sigma*E is
  // absorbed by replacing the ones vector with the sign vector in the fixed
  // eigenbasis of Sigma.
  double profile_nll(double tau2) const {
    const int n = size();
    double log_det = 0.0, u = 0.0, b = 0.0, q = 0.0;
    for (int i = 0; i < n; ++i) {
      const double s2 = lambda_[i] + tau2;
      if (!(s2 > 0.0)) return std::numeric_limits<double>::infinity();
      log_det += std::log(s2);
      const double w = 1.0 / s2;
      if (full_) {
        u += w * eps_rot_[i] * eps_rot_[i];
        b += w * eps_rot_[i] * z_[i];
        q += w * z_[i] * z_[i];
      } else {
        u += w;
        b += w * flipped_[i];
        q += w * flipped_[i] * flipped_[i];
      }
    }
    if (!(u > 0.0)) return std::numeric_limits<double>::infinity();
    return 0.5 * (log_det + q - b * b / u);
  }

  double weighted_mean(double tau2) const {
    const int n = size();
    double u = 0.0, b = 0.0;
    for (int i = 0; i < n; ++i) {
      const double w = 1.0 / (lambda_[i] + tau2);
      if (full_) {
        u += w * eps_rot_[i] * eps_rot_[i];
        b += w * eps_rot_[i] * z_[i];
      } else {
        u += w;
        b += w * flipped_[i];
      }
    }
    return b / u;
  }

  double two_level_point(std::uint64_t mask) {
    const int n = size();
    if (full_) {
      for (int i = 0; i < n; ++i)
        eps_[i] = (mask >> i) & 1u ? -1.0 : 1.0;
      Eigen::Map<const Eigen::VectorXd> e(eps_.data(), n);
      Eigen::Map<Eigen::VectorXd>(eps_rot_.data(), n) = qt_ * e;
    }
    const double var = detail::sample_variance(flipped_);
    const double hi = std::max(10.0 * var, 1e-8);
    auto f = [&](double t2) { return profile_nll(t2); };
    auto [t2, val] = detail::grid_then_brent(f, 0.0, hi, 129, 1e-10);
    if (f(0.0) <= val) t2 = 0.0;
    return weighted_mean(t2);
  }

  std::vector<double> deltas_;
  std::vector<double> flipped_;
  PermutationStatistic kind_;
  bool full_ = false;
  std::vector<double> lambda_;  // variances, or eigenvalues of Sigma
  Eigen::MatrixXd qt_;
  std::vector<double> z_;        // Q' * deltas
  std::vector<double> eps_;      // sign vector scratch
  std::vector<double> eps_rot_;  // Q' * eps scratch
};

/// Serial reference kernel: counts |T(mask)| >= |T_obs| over [begin, end).
std::uint64_t count_exceedances_serial(StatisticEvaluator eval,
                                       std::uint64_t begin, std::uint64_t end,
                                       double abs_observed,
                                       std::vector<double>* distribution) {
  std::uint64_t count = 0;
  for (std::uint64_t mask = begin; mask < end; ++mask) {
    const double t = eval(mask);
    if (std::fabs(t) >= abs_observed) ++count;
    if (distribution) (*distribution)[mask] = t;
  }
  return count;
}

/// OpenMP kernel over the same range; each thread owns an evaluator copy.
/// The exceedance count is an integer reduction, so the result is
/// schedule-independent and identical to the serial kernel.
std::uint64_t count_exceedances_parallel(const StatisticEvaluator& eval,
                                         std::uint64_t begin, std::uint64_t end,
                                         double abs_observed,
                                         std::vector<double>* distribution) {
#ifdef _OPENMP
  std::uint64_t count = 0;
  const int threads = max_threads();
#pragma omp parallel num_threads(threads) reduction(+ : count)
  {
    StatisticEvaluator local = eval;
#pragma omp for schedule(static)
    for (std::int64_t mask = static_cast<std::int64_t>(begin);
         mask < static_cast<std::int64_t>(end); ++mask) {
      const double t = local(static_cast<std::uint64_t>(mask));
      if (std::fabs(t) >= abs_observed) ++count;
      if (distribution) (*distribution)[static_cast<std::uint64_t>(mask)] = t;
    }
  }
  return count;
#else
  return count_exceedances_serial(eval, begin, end, abs_observed, distribution);
#endif
}

/// Sign mask for Monte Carlo draw `index`, derived from (seed, index) alone.
std::uint64_t draw_mask(std::uint64_t seed, std::uint64_t index, int n_bits) {
  std::uint64_t mask = detail::substream_seed(seed, index);
  if (n_bits < 64) mask &= (std::uint64_t{1} << n_bits) - 1;
  return mask;
}

}  // namespace

const char* permutation_statistic_name(PermutationStatistic s) {
  switch (s) {
    case PermutationStatistic::UnweightedMean: return "unweighted_mean";
    case PermutationStatistic::TwoLevelMLE: return "two_level_mle";
    case PermutationStatistic::FirstLevelCalibratedMean:
      return "first_level_calibrated_mean";
  }
  return "unknown";
}

PermutationResult permute_exact(std::span<const double> deltas,
                                const StatisticSpec& statistic, Exec exec,
                                bool keep_distribution) {
  const int n = static_cast<int>(deltas.size());
  if (n < 1)
    throw Error(ErrorCode::TooFewPairs, "permutation test needs at least one delta");
  if (n > kExactCap)
    throw Error(ErrorCode::TooManyPairs,
                "exact enumeration capped at N=" + std::to_string(kExactCap) +
                    " (2^N evaluations); use the Monte Carlo mode");
  if (keep_distribution && n > kDistributionCap)
    throw Error(ErrorCode::TooManyPairs,
                "statistic distribution retention capped at N=" +
                    std::to_string(kDistributionCap));

  StatisticEvaluator eval(deltas, statistic);
  const std::uint64_t total = std::uint64_t{1} << n;
  const double observed = eval(0);
  const double abs_obs = std::fabs(observed);

  std::vector<double> dist;
  if (keep_distribution) dist.resize(total);
  std::vector<double>* dist_ptr = keep_distribution ? &dist : nullptr;

  const std::uint64_t count =
      exec == Exec::Parallel
          ? count_exceedances_parallel(eval, 0, total, abs_obs, dist_ptr)
          : count_exceedances_serial(eval, 0, total, abs_obs, dist_ptr);

  PermutationResult out;
  out.mode = PermutationMode::Exact;
  out.n_permutations = total;
  out.statistic_observed = observed;
  out.p_value = static_cast<double>(count) / static_cast<double>(total);
  if (keep_distribution) out.statistic_distribution = std::move(dist);
  return out;
}

PermutationResult permute_monte_carlo(std::span<const double> deltas,
                                      const StatisticSpec& statistic,
                                      std::int64_t n_draws, std::uint64_t seed,
                                      Exec exec) {
  const int n = static_cast<int>(deltas.size());
  if (n < 1)
    throw Error(ErrorCode::TooFewPairs, "permutation test needs at least one delta");
  if (n > kMaskCap)
    throw Error(ErrorCode::TooManyPairs,
                "sign vectors are packed into 64-bit words; at most 64 pairs");
  if (n_draws < 1000)
    throw Error(ErrorCode::InvalidConfig,
                "Monte Carlo permutation needs at least 1000 draws");

  StatisticEvaluator eval(deltas, statistic);
  const double observed = eval(0);
  const double abs_obs = std::fabs(observed);

  std::uint64_t exceed = 0;
  if (exec == Exec::Parallel) {
#ifdef _OPENMP
    const int threads = max_threads();
#pragma omp parallel num_threads(threads) reduction(+ : exceed)
    {
      StatisticEvaluator local = eval;
#pragma omp for schedule(static)
      for (std::int64_t i = 0; i < n_draws; ++i)
        if (std::fabs(local(draw_mask(seed, static_cast<std::uint64_t>(i), n))) >=
            abs_obs)
          ++exceed;
    }
#else
    for (std::int64_t i = 0; i < n_draws; ++i)
      if (std::fabs(eval(draw_mask(seed, static_cast<std::uint64_t>(i), n))) >= abs_obs)
        ++exceed;
#endif
  } else {
    for (std::int64_t i = 0; i < n_draws; ++i)
      if (std::fabs(eval(draw_mask(seed, static_cast<std::uint64_t>(i), n))) >= abs_obs)
        ++exceed;
  }

  PermutationResult out;
  out.mode = PermutationMode::MonteCarlo;
  // the add-one estimator counts the observed arrangement as one more draw
  out.n_permutations = static_cast<std::uint64_t>(n_draws) + 1;
  out.statistic_observed = observed;
  out.p_value = (static_cast<double>(exceed) + 1.0) /
                (static_cast<double>(n_draws) + 1.0);
  return out;
}

}  // namespace paircal
