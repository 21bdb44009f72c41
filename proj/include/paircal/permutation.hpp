#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "paircal/parallel.hpp"
#include "paircal/study.hpp"

namespace paircal {

/// Test statistic recomputed for every sign-flip pattern. The calibrated
/// first-level statistic is the unweighted mean of the (sign-flipped)
/// calibrated deltas; flipping a calibrated delta is the label-swap image
/// guaranteed by the calibration sign property.
enum class PermutationStatistic {
  UnweightedMean,
  TwoLevelMLE,
  FirstLevelCalibratedMean,
};

const char* permutation_statistic_name(PermutationStatistic s);

struct StatisticSpec {
  PermutationStatistic kind = PermutationStatistic::UnweightedMean;
  std::vector<double> variances;            // required for TwoLevelMLE
  std::optional<Eigen::MatrixXd> full_cov;  // optional joint covariance;
                                            // flips transform it as E*Sigma*E
};

enum class PermutationMode { Exact, MonteCarlo };

struct PermutationResult {
  double p_value = 1.0;
  std::uint64_t n_permutations = 0;
  PermutationMode mode = PermutationMode::Exact;
  double statistic_observed = 0.0;
  std::optional<std::vector<double>> statistic_distribution;
};

/// Enumerates all 2^N within-pair label flips (N <= 25) and reports the
/// two-sided p-value: the proportion of flips whose |statistic| is at least
/// the observed |statistic|, observed arrangement included. Ties count as
/// exceedances.
PermutationResult permute_exact(std::span<const double> deltas,
                                const StatisticSpec& statistic,
                                Exec exec = Exec::Parallel,
                                bool keep_distribution = false);

/// Monte Carlo version for large N: samples sign vectors uniformly from a
/// seeded counter-based stream (draw i derives its bits from (seed, i), so
/// results do not depend on thread schedule), and applies the add-one
/// estimator (b+1)/(m+1).
PermutationResult permute_monte_carlo(std::span<const double> deltas,
                                      const StatisticSpec& statistic,
                                      std::int64_t n_draws, std::uint64_t seed,
                                      Exec exec = Exec::Parallel);

}  // namespace paircal
