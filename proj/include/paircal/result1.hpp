#pragma once

#include <cstdint>

#include "paircal/parallel.hpp"

namespace paircal {

/// Two-type pair population for the meta-analytic inconsistency construction:
/// the pair estimand is +/-|Z| with the sign tied to which practice type is
/// observed, so the estimand and its sampling variance are dependent while
/// the unweighted average stays centered at zero.
struct Result1Config {
  double sigma2 = 9.0;         // variance multiplier of type-2 practices
  int n_per_arm = 10;          // patients sampled per practice
  std::int64_t num_pairs = 100000;
  std::uint64_t seed = 0;
  // var(delta_p) is treated as known and equal to 1 throughout.
};

/// Closed-form probability limit of the inverse-(total-)variance weighted
/// estimator under the two-type construction. Zero exactly when sigma2 = 1;
/// otherwise its sign is the sign of (1 - sigma2).
double plim_mle(const Result1Config& config);

struct Result1Simulation {
  double estimate = 0.0;        // weighted estimator across simulated pairs
  double mc_se = 0.0;           // delete-block jackknife Monte Carlo SE
  double mean_unweighted = 0.0; // plain average of the simulated deltas
  double mc_se_unweighted = 0.0;
};

/// Draws num_pairs pairs (type 1: delta = -|Z|, v = 2/n; type 2: delta = +|Z|,
/// v = (1+sigma2)/n), adds first-level noise, and evaluates the weighted
/// estimator with known var(delta_p) = 1. Work is sharded into fixed-size
/// chunks with per-chunk seeded streams and merged in chunk order, so the
/// serial and OpenMP paths return bitwise-identical results.
Result1Simulation simulate_mle(const Result1Config& config,
                               Exec exec = Exec::Parallel);

}  // namespace paircal
