#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "helpers.hpp"
#include "paircal/estimators.hpp"
#include "paircal/permutation.hpp"

using namespace paircal;
using namespace testutil;

namespace {

StatisticSpec mean_spec() { return {}; }

StatisticSpec mle_spec(const std::vector<double>& variances) {
  StatisticSpec s;
  s.kind = PermutationStatistic::TwoLevelMLE;
  s.variances = variances;
  return s;
}

std::vector<double> to_var(const std::vector<double>& sqrt_v) {
  std::vector<double> v;
  for (double s : sqrt_v) v.push_back(s * s);
  return v;
}

}  // namespace

TEST_CASE("exact permutation of the calibrated deltas: all-positive gives 2/128") {
  const PermutationResult r = permute_exact(kCalibratedDeltas, mean_spec());
  CHECK(r.p_value == 2.0 / 128.0);  // exactly
  CHECK(r.n_permutations == 128);
  CHECK(r.mode == PermutationMode::Exact);
}

TEST_CASE("exact permutation of the crude deltas gives 78/128") {
  const PermutationResult r = permute_exact(kCrudeDeltas, mean_spec());
  CHECK(r.p_value == doctest::Approx(78.0 / 128.0));
  CHECK(std::fabs(r.p_value - 0.61) <= 1.0 / 128.0);
}

TEST_CASE("exact permutation with the two-level statistic") {
  const PermutationResult crude =
      permute_exact(kCrudeDeltas, mle_spec(to_var(kCrudeSqrtV)));
  // frozen from the enumeration oracle; allow one grid step for optimizer ties
  CHECK(std::fabs(crude.p_value - 76.0 / 128.0) <= 1.0 / 128.0 + 1e-12);

  const PermutationResult cal =
      permute_exact(kCalibratedDeltas, mle_spec(to_var(kCalibratedSqrtV)));
  CHECK(cal.p_value == doctest::Approx(2.0 / 128.0));

  // the statistic at the identity mask must equal the estimator's point
  const EffectEstimate mle = two_level_mle(crude_table1());
  CHECK(crude.statistic_observed == doctest::Approx(mle.point).epsilon(1e-9));
}

TEST_CASE("single nonzero delta with the mean statistic ties to p = 1") {
  const PermutationResult r = permute_exact(std::vector<double>{1.7}, mean_spec());
  CHECK(r.p_value == 1.0);
  CHECK(r.n_permutations == 2);
}

TEST_CASE("serial and parallel kernels agree exactly") {
  std::mt19937_64 rng(103);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int rep = 0; rep < 10; ++rep) {
    std::vector<double> d(12);
    for (auto& x : d) x = normal(rng);
    for (const StatisticSpec& spec :
         {mean_spec(), mle_spec(std::vector<double>(12, 1.3))}) {
      const PermutationResult serial = permute_exact(d, spec, Exec::Serial);
      const PermutationResult parallel = permute_exact(d, spec, Exec::Parallel);
      CHECK(serial.p_value == parallel.p_value);  // identical counts
      CHECK(serial.statistic_observed == parallel.statistic_observed);
    }
  }
}

TEST_CASE("retained distribution is complete and symmetric") {
  const PermutationResult r =
      permute_exact(kCalibratedDeltas, mean_spec(), Exec::Parallel, true);
  REQUIRE(r.statistic_distribution.has_value());
  CHECK(r.statistic_distribution->size() == 128);
  // sign symmetry: mask and its complement give opposite statistics
  for (std::uint64_t m = 0; m < 128; ++m) {
    const double a = (*r.statistic_distribution)[m];
    const double b = (*r.statistic_distribution)[127 - m];
    CHECK(a == doctest::Approx(-b).epsilon(1e-12));
  }
}

TEST_CASE("exact mode enforces its caps") {
  std::vector<double> big(26, 1.0);
  CHECK_THROWS_AS(permute_exact(big, mean_spec()), Error);
  try {
    permute_exact(big, mean_spec());
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TooManyPairs);
  }
  std::vector<double> d(21, 1.0);
  CHECK_THROWS_AS(permute_exact(d, mean_spec(), Exec::Parallel, true), Error);
  CHECK_THROWS_AS(permute_exact(std::vector<double>{}, mean_spec()), Error);
}

TEST_CASE("Monte Carlo permutation approximates the exact p-value") {
  const PermutationResult exact = permute_exact(kCrudeDeltas, mean_spec());
  const PermutationResult mc =
      permute_monte_carlo(kCrudeDeltas, mean_spec(), 100000, 12345);
  const double p = exact.p_value;
  const double band = 3.0 * std::sqrt(p * (1.0 - p) / 100000.0);
  CHECK(std::fabs(mc.p_value - p) <= band);
  CHECK(mc.mode == PermutationMode::MonteCarlo);
}

TEST_CASE("Monte Carlo permutation is deterministic given the seed") {
  const PermutationResult a =
      permute_monte_carlo(kCrudeDeltas, mean_spec(), 20000, 99);
  const PermutationResult b =
      permute_monte_carlo(kCrudeDeltas, mean_spec(), 20000, 99);
  CHECK(a.p_value == b.p_value);
  const PermutationResult serial =
      permute_monte_carlo(kCrudeDeltas, mean_spec(), 20000, 99, Exec::Serial);
  CHECK(serial.p_value == a.p_value);  // schedule-independent streams

  const PermutationResult other =
      permute_monte_carlo(kCrudeDeltas, mean_spec(), 20000, 100);
  CHECK(other.p_value != a.p_value);  // different seed, different draws
}

TEST_CASE("Monte Carlo permutation on all-zero deltas returns 1") {
  const PermutationResult r =
      permute_monte_carlo(std::vector<double>(8, 0.0), mean_spec(), 5000, 7);
  CHECK(r.p_value == 1.0);
}

TEST_CASE("Monte Carlo mode enforces the minimum draw count") {
  CHECK_THROWS_AS(permute_monte_carlo(kCrudeDeltas, mean_spec(), 999, 1), Error);
}

TEST_CASE("property: exact p invariant to delta order and positive scaling") {
  std::mt19937_64 rng(107);
  std::normal_distribution<double> normal(0.0, 1.5);
  std::uniform_real_distribution<double> a_dist(0.2, 4.0);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> d(4 + rng() % 6);
    for (auto& x : d) x = normal(rng);
    const double base = permute_exact(d, mean_spec()).p_value;

    std::vector<double> shuffled = d;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    CHECK(permute_exact(shuffled, mean_spec()).p_value == base);

    std::vector<double> scaled = d;
    const double a = a_dist(rng);
    for (auto& x : scaled) x *= a;
    CHECK(permute_exact(scaled, mean_spec()).p_value == base);
  }
}

TEST_CASE("property: odd statistics give a symmetric exact distribution") {
  std::mt19937_64 rng(109);
  std::normal_distribution<double> normal(0.0, 1.5);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> d(3 + rng() % 7);
    for (auto& x : d) x = normal(rng);
    std::vector<double> neg = d;
    for (auto& x : neg) x = -x;
    CHECK(permute_exact(d, mean_spec()).p_value ==
          permute_exact(neg, mean_spec()).p_value);
  }
  // two-level statistic, fewer reps (each runs 2^N optimizations)
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> d(6);
    std::vector<double> v(6);
    for (auto& x : d) x = normal(rng);
    for (auto& x : v) x = 0.5 + std::fabs(normal(rng));
    std::vector<double> neg = d;
    for (auto& x : neg) x = -x;
    CHECK(permute_exact(d, mle_spec(v)).p_value ==
          permute_exact(neg, mle_spec(v)).p_value);
  }
}

TEST_CASE("property: all-same-sign deltas with the mean statistic hit 2/2^N") {
  std::mt19937_64 rng(113);
  std::uniform_real_distribution<double> pos(0.1, 5.0);
  for (int rep = 0; rep < 200; ++rep) {
    const int n = 2 + static_cast<int>(rng() % 9);
    std::vector<double> d(n);
    for (auto& x : d) x = pos(rng);
    const PermutationResult r = permute_exact(d, mean_spec());
    CHECK(r.p_value == doctest::Approx(2.0 / std::pow(2.0, n)));
  }
}

TEST_CASE("full-covariance two-level statistic handles the label-swap transform") {
  const auto s = calibrated_table1();
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(7, 7);
  for (int i = 0; i < 7; ++i) sigma(i, i) = s[i].variance;
  for (int i = 0; i < 7; ++i)
    for (int j = 0; j < 7; ++j)
      if (i != j) sigma(i, j) = 0.2 * std::sqrt(sigma(i, i) * sigma(j, j));

  StatisticSpec spec;
  spec.kind = PermutationStatistic::TwoLevelMLE;
  spec.full_cov = sigma;
  const PermutationResult r = permute_exact(kCalibratedDeltas, spec);
  CHECK(r.p_value >= 2.0 / 128.0);
  CHECK(r.p_value <= 1.0);
  // observed statistic equals the full-covariance estimator point
  const EffectEstimate mle = two_level_mle(s, sigma);
  CHECK(r.statistic_observed == doctest::Approx(mle.point).epsilon(1e-8));
}
