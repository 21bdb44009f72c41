#include <doctest.h>

#include <cmath>

#include "paircal/error.hpp"
#include "paircal/result1.hpp"

using namespace paircal;

namespace {

Result1Config cfg(double sigma2, int n, std::int64_t pairs, std::uint64_t seed) {
  Result1Config c;
  c.sigma2 = sigma2;
  c.n_per_arm = n;
  c.num_pairs = pairs;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("plim is exactly zero when the variance multiplier is one") {
  for (int n : {1, 2, 5, 10, 50, 1000})
    CHECK(plim_mle(cfg(1.0, n, 1000, 0)) == 0.0);
}

TEST_CASE("plim matches hand-evaluated closed-form values") {
  // frozen from an independent evaluation of the closed form
  CHECK(plim_mle(cfg(9.0, 10, 0, 0)) == doctest::Approx(-0.19947114).epsilon(1e-6));
  CHECK(plim_mle(cfg(4.0, 5, 0, 0)) == doctest::Approx(-0.14080316).epsilon(1e-6));
  CHECK(plim_mle(cfg(0.25, 50, 0, 0)) == doctest::Approx(0.00579577).epsilon(1e-4));
}

TEST_CASE("property: sign(plim) equals sign(1 - sigma2) over a grid") {
  for (double s2 : {0.05, 0.25, 0.5, 0.9, 0.99, 1.01, 1.5, 2.0, 4.0, 9.0, 25.0})
    for (int n : {1, 2, 3, 5, 10, 20, 50, 100, 500, 1000}) {
      const double p = plim_mle(cfg(s2, n, 0, 0));
      if (s2 < 1.0) CHECK(p > 0.0);
      else if (s2 > 1.0) CHECK(p < 0.0);
    }
}

TEST_CASE("plim vanishes as the per-arm sample grows") {
  const double p10 = std::fabs(plim_mle(cfg(9.0, 10, 0, 0)));
  const double p100 = std::fabs(plim_mle(cfg(9.0, 100, 0, 0)));
  const double p10000 = std::fabs(plim_mle(cfg(9.0, 10000, 0, 0)));
  CHECK(p100 < p10);
  CHECK(p10000 < p100);
  CHECK(p10000 < 1e-3);
}

TEST_CASE("simulation is deterministic and serial matches parallel bitwise") {
  const Result1Config c = cfg(9.0, 10, 50000, 42);
  const Result1Simulation a = simulate_mle(c);
  const Result1Simulation b = simulate_mle(c);
  CHECK(a.estimate == b.estimate);
  CHECK(a.mc_se == b.mc_se);

  const Result1Simulation s = simulate_mle(c, Exec::Serial);
  CHECK(s.estimate == a.estimate);  // bitwise: same chunked streams and merge order
  CHECK(s.mc_se == a.mc_se);
  CHECK(s.mean_unweighted == a.mean_unweighted);

  const Result1Simulation other = simulate_mle(cfg(9.0, 10, 50000, 43));
  CHECK(other.estimate != a.estimate);
}

TEST_CASE("simulation agrees with the closed-form limit; the plain mean stays null") {
  const Result1Config c = cfg(9.0, 10, 100000, 7);
  const Result1Simulation s = simulate_mle(c);
  const double target = plim_mle(c);
  CHECK(std::fabs(s.estimate - target) <= 3.0 * s.mc_se);
  CHECK(std::fabs(s.mean_unweighted) <= 3.0 * s.mc_se_unweighted);
  CHECK(s.estimate < 0.0);  // the weighting-induced bias, visible at 1e5 pairs

  const Result1Simulation null = simulate_mle(cfg(1.0, 10, 100000, 11));
  CHECK(std::fabs(null.estimate) <= 3.0 * null.mc_se);
}

TEST_CASE("property: Monte Carlo se shrinks at the square-root rate") {
  // doubling the pair count should halve the variance (se^2), within 20%
  double var_small = 0.0, var_big = 0.0;
  const int reps = 24;
  for (int r = 0; r < reps; ++r) {
    var_small += std::pow(simulate_mle(cfg(4.0, 10, 20000, 100 + r)).mc_se, 2);
    var_big += std::pow(simulate_mle(cfg(4.0, 10, 40000, 500 + r)).mc_se, 2);
  }
  const double ratio = var_big / var_small;
  CHECK(ratio > 0.4);
  CHECK(ratio < 0.6);
}

TEST_CASE("config validation") {
  CHECK_THROWS_AS(plim_mle(cfg(-1.0, 10, 0, 0)), Error);
  CHECK_THROWS_AS(simulate_mle(cfg(9.0, 0, 1000, 0)), Error);
  CHECK_THROWS_AS(simulate_mle(cfg(9.0, 10, 50, 0)), Error);
}
