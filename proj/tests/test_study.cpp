#include <doctest.h>

#include <random>

#include "helpers.hpp"
#include "paircal/study.hpp"

using namespace paircal;
using namespace testutil;

namespace {

// Independent oracle: delete-one jackknife variance of the sample mean.
double jackknife_variance_of_mean(const std::vector<double>& y) {
  const size_t n = y.size();
  double total = 0.0;
  for (double v : y) total += v;
  std::vector<double> loo(n);
  double loo_mean = 0.0;
  for (size_t i = 0; i < n; ++i) {
    loo[i] = (total - y[i]) / static_cast<double>(n - 1);
    loo_mean += loo[i];
  }
  loo_mean /= static_cast<double>(n);
  double ss = 0.0;
  for (size_t i = 0; i < n; ++i) ss += (loo[i] - loo_mean) * (loo[i] - loo_mean);
  return ss * static_cast<double>(n - 1) / static_cast<double>(n);
}

Pair two_arm_pair(const std::vector<double>& control,
                  const std::vector<double>& intervention) {
  Pair p;
  p.pair_id = "1";
  p.control = make_arm("1", ArmRole::Control, control);
  p.intervention = make_arm("1", ArmRole::Intervention, intervention);
  return p;
}

}  // namespace

TEST_CASE("arm mean and variance on constants and a hand-computed case") {
  const auto [m1, v1] = arm_mean_and_variance(make_arm("1", ArmRole::Control, {1, 1, 1}));
  CHECK(m1 == doctest::Approx(1.0));
  CHECK(v1 == doctest::Approx(0.0));

  // {0,2}: s^2 = 2, s^2/n = 1
  const auto [m2, v2] = arm_mean_and_variance(make_arm("1", ArmRole::Control, {0, 2}));
  CHECK(m2 == doctest::Approx(1.0));
  CHECK(v2 == doctest::Approx(1.0));
}

TEST_CASE("arm mean reproduces a published target on equivalent data") {
  // synthetic data constructed to the published pair-4 control mean 39.1
  std::vector<double> y(23, 39.1);
  y[0] += 2.0;
  y[1] -= 2.0;
  const auto [m, v] = arm_mean_and_variance(make_arm("4", ArmRole::Control, y));
  CHECK(m == doctest::Approx(39.1).epsilon(1e-12));
  CHECK(v > 0.0);
}

TEST_CASE("crude pair summary direction and symmetry") {
  // means rounded as published: pair 4 -> 3.8, pair 3 -> 0.3
  Pair p4 = two_arm_pair({39.1, 39.1}, {35.3, 35.3});
  CHECK(crude_pair_summary(p4).delta == doctest::Approx(3.8));
  Pair p3 = two_arm_pair({39.6, 39.6}, {39.3, 39.3});
  CHECK(crude_pair_summary(p3).delta == doctest::Approx(0.3));

  Pair same = two_arm_pair({1.0, 2.0, 4.0}, {1.0, 2.0, 4.0});
  const PairSummary s = crude_pair_summary(same);
  CHECK(s.delta == doctest::Approx(0.0));
  const auto [m, v] = arm_mean_and_variance(same.control);
  CHECK(s.variance == doctest::Approx(2.0 * v));
}

TEST_CASE("validate_study accepts a complete study and reports each violation") {
  std::mt19937_64 rng(7);
  Study good = random_study(rng, 7);
  CHECK_NOTHROW(validate_study(good));

  SUBCASE("missing arm") {
    Study s = good;
    s.pairs[2].intervention = ClusterArm{};
    s.pairs[2].intervention.pair_id = s.pairs[2].pair_id;
    s.pairs[2].intervention.role = ArmRole::Intervention;
    try {
      validate_study(s);
      FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
      CHECK(e.has(ErrorCode::MissingArm));
    }
  }
  SUBCASE("one-patient arm") {
    Study s = good;
    s.pairs[0].control.records.resize(1);
    s.pairs[0].control.n_sampled = 1;
    s.pairs[0].control.n_served = 1;
    try {
      validate_study(s);
      FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
      CHECK(e.has(ErrorCode::TooFewPatients));
    }
  }
  SUBCASE("schema mismatch") {
    Study s = good;
    s.pairs[1].control.records[0].covariates.continuous.push_back(1.0);
    try {
      validate_study(s);
      FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
      CHECK(e.has(ErrorCode::SchemaMismatch));
    }
  }
  SUBCASE("unknown categorical level") {
    Study s = good;
    s.pairs[1].control.records[0].covariates.categorical[0] = "zz";
    CHECK_THROWS_AS(validate_study(s), ValidationError);
  }
  SUBCASE("duplicate pair ids") {
    Study s = good;
    s.pairs[1].pair_id = s.pairs[0].pair_id;
    CHECK_THROWS_AS(validate_study(s), ValidationError);
  }
}

TEST_CASE("property: arm swap negates delta and keeps variance") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> normal(0.0, 2.0);
  std::uniform_int_distribution<int> n_dist(2, 12);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> a(n_dist(rng)), b(n_dist(rng));
    for (auto& v : a) v = normal(rng);
    for (auto& v : b) v = normal(rng) + 1.0;
    Pair p = two_arm_pair(a, b);
    const PairSummary s = crude_pair_summary(p);
    const PairSummary swapped = crude_pair_summary(swap_pair_arms(p));
    CHECK(swapped.delta == doctest::Approx(-s.delta).epsilon(1e-12));
    CHECK(swapped.variance == doctest::Approx(s.variance).epsilon(1e-12));
  }
}

TEST_CASE("property: affine outcome transforms act as expected on crude summaries") {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> normal(0.0, 2.0);
  std::uniform_real_distribution<double> scale_dist(0.1, 4.0);
  std::uniform_int_distribution<int> n_dist(2, 10);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> a(n_dist(rng)), b(n_dist(rng));
    for (auto& v : a) v = normal(rng);
    for (auto& v : b) v = normal(rng);
    const double c = normal(rng);
    const double k = scale_dist(rng);

    Pair p = two_arm_pair(a, b);
    const PairSummary s0 = crude_pair_summary(p);

    auto shifted = [&](std::vector<double> v, double add, double mul) {
      for (auto& y : v) y = mul * y + add;
      return v;
    };
    const PairSummary s_shift =
        crude_pair_summary(two_arm_pair(shifted(a, c, 1.0), shifted(b, c, 1.0)));
    CHECK(s_shift.delta == doctest::Approx(s0.delta).epsilon(1e-9));

    const PairSummary s_scale =
        crude_pair_summary(two_arm_pair(shifted(a, 0.0, k), shifted(b, 0.0, k)));
    CHECK(s_scale.delta == doctest::Approx(k * s0.delta).epsilon(1e-9));
    CHECK(s_scale.variance == doctest::Approx(k * k * s0.variance).epsilon(1e-9));
  }
}

TEST_CASE("property: variance_of_mean equals the brute-force jackknife variance") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> normal(0.0, 3.0);
  std::uniform_int_distribution<int> n_dist(2, 40);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> y(n_dist(rng));
    for (auto& v : y) v = normal(rng);
    const auto [m, v] = arm_mean_and_variance(make_arm("1", ArmRole::Control, y));
    const double jk = jackknife_variance_of_mean(y);
    CHECK(v == doctest::Approx(jk).epsilon(1e-10));
  }
}
