#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "paircal/diagnostics.hpp"

using namespace paircal;
using namespace testutil;

namespace {

Pair pair_with_covariate(const std::vector<double>& xc, const std::vector<double>& xi) {
  Pair p;
  p.pair_id = "1";
  p.control = make_arm("1", ArmRole::Control, std::vector<double>(xc.size(), 0.0));
  p.intervention =
      make_arm("1", ArmRole::Intervention, std::vector<double>(xi.size(), 0.0));
  for (size_t k = 0; k < xc.size(); ++k)
    p.control.records[k].covariates.continuous = {xc[k]};
  for (size_t k = 0; k < xi.size(); ++k)
    p.intervention.records[k].covariates.continuous = {xi[k]};
  return p;
}

Pair pair_with_level_counts(int a, int b, int c, int d) {
  // control: a of "yes", b of "no"; intervention: c of "yes", d of "no"
  Pair p;
  p.pair_id = "1";
  p.control = make_arm("1", ArmRole::Control, std::vector<double>(a + b, 0.0));
  p.intervention = make_arm("1", ArmRole::Intervention, std::vector<double>(c + d, 0.0));
  for (int k = 0; k < a + b; ++k)
    p.control.records[k].covariates.categorical = {k < a ? "yes" : "no"};
  for (int k = 0; k < c + d; ++k)
    p.intervention.records[k].covariates.categorical = {k < c ? "yes" : "no"};
  return p;
}

// independent simple-regression oracle for the dependence check
double r_squared_oracle(const std::vector<double>& x, const std::vector<double>& y) {
  double xb = 0, yb = 0;
  for (double v : x) xb += v;
  for (double v : y) yb += v;
  xb /= x.size();
  yb /= y.size();
  double sxx = 0, syy = 0, sxy = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - xb) * (x[i] - xb);
    syy += (y[i] - yb) * (y[i] - yb);
    sxy += (x[i] - xb) * (y[i] - yb);
  }
  return sxy * sxy / (sxx * syy);
}

}  // namespace

TEST_CASE("effect size on hand-computed inputs") {
  CHECK(effect_size(pair_with_covariate({0, 2}, {2, 4}), 0) ==
        doctest::Approx(-std::sqrt(2.0)).epsilon(1e-12));
  CHECK(effect_size(pair_with_covariate({1, 2, 3}, {1, 2, 3}), 0) ==
        doctest::Approx(0.0));
  CHECK_THROWS_AS(effect_size(pair_with_covariate({2, 2}, {2, 2}), 0), Error);
}

TEST_CASE("Welch t statistic on hand-computed inputs") {
  // {0,2} vs {2,4}: se = sqrt(2/2 + 2/2) = sqrt(2), t = -2/sqrt(2)
  CHECK(t_statistic(pair_with_covariate({0, 2}, {2, 4}), 0) ==
        doctest::Approx(-std::sqrt(2.0)).epsilon(1e-12));
  CHECK(t_statistic(pair_with_covariate({1, 3}, {1, 3}), 0) == doctest::Approx(0.0));
  // equal means, unequal variances
  CHECK(t_statistic(pair_with_covariate({0, 4}, {1, 3}), 0) == doctest::Approx(0.0));
  // pooled flavor on the same data
  CHECK(t_statistic(pair_with_covariate({0, 2}, {2, 4}), 0, TStatFlavor::Pooled) ==
        doctest::Approx(-std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("odds ratio with continuity correction") {
  CHECK(odds_ratio(pair_with_level_counts(2, 8, 2, 8), 0, "yes") ==
        doctest::Approx(1.0).epsilon(1e-12));
  // a=5,b=0,c=0,d=5 -> (5.5*5.5)/(0.5*0.5) = 121
  CHECK(odds_ratio(pair_with_level_counts(5, 0, 0, 5), 0, "yes") ==
        doctest::Approx(121.0).epsilon(1e-12));
  // all-zero row still finite
  CHECK(odds_ratio(pair_with_level_counts(0, 4, 0, 4), 0, "yes") ==
        doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("dependence check reproduces the published R^2 on calibrated rows") {
  const auto cal = calibrated_table1();
  const DependenceCheck dep = dependence_check(cal);
  // hand least-squares oracle gives 0.219 (published rounded value: 0.20)
  CHECK(dep.r_squared == doctest::Approx(0.21902076736455714).epsilon(1e-10));
  CHECK(dep.r_squared ==
        doctest::Approx(r_squared_oracle(kCalibratedDeltas, kCalibratedSqrtV))
            .epsilon(1e-12));
  CHECK(dep.slope == doctest::Approx(0.14185452998723946).epsilon(1e-10));
  CHECK(dep.deltas.size() == 7);
  CHECK(dep.sqrt_v.size() == 7);
}

TEST_CASE("dependence check degenerates gracefully") {
  std::vector<PairSummary> constant = {{"1", 0.5, 4.0, SummaryKind::Crude},
                                       {"2", 1.5, 4.0, SummaryKind::Crude},
                                       {"3", -0.5, 4.0, SummaryKind::Crude}};
  const DependenceCheck dep = dependence_check(constant);
  CHECK(dep.degenerate);
  CHECK(dep.r_squared == 0.0);

  std::vector<PairSummary> collinear = {{"1", 0.0, 1.0, SummaryKind::Crude},
                                        {"2", 1.0, 4.0, SummaryKind::Crude},
                                        {"3", 2.0, 9.0, SummaryKind::Crude}};
  const DependenceCheck dep2 = dependence_check(collinear);
  CHECK(dep2.r_squared == doctest::Approx(1.0).epsilon(1e-12));

  std::vector<PairSummary> two = {{"1", 0.0, 1.0, SummaryKind::Crude},
                                  {"2", 1.0, 4.0, SummaryKind::Crude}};
  CHECK_THROWS_AS(dependence_check(two), Error);
}

TEST_CASE("property: arm swap antisymmetry of effect size, reciprocity of odds ratio") {
  std::mt19937_64 rng(127);
  std::normal_distribution<double> normal(0.0, 2.0);
  std::uniform_int_distribution<int> n_dist(2, 12);
  std::uniform_int_distribution<int> cnt(0, 8);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> xc(n_dist(rng)), xi(n_dist(rng));
    for (auto& v : xc) v = normal(rng);
    for (auto& v : xi) v = normal(rng) + 0.5;
    Pair p = pair_with_covariate(xc, xi);
    const double es = effect_size(p, 0);
    const double t = t_statistic(p, 0);
    Pair q = swap_pair_arms(p);
    CHECK(effect_size(q, 0) == doctest::Approx(-es).epsilon(1e-12));
    CHECK(t_statistic(q, 0) == doctest::Approx(-t).epsilon(1e-12));

    const int a = cnt(rng), b = cnt(rng) + 1, c = cnt(rng), d = cnt(rng) + 1;
    Pair r = pair_with_level_counts(a, b, c, d);
    const double orr = odds_ratio(r, 0, "yes");
    CHECK(orr > 0.0);
    CHECK(std::isfinite(orr));
    CHECK(odds_ratio(swap_pair_arms(r), 0, "yes") ==
          doctest::Approx(1.0 / orr).epsilon(1e-12));
  }
}

TEST_CASE("property: R^2 invariant under affine rescaling of either axis") {
  std::mt19937_64 rng(131);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> a_dist(0.2, 5.0);
  for (int rep = 0; rep < 200; ++rep) {
    const int n = 3 + static_cast<int>(rng() % 8);
    std::vector<PairSummary> s;
    for (int i = 0; i < n; ++i)
      s.push_back({std::to_string(i), normal(rng), 0.5 + std::fabs(normal(rng)),
                   SummaryKind::Crude});
    const double base = dependence_check(s).r_squared;

    const double a = a_dist(rng);
    std::vector<PairSummary> sx = s;
    for (auto& x : sx) x.delta = a * x.delta + 2.0;
    CHECK(dependence_check(sx).r_squared == doctest::Approx(base).epsilon(1e-9));

    std::vector<PairSummary> sy = s;
    for (auto& x : sy) x.variance *= a * a;  // scales sqrt_v by a
    CHECK(dependence_check(sy).r_squared == doctest::Approx(base).epsilon(1e-9));
  }
}

TEST_CASE("imbalance report covers every covariate and level") {
  std::mt19937_64 rng(137);
  Study study = random_study(rng, 4);
  const ImbalanceReport rep = imbalance_report(study);
  REQUIRE(rep.pair_ids.size() == 4);
  // one continuous row + one row per categorical level (a, b)
  CHECK(rep.rows.size() == 3);
  CHECK(rep.rows[0].continuous);
  CHECK(rep.rows[0].effect_sizes.size() == 4);
  CHECK(rep.rows[0].t_statistics.size() == 4);
  CHECK_FALSE(rep.rows[1].continuous);
  CHECK(rep.rows[1].odds_ratios.size() == 4);
}
