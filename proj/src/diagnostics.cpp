#include "paircal/diagnostics.hpp"

#include <cmath>

#include "paircal/detail/stats.hpp"

namespace paircal {

namespace {

struct ArmStats {
  double mean = 0.0;
  double var = 0.0;  // n-1 divisor
  double n = 0.0;
};

ArmStats covariate_stats(const ClusterArm& arm, int idx) {
  std::vector<double> x;
  x.reserve(arm.records.size());
  for (const auto& r : arm.records) x.push_back(r.covariates.continuous[idx]);
  if (x.size() < 2)
    throw Error(ErrorCode::TooFewPatients,
                "covariate statistics need at least 2 patients per arm");
  return {detail::mean(x), detail::sample_variance(x), static_cast<double>(x.size())};
}

}  // namespace

double effect_size(const Pair& pair, int continuous_index) {
  const ArmStats a = covariate_stats(pair.control, continuous_index);
  const ArmStats b = covariate_stats(pair.intervention, continuous_index);
  const double pooled = ((a.n - 1.0) * a.var + (b.n - 1.0) * b.var) / (a.n + b.n - 2.0);
  if (pooled <= 0.0)
    throw Error(ErrorCode::ZeroPooledSD,
                "pair '" + pair.pair_id + "': covariate constant in both arms");
  return (a.mean - b.mean) / std::sqrt(pooled);
}

double t_statistic(const Pair& pair, int continuous_index, TStatFlavor flavor) {
  const ArmStats a = covariate_stats(pair.control, continuous_index);
  const ArmStats b = covariate_stats(pair.intervention, continuous_index);
  double se2 = 0.0;
  if (flavor == TStatFlavor::Welch) {
    se2 = a.var / a.n + b.var / b.n;
  } else {
    const double pooled =
        ((a.n - 1.0) * a.var + (b.n - 1.0) * b.var) / (a.n + b.n - 2.0);
    se2 = pooled * (1.0 / a.n + 1.0 / b.n);
  }
  if (se2 <= 0.0) {
    if (a.mean == b.mean) return 0.0;  // equal means, no variance: define as 0
    throw Error(ErrorCode::ZeroVariance,
                "pair '" + pair.pair_id + "': zero variance in both arms");
  }
  return (a.mean - b.mean) / std::sqrt(se2);
}

double odds_ratio(const Pair& pair, int categorical_index, const std::string& level) {
  auto count = [&](const ClusterArm& arm) {
    double c = 0.0;
    for (const auto& r : arm.records)
      if (r.covariates.categorical[categorical_index] == level) c += 1.0;
    return c;
  };
  const double a = count(pair.control);
  const double b = static_cast<double>(pair.control.records.size()) - a;
  const double c = count(pair.intervention);
  const double d = static_cast<double>(pair.intervention.records.size()) - c;
  return ((a + 0.5) * (d + 0.5)) / ((b + 0.5) * (c + 0.5));
}

ImbalanceReport imbalance_report(const Study& study) {
  ImbalanceReport rep;
  for (const auto& p : study.pairs) rep.pair_ids.push_back(p.pair_id);
  const auto& schema = study.covariate_schema;

  for (size_t j = 0; j < schema.continuous_names.size(); ++j) {
    ImbalanceRow row;
    row.covariate = schema.continuous_names[j];
    row.continuous = true;
    for (const auto& pair : study.pairs) {
      row.effect_sizes.push_back(effect_size(pair, static_cast<int>(j)));
      row.t_statistics.push_back(t_statistic(pair, static_cast<int>(j)));
    }
    rep.rows.push_back(std::move(row));
  }
  for (size_t j = 0; j < schema.categorical_names.size(); ++j) {
    for (const auto& level : schema.categorical_levels[j]) {
      ImbalanceRow row;
      row.covariate = schema.categorical_names[j];
      row.level = level;
      for (const auto& pair : study.pairs)
        row.odds_ratios.push_back(odds_ratio(pair, static_cast<int>(j), level));
      rep.rows.push_back(std::move(row));
    }
  }
  return rep;
}

DependenceCheck dependence_check(std::span<const PairSummary> summaries) {
  if (summaries.size() < 3)
    throw Error(ErrorCode::TooFewPairs,
                "dependence check needs at least 3 pair summaries");
  DependenceCheck out;
  for (const auto& s : summaries) {
    if (s.variance < 0.0)
      throw Error(ErrorCode::NegativeVariance,
                  "pair '" + s.pair_id + "' has negative variance");
    out.deltas.push_back(s.delta);
    out.sqrt_v.push_back(std::sqrt(s.variance));
  }

  const double xbar = detail::mean(out.deltas);
  const double ybar = detail::mean(out.sqrt_v);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (size_t i = 0; i < out.deltas.size(); ++i) {
    const double dx = out.deltas[i] - xbar;
    const double dy = out.sqrt_v[i] - ybar;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) {
    out.degenerate = true;
    out.r_squared = 0.0;
    out.slope = 0.0;
    out.intercept = ybar;
    return out;
  }
  out.slope = sxy / sxx;
  out.intercept = ybar - out.slope * xbar;
  out.r_squared = (sxy * sxy) / (sxx * syy);
  return out;
}

}  // namespace paircal
