#include "paircal/report.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "paircal/calibration.hpp"
#include "paircal/permutation.hpp"

namespace paircal {

using nlohmann::ordered_json;

namespace {

std::vector<double> deltas_of(std::span<const PairSummary> s) {
  std::vector<double> out;
  out.reserve(s.size());
  for (const auto& x : s) out.push_back(x.delta);
  return out;
}

std::vector<double> variances_of(std::span<const PairSummary> s) {
  std::vector<double> out;
  out.reserve(s.size());
  for (const auto& x : s) out.push_back(x.variance);
  return out;
}

EffectRow effect_row(SummaryKind kind, const EffectEstimate& e) {
  EffectRow row;
  row.kind = kind;
  row.method = estimator_method_name(e.method);
  row.point = e.point;
  row.se = e.se;
  row.ci_lo = e.ci_lo;
  row.ci_hi = e.ci_hi;
  row.tau2 = e.tau2;
  row.p_value = e.p_value;
  return row;
}

EffectRow permutation_row(SummaryKind kind, const PermutationResult& r) {
  EffectRow row;
  row.kind = kind;
  row.method = r.mode == PermutationMode::Exact ? "permutation_exact"
                                                : "permutation_mc";
  row.p_value = r.p_value;
  row.n_permutations = r.n_permutations;
  row.statistic_observed = r.statistic_observed;
  return row;
}

StatisticSpec statistic_spec(const AnalysisConfig& config,
                             std::span<const PairSummary> summaries,
                             const std::optional<Eigen::MatrixXd>& full_cov) {
  StatisticSpec spec;
  spec.kind = config.permutation_statistic;
  if (spec.kind == PermutationStatistic::TwoLevelMLE) {
    if (config.covariance_mode == CovarianceMode::Full && full_cov)
      spec.full_cov = *full_cov;
    else
      spec.variances = variances_of(summaries);
  }
  return spec;
}

/// Estimator and permutation rows for one summary kind.
void append_inference(std::vector<EffectRow>& rows, SummaryKind kind,
                      std::span<const PairSummary> summaries,
                      const std::optional<Eigen::MatrixXd>& full_cov,
                      const AnalysisConfig& config) {
  const std::optional<Eigen::MatrixXd> cov_for_fit =
      config.covariance_mode == CovarianceMode::Full && full_cov
          ? full_cov
          : std::optional<Eigen::MatrixXd>{};

  if (config.estimators.count(EstimatorChoice::FirstLevel))
    rows.push_back(effect_row(kind, first_level_mle(summaries)));
  if (config.estimators.count(EstimatorChoice::TwoLevel))
    rows.push_back(effect_row(kind, two_level_mle(summaries, cov_for_fit)));
  if (config.estimators.count(EstimatorChoice::Profile))
    rows.push_back(effect_row(kind, profile_mle(summaries, cov_for_fit)));
  if (config.estimators.count(EstimatorChoice::Bayes))
    rows.push_back(effect_row(kind, bayes_uniform_shrinkage(summaries, cov_for_fit)));

  const std::vector<double> d = deltas_of(summaries);
  if (config.estimators.count(EstimatorChoice::PermutationExact)) {
    const StatisticSpec spec = statistic_spec(config, summaries, full_cov);
    rows.push_back(permutation_row(kind, permute_exact(d, spec)));
  }
  if (config.estimators.count(EstimatorChoice::PermutationMC)) {
    const StatisticSpec spec = statistic_spec(config, summaries, full_cov);
    rows.push_back(permutation_row(
        kind, permute_monte_carlo(d, spec, config.mc_draws, config.seed)));
  }
}

/// Full-refit permutation for patient-level calibrated analysis: every sign
/// pattern swaps the corresponding pairs' arms, refits the outcome model,
/// recalibrates, and recomputes the statistic.
PermutationResult permute_full_refit(const Study& study,
                                     const AnalysisConfig& config,
                                     bool exact) {
  const int n = static_cast<int>(study.pairs.size());
  if (n > 25 && exact)
    throw Error(ErrorCode::TooManyPairs,
                "exact full-refit permutation capped at N=25");
  if (n > 64)
    throw Error(ErrorCode::TooManyPairs, "full-refit permutation capped at N=64");

  // study pairs sorted by id so mask bit i matches calibrated delta i
  Study base = study;
  std::sort(base.pairs.begin(), base.pairs.end(),
            [](const Pair& a, const Pair& b) { return a.pair_id < b.pair_id; });

  auto statistic = [&](const Study& s) {
    const DesignMatrix design = build_design(s);
    FitOptions opt;
    opt.sandwich = config.sandwich;
    opt.cluster_robust = config.cluster_robust;
    opt.weights = design_weights(s);
    const CoefficientFit f = fit(design, design.outcomes, config.link, opt);
    const CalibratedEstimates cal = calibrate_study(s, f);
    if (config.permutation_statistic == PermutationStatistic::TwoLevelMLE) {
      const std::optional<Eigen::MatrixXd> cov =
          config.covariance_mode == CovarianceMode::Full
              ? std::optional<Eigen::MatrixXd>(cal.delta_covariance)
              : std::optional<Eigen::MatrixXd>{};
      return two_level_mle(cal.deltas, cov).point;
    }
    double s_acc = 0.0;
    for (const auto& ps : cal.deltas) s_acc += ps.delta;
    return s_acc / static_cast<double>(cal.deltas.size());
  };

  auto eval_mask = [&](std::uint64_t mask) {
    std::vector<bool> swap(base.pairs.size(), false);
    for (int i = 0; i < n; ++i) swap[i] = (mask >> i) & 1u;
    return statistic(with_swapped_arms(base, swap));
  };

  const double observed = eval_mask(0);
  const double abs_obs = std::fabs(observed);

  PermutationResult out;
  out.statistic_observed = observed;
  if (exact) {
    const std::uint64_t total = std::uint64_t{1} << n;
    std::uint64_t count = 0;
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 4) reduction(+ : count) \
    num_threads(max_threads())
#endif
    for (std::int64_t mask = 0; mask < static_cast<std::int64_t>(total); ++mask)
      if (std::fabs(eval_mask(static_cast<std::uint64_t>(mask))) >= abs_obs) ++count;
    out.mode = PermutationMode::Exact;
    out.n_permutations = total;
    out.p_value = static_cast<double>(count) / static_cast<double>(total);
  } else {
    std::uint64_t exceed = 0;
    const std::uint64_t low_mask =
        n < 64 ? (std::uint64_t{1} << n) - 1 : ~std::uint64_t{0};
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 16) reduction(+ : exceed) \
    num_threads(max_threads())
#endif
    for (std::int64_t i = 0; i < config.mc_draws; ++i) {
      const std::uint64_t mask =
          detail::substream_seed(config.seed, static_cast<std::uint64_t>(i)) & low_mask;
      if (std::fabs(eval_mask(mask)) >= abs_obs) ++exceed;
    }
    out.mode = PermutationMode::MonteCarlo;
    out.n_permutations = static_cast<std::uint64_t>(config.mc_draws) + 1;
    out.p_value = (static_cast<double>(exceed) + 1.0) /
                  (static_cast<double>(config.mc_draws) + 1.0);
  }
  return out;
}

void append_dependence(AnalysisReport& rep, SummaryKind kind,
                       std::span<const PairSummary> summaries) {
  if (summaries.size() < 3) {
    rep.warnings.push_back(std::string("dependence check skipped for ") +
                           summary_kind_name(kind) + " summaries: fewer than 3 pairs");
    return;
  }
  rep.dependence.emplace_back(kind, dependence_check(summaries));
}

}  // namespace

AnalysisReport run_analysis(const Study& study, const AnalysisConfig& config) {
  config.validate();
  if (config.mode != AnalysisMode::PatientLevel)
    throw Error(ErrorCode::InvalidConfig,
                "config mode is summary_level but patient-level data were given");

  AnalysisReport rep;
  rep.config_echo = config_to_json_text(config);

  // work against id-sorted pairs so tables line up with the design order
  Study sorted = study;
  std::sort(sorted.pairs.begin(), sorted.pairs.end(),
            [](const Pair& a, const Pair& b) { return a.pair_id < b.pair_id; });

  std::vector<PairSummary> crude = crude_summaries(sorted);
  for (size_t i = 0; i < sorted.pairs.size(); ++i) {
    const Pair& p = sorted.pairs[i];
    PairTableRow row;
    row.pair_id = p.pair_id;
    row.kind = SummaryKind::Crude;
    row.n_control = p.control.n_sampled;
    row.n_intervention = p.intervention.n_sampled;
    row.mean_control = arm_mean_and_variance(p.control).first;
    row.mean_intervention = arm_mean_and_variance(p.intervention).first;
    row.delta = crude[i].delta;
    row.sqrt_v = std::sqrt(crude[i].variance);
    rep.pair_table.push_back(row);
  }

  std::vector<PairSummary> calibrated;
  std::optional<Eigen::MatrixXd> calibrated_cov;
  if (config.calibration) {
    const DesignMatrix design = build_design(sorted);
    Eigen::VectorXd y = design.outcomes;
    double scale = 1.0, shift = 0.0;
    if (config.outcome_rescale) {
      shift = config.outcome_rescale->first;
      scale = config.outcome_rescale->second - config.outcome_rescale->first;
      y = (y.array() - shift) / scale;
    }
    FitOptions opt;
    opt.sandwich = config.sandwich;
    opt.cluster_robust = config.cluster_robust;
    opt.weights = design_weights(sorted);
    const CoefficientFit f = fit(design, y, config.link, opt);
    CalibratedEstimates cal = calibrate_study(sorted, f);
    // map back to the original outcome scale
    if (config.outcome_rescale) {
      cal.mu = (cal.mu.array() * scale + shift).matrix();
      cal.covariance *= scale * scale;
      cal.delta_covariance *= scale * scale;
      for (auto& s : cal.deltas) {
        s.delta *= scale;
        s.variance *= scale * scale;
      }
    }
    calibrated = cal.deltas;
    calibrated_cov = cal.delta_covariance;
    for (size_t i = 0; i < cal.deltas.size(); ++i) {
      PairTableRow row;
      row.pair_id = cal.pair_ids[i];
      row.kind = SummaryKind::Calibrated;
      const Pair& p = sorted.pairs[i];
      row.n_control = p.control.n_sampled;
      row.n_intervention = p.intervention.n_sampled;
      row.mean_control = cal.mu(static_cast<long>(i), 0);
      row.mean_intervention = cal.mu(static_cast<long>(i), 1);
      row.delta = cal.deltas[i].delta;
      row.sqrt_v = std::sqrt(cal.deltas[i].variance);
      rep.pair_table.push_back(row);
    }
  }

  const bool want_inference = !config.estimators.empty();
  if (want_inference && sorted.pairs.size() >= 2) {
    if (config.permutation_full_refit && config.calibration) {
      // full-refit permutation replaces the sign-flip rows for the
      // calibrated analysis; crude rows keep the plain sign-flip test
      AnalysisConfig flip_only = config;
      flip_only.estimators.erase(EstimatorChoice::PermutationExact);
      flip_only.estimators.erase(EstimatorChoice::PermutationMC);
      append_inference(rep.effect_table, SummaryKind::Crude, crude, {}, config);
      append_inference(rep.effect_table, SummaryKind::Calibrated, calibrated,
                       calibrated_cov, flip_only);
      if (config.estimators.count(EstimatorChoice::PermutationExact))
        rep.effect_table.push_back(permutation_row(
            SummaryKind::Calibrated, permute_full_refit(sorted, config, true)));
      if (config.estimators.count(EstimatorChoice::PermutationMC))
        rep.effect_table.push_back(permutation_row(
            SummaryKind::Calibrated, permute_full_refit(sorted, config, false)));
    } else {
      append_inference(rep.effect_table, SummaryKind::Crude, crude, {}, config);
      if (config.calibration)
        append_inference(rep.effect_table, SummaryKind::Calibrated, calibrated,
                         calibrated_cov, config);
    }
  } else if (want_inference) {
    rep.warnings.push_back("estimators skipped: fewer than 2 pairs");
  }

  if (!sorted.covariate_schema.empty())
    rep.imbalance = imbalance_report(sorted);
  append_dependence(rep, SummaryKind::Crude, crude);
  if (config.calibration) append_dependence(rep, SummaryKind::Calibrated, calibrated);
  return rep;
}

AnalysisReport run_analysis(std::span<const PairSummary> summaries,
                            const AnalysisConfig& config) {
  if (config.mode != AnalysisMode::SummaryLevel)
    throw Error(ErrorCode::InvalidConfig,
                "config mode is patient_level but summary rows were given");
  config.validate();

  AnalysisReport rep;
  rep.config_echo = config_to_json_text(config);

  std::vector<PairSummary> crude, calibrated;
  for (const auto& s : summaries) {
    if (s.variance < 0.0)
      throw Error(ErrorCode::NegativeVariance,
                  "pair '" + s.pair_id + "' has negative variance");
    (s.kind == SummaryKind::Crude ? crude : calibrated).push_back(s);
  }
  auto by_id = [](const PairSummary& a, const PairSummary& b) {
    return a.pair_id < b.pair_id;
  };
  std::sort(crude.begin(), crude.end(), by_id);
  std::sort(calibrated.begin(), calibrated.end(), by_id);

  for (const auto* group : {&crude, &calibrated}) {
    for (const auto& s : *group) {
      PairTableRow row;
      row.pair_id = s.pair_id;
      row.kind = s.kind;
      row.delta = s.delta;
      row.sqrt_v = std::sqrt(s.variance);
      rep.pair_table.push_back(row);
    }
  }

  for (const auto* group : {&crude, &calibrated}) {
    if (group->empty()) continue;
    if (group->size() < 2) {
      rep.warnings.push_back(std::string("estimators skipped for ") +
                             summary_kind_name(group->front().kind) +
                             " summaries: fewer than 2 pairs");
      continue;
    }
    if (!config.estimators.empty())
      append_inference(rep.effect_table, group->front().kind, *group, {}, config);
    append_dependence(rep, group->front().kind, *group);
  }
  return rep;
}

namespace {

std::string round1(double v) {
  if (!std::isfinite(v)) return "nan";
  std::ostringstream os;
  os << std::fixed << std::setprecision(1) << v;
  std::string s = os.str();
  if (s == "-0.0") s = "0.0";
  return s;
}

ordered_json pair_table_json(const AnalysisReport& rep, bool display) {
  ordered_json arr = ordered_json::array();
  for (const auto& r : rep.pair_table) {
    ordered_json row;
    row["pair_id"] = r.pair_id;
    row["kind"] = summary_kind_name(r.kind);
    if (r.n_control) row["n_control"] = *r.n_control;
    if (r.n_intervention) row["n_intervention"] = *r.n_intervention;
    auto put = [&](const char* key, const std::optional<double>& v) {
      if (v) {
        if (display) row[key] = round1(*v);
        else row[key] = *v;
      }
    };
    put("mean_control", r.mean_control);
    put("mean_intervention", r.mean_intervention);
    if (display) {
      row["delta"] = round1(r.delta);
      row["sqrt_v"] = round1(r.sqrt_v);
    } else {
      row["delta"] = r.delta;
      row["sqrt_v"] = r.sqrt_v;
    }
    arr.push_back(row);
  }
  return arr;
}

ordered_json effect_table_json(const AnalysisReport& rep, bool display) {
  ordered_json arr = ordered_json::array();
  for (const auto& r : rep.effect_table) {
    ordered_json row;
    row["kind"] = summary_kind_name(r.kind);
    row["method"] = r.method;
    auto put = [&](const char* key, const std::optional<double>& v) {
      if (v) {
        if (display) row[key] = round1(*v);
        else row[key] = *v;
      }
    };
    put("point", r.point);
    if (r.ci_lo && r.ci_hi) {
      if (display)
        row["ci95"] = "(" + round1(*r.ci_lo) + ", " + round1(*r.ci_hi) + ")";
      else
        row["ci95"] = {*r.ci_lo, *r.ci_hi};
    }
    put("se", r.se);
    put("tau2", r.tau2);
    if (r.p_value) {
      if (display) {
        std::ostringstream os;
        os << std::fixed << std::setprecision(2) << *r.p_value;
        row["p_value"] = os.str();
      } else {
        row["p_value"] = *r.p_value;
      }
    }
    if (r.n_permutations) row["n_permutations"] = *r.n_permutations;
    if (r.statistic_observed && !display)
      row["statistic_observed"] = *r.statistic_observed;
    arr.push_back(row);
  }
  return arr;
}

ordered_json imbalance_json(const ImbalanceReport& imb) {
  ordered_json arr = ordered_json::array();
  for (const auto& row : imb.rows) {
    ordered_json r;
    r["covariate"] = row.covariate;
    r["type"] = row.continuous ? "continuous" : "categorical";
    if (!row.level.empty()) r["level"] = row.level;
    ordered_json per_pair = ordered_json::object();
    for (size_t i = 0; i < imb.pair_ids.size(); ++i) {
      ordered_json cell;
      if (row.continuous) {
        cell["effect_size"] = row.effect_sizes[i];
        cell["t_statistic"] = row.t_statistics[i];
      } else {
        cell["odds_ratio"] = row.odds_ratios[i];
      }
      per_pair[imb.pair_ids[i]] = cell;
    }
    r["pairs"] = per_pair;
    arr.push_back(r);
  }
  return arr;
}

ordered_json dependence_json(const AnalysisReport& rep) {
  ordered_json arr = ordered_json::array();
  for (const auto& [kind, dep] : rep.dependence) {
    ordered_json d;
    d["kind"] = summary_kind_name(kind);
    ordered_json pts = ordered_json::array();
    for (size_t i = 0; i < dep.deltas.size(); ++i)
      pts.push_back({dep.deltas[i], dep.sqrt_v[i]});
    d["points"] = pts;
    d["r_squared"] = dep.r_squared;
    d["slope"] = dep.slope;
    d["intercept"] = dep.intercept;
    d["degenerate"] = dep.degenerate;
    arr.push_back(d);
  }
  return arr;
}

std::string render_json(const AnalysisReport& rep) {
  ordered_json j;
  j["pair_table"] = pair_table_json(rep, false);
  j["effect_table"] = effect_table_json(rep, false);
  if (rep.imbalance) j["imbalance_table"] = imbalance_json(*rep.imbalance);
  j["dependence"] = dependence_json(rep);
  ordered_json prov;
  prov["config"] = nlohmann::ordered_json::parse(rep.config_echo);
  ordered_json inputs = ordered_json::array();
  for (const auto& [path, digest] : rep.input_digests)
    inputs.push_back({{"path", path}, {"digest", digest}});
  prov["inputs"] = inputs;
  prov["warnings"] = rep.warnings;
  j["provenance"] = prov;
  ordered_json display;
  display["pair_table"] = pair_table_json(rep, true);
  display["effect_table"] = effect_table_json(rep, true);
  j["display"] = display;
  return j.dump(2) + "\n";
}

// Transposed text table, one column per pair, matching the usual
// study-report layout.
void render_pair_table_text(std::ostringstream& os, const AnalysisReport& rep) {
  std::vector<std::string> pair_ids;
  for (const auto& r : rep.pair_table)
    if (std::find(pair_ids.begin(), pair_ids.end(), r.pair_id) == pair_ids.end())
      pair_ids.push_back(r.pair_id);
  if (pair_ids.empty()) return;

  auto row_of = [&](SummaryKind kind, const std::string& pid) -> const PairTableRow* {
    for (const auto& r : rep.pair_table)
      if (r.kind == kind && r.pair_id == pid) return &r;
    return nullptr;
  };

  const int label_w = 26, col_w = 9;
  auto line = [&](const std::string& label, auto getter) {
    os << std::left << std::setw(label_w) << label << std::right;
    for (const auto& pid : pair_ids) os << std::setw(col_w) << getter(pid);
    os << "\n";
  };

  os << std::left << std::setw(label_w) << "pair" << std::right;
  for (const auto& pid : pair_ids) os << std::setw(col_w) << pid;
  os << "\n";

  const bool has_crude_rows = row_of(SummaryKind::Crude, pair_ids.front());
  if (has_crude_rows && row_of(SummaryKind::Crude, pair_ids.front())->n_control) {
    line("n_control", [&](const std::string& pid) {
      const auto* r = row_of(SummaryKind::Crude, pid);
      return r && r->n_control ? std::to_string(*r->n_control) : "-";
    });
    line("n_intervention", [&](const std::string& pid) {
      const auto* r = row_of(SummaryKind::Crude, pid);
      return r && r->n_intervention ? std::to_string(*r->n_intervention) : "-";
    });
  }
  for (SummaryKind kind : {SummaryKind::Crude, SummaryKind::Calibrated}) {
    bool any = false;
    for (const auto& r : rep.pair_table) any = any || r.kind == kind;
    if (!any) continue;
    os << summary_kind_name(kind) << ":\n";
    if (row_of(kind, pair_ids.front()) && row_of(kind, pair_ids.front())->mean_control) {
      line("  mean_control", [&](const std::string& pid) {
        const auto* r = row_of(kind, pid);
        return r && r->mean_control ? round1(*r->mean_control) : std::string("-");
      });
      line("  mean_intervention", [&](const std::string& pid) {
        const auto* r = row_of(kind, pid);
        return r && r->mean_intervention ? round1(*r->mean_intervention)
                                         : std::string("-");
      });
    }
    line("  delta", [&](const std::string& pid) {
      const auto* r = row_of(kind, pid);
      return r ? round1(r->delta) : std::string("-");
    });
    line("  sqrt_v", [&](const std::string& pid) {
      const auto* r = row_of(kind, pid);
      return r ? round1(r->sqrt_v) : std::string("-");
    });
  }
}

std::string render_text(const AnalysisReport& rep) {
  std::ostringstream os;
  os << "== pair table ==\n";
  render_pair_table_text(os, rep);

  if (!rep.effect_table.empty()) {
    os << "\n== effect estimates ==\n";
    os << std::left << std::setw(12) << "kind" << std::setw(26) << "method"
       << std::right << std::setw(8) << "point" << std::setw(18) << "ci95"
       << std::setw(8) << "se" << std::setw(8) << "tau2" << std::setw(8) << "p"
       << "\n";
    for (const auto& r : rep.effect_table) {
      std::string ci = "-";
      if (r.ci_lo && r.ci_hi)
        ci = "(" + round1(*r.ci_lo) + ", " + round1(*r.ci_hi) + ")";
      std::string p = "-";
      if (r.p_value) {
        std::ostringstream ps;
        ps << std::fixed << std::setprecision(2) << *r.p_value;
        p = ps.str();
      }
      os << std::left << std::setw(12) << summary_kind_name(r.kind) << std::setw(26)
         << r.method << std::right << std::setw(8)
         << (r.point ? round1(*r.point) : "-") << std::setw(18) << ci << std::setw(8)
         << (r.se ? round1(*r.se) : "-") << std::setw(8)
         << (r.tau2 ? round1(*r.tau2) : "-") << std::setw(8) << p << "\n";
    }
  }

  if (rep.imbalance) {
    os << "\n== covariate imbalance (effect size | odds ratio per pair) ==\n";
    os << std::left << std::setw(34) << "covariate" << std::right;
    for (const auto& pid : rep.imbalance->pair_ids) os << std::setw(8) << pid;
    os << "\n";
    for (const auto& row : rep.imbalance->rows) {
      std::string label = row.covariate;
      if (!row.level.empty()) label += "=" + row.level;
      os << std::left << std::setw(34) << label << std::right;
      for (size_t i = 0; i < rep.imbalance->pair_ids.size(); ++i)
        os << std::setw(8)
           << round1(row.continuous ? row.effect_sizes[i] : row.odds_ratios[i]);
      os << "\n";
    }
  }

  for (const auto& [kind, dep] : rep.dependence) {
    os << "\n== dependence check (" << summary_kind_name(kind) << ") ==\n";
    os << "R^2 = " << std::fixed << std::setprecision(3) << dep.r_squared
       << ", slope = " << dep.slope << ", intercept = " << dep.intercept;
    if (dep.degenerate) os << " (degenerate)";
    os << "\n";
  }

  if (!rep.warnings.empty()) {
    os << "\n== warnings ==\n";
    for (const auto& w : rep.warnings) os << "- " << w << "\n";
  }
  return os.str();
}

std::string full(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::map<std::string, std::string> render_csv_bundle(const AnalysisReport& rep) {
  std::map<std::string, std::string> files;
  {
    std::ostringstream os;
    os << "pair_id,kind,n_control,n_intervention,mean_control,mean_intervention,"
          "delta,sqrt_v\n";
    for (const auto& r : rep.pair_table) {
      os << r.pair_id << "," << summary_kind_name(r.kind) << ","
         << (r.n_control ? std::to_string(*r.n_control) : "") << ","
         << (r.n_intervention ? std::to_string(*r.n_intervention) : "") << ","
         << (r.mean_control ? full(*r.mean_control) : "") << ","
         << (r.mean_intervention ? full(*r.mean_intervention) : "") << ","
         << full(r.delta) << "," << full(r.sqrt_v) << "\n";
    }
    files["pair_table.csv"] = os.str();
  }
  {
    std::ostringstream os;
    os << "kind,method,point,ci_lo,ci_hi,se,tau2,p_value,n_permutations\n";
    for (const auto& r : rep.effect_table) {
      os << summary_kind_name(r.kind) << "," << r.method << ","
         << (r.point ? full(*r.point) : "") << "," << (r.ci_lo ? full(*r.ci_lo) : "")
         << "," << (r.ci_hi ? full(*r.ci_hi) : "") << ","
         << (r.se ? full(*r.se) : "") << "," << (r.tau2 ? full(*r.tau2) : "") << ","
         << (r.p_value ? full(*r.p_value) : "") << ","
         << (r.n_permutations ? std::to_string(*r.n_permutations) : "") << "\n";
    }
    files["effect_table.csv"] = os.str();
  }
  if (rep.imbalance) {
    std::ostringstream os;
    os << "covariate,level,pair_id,effect_size,t_statistic,odds_ratio\n";
    for (const auto& row : rep.imbalance->rows) {
      for (size_t i = 0; i < rep.imbalance->pair_ids.size(); ++i) {
        os << row.covariate << "," << row.level << "," << rep.imbalance->pair_ids[i]
           << ",";
        if (row.continuous)
          os << full(row.effect_sizes[i]) << "," << full(row.t_statistics[i]) << ",";
        else
          os << ",," << full(row.odds_ratios[i]);
        os << "\n";
      }
    }
    files["imbalance_table.csv"] = os.str();
  }
  {
    std::ostringstream os;
    os << "kind,delta,sqrt_v\n";
    for (const auto& [kind, dep] : rep.dependence)
      for (size_t i = 0; i < dep.deltas.size(); ++i)
        os << summary_kind_name(kind) << "," << full(dep.deltas[i]) << ","
           << full(dep.sqrt_v[i]) << "\n";
    files["dependence.csv"] = os.str();
  }
  return files;
}

}  // namespace

std::map<std::string, std::string> emit_report(const AnalysisReport& report,
                                               const std::string& format) {
  if (format == "json") return {{"report.json", render_json(report)}};
  if (format == "text") return {{"report.txt", render_text(report)}};
  if (format == "csv-bundle") return render_csv_bundle(report);
  throw Error(ErrorCode::UnknownFormat,
              "format must be json|text|csv-bundle, got '" + format + "'");
}

}  // namespace paircal
