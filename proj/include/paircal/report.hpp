#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "paircal/diagnostics.hpp"
#include "paircal/estimators.hpp"
#include "paircal/io.hpp"
#include "paircal/study.hpp"

namespace paircal {

struct PairTableRow {
  std::string pair_id;
  SummaryKind kind = SummaryKind::Crude;
  std::optional<std::int64_t> n_control, n_intervention;
  std::optional<double> mean_control, mean_intervention;
  double delta = 0.0;
  double sqrt_v = 0.0;
};

struct EffectRow {
  SummaryKind kind = SummaryKind::Crude;
  std::string method;
  std::optional<double> point, se, ci_lo, ci_hi, tau2, p_value;
  std::optional<std::uint64_t> n_permutations;
  std::optional<double> statistic_observed;
};

struct AnalysisReport {
  std::vector<PairTableRow> pair_table;
  std::vector<EffectRow> effect_table;
  std::optional<ImbalanceReport> imbalance;
  std::vector<std::pair<SummaryKind, DependenceCheck>> dependence;
  std::string config_echo;  // effective config as JSON text
  std::vector<std::pair<std::string, std::string>> input_digests;
  std::vector<std::string> warnings;
};

/// Patient-level pipeline: crude summaries, optional fit + calibration, the
/// selected estimators and permutation tests per summary kind, and
/// diagnostics. Deterministic given config.seed.
AnalysisReport run_analysis(const Study& study, const AnalysisConfig& config);

/// Summary-level pipeline over preaggregated (delta, v) rows, grouped by
/// summary kind.
AnalysisReport run_analysis(std::span<const PairSummary> summaries,
                            const AnalysisConfig& config);

/// Renders the report. Returns file name -> content: a single document for
/// "json" and "text", one file per table for "csv-bundle" (including
/// plot-ready dependence points). Throws UnknownFormat otherwise.
std::map<std::string, std::string> emit_report(const AnalysisReport& report,
                                               const std::string& format);

}  // namespace paircal
