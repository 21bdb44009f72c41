// paircal: covariate-calibrated effect estimation for matched-pair
// cluster-randomized designs. Subcommands: analyze, diagnose, permute,
// simulate-result1.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "paircal/io.hpp"
#include "paircal/permutation.hpp"
#include "paircal/report.hpp"
#include "paircal/result1.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace {

using namespace paircal;

struct CommonArgs {
  std::string config_path;
  std::string data_path, clusters_path, schema_path, summaries_path;
  std::string format = "json";
  std::string out_dir;
  std::optional<std::string> mode, link, covariance_mode, sandwich, statistic;
  std::optional<bool> calibration;
  std::optional<std::vector<std::string>> estimators;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> mc_draws;
  bool full_refit = false;
};

void add_io_flags(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("--config", a.config_path, "JSON config file");
  cmd->add_option("--data", a.data_path, "patient-level CSV");
  cmd->add_option("--clusters", a.clusters_path, "cluster sizes CSV (pair_id,role,n_served)");
  cmd->add_option("--schema", a.schema_path, "covariate schema sidecar (JSON)");
  cmd->add_option("--summaries", a.summaries_path, "pair summary CSV");
  cmd->add_option("--format", a.format, "json|text|csv-bundle")->default_val("json");
  cmd->add_option("--out", a.out_dir, "write output files into this directory");
}

AnalysisConfig effective_config(const CommonArgs& a) {
  AnalysisConfig c;
  if (!a.config_path.empty()) c = config_from_json_file(a.config_path);

  // flag overrides, applied on top of the config file
  nlohmann::ordered_json patch = nlohmann::ordered_json::object();
  if (a.mode) patch["mode"] = *a.mode;
  if (a.calibration) patch["calibration"] = *a.calibration;
  if (a.estimators) patch["estimators"] = *a.estimators;
  if (a.link) patch["link"] = *a.link;
  if (a.covariance_mode) patch["covariance_mode"] = *a.covariance_mode;
  if (a.sandwich) patch["sandwich"] = *a.sandwich;
  if (a.seed) patch["seed"] = *a.seed;
  if (a.mc_draws) patch["mc_draws"] = *a.mc_draws;
  if (a.statistic) patch["permutation_statistic"] = *a.statistic;
  if (a.full_refit) patch["permutation_full_refit"] = true;
  if (!patch.empty()) {
    nlohmann::ordered_json base = nlohmann::ordered_json::parse(config_to_json_text(c));
    for (const auto& [k, v] : patch.items()) base[k] = v;
    c = config_from_json_text(base.dump(), "<flags>");
  }

  // infer the input mode when not stated explicitly
  if (!a.mode && a.config_path.empty()) {
    if (!a.summaries_path.empty()) {
      c.mode = AnalysisMode::SummaryLevel;
      c.calibration = false;
    } else {
      c.mode = AnalysisMode::PatientLevel;
    }
  }
  c.validate();
  return c;
}

void write_outputs(const std::map<std::string, std::string>& files,
                   const std::string& out_dir) {
  if (out_dir.empty()) {
    for (const auto& [name, content] : files) {
      if (files.size() > 1) std::cout << "## " << name << "\n";
      std::cout << content;
      if (!content.empty() && content.back() != '\n') std::cout << "\n";
    }
    return;
  }
  std::filesystem::create_directories(out_dir);
  for (const auto& [name, content] : files) {
    const std::filesystem::path path = std::filesystem::path(out_dir) / name;
    std::ofstream out(path, std::ios::binary);
    if (!out)
      throw Error(ErrorCode::ParseError, "cannot write '" + path.string() + "'");
    out << content;
  }
}

AnalysisReport analyze_with_inputs(const CommonArgs& a, const AnalysisConfig& cfg) {
  AnalysisReport rep;
  if (cfg.mode == AnalysisMode::PatientLevel) {
    if (a.data_path.empty())
      throw Error(ErrorCode::InvalidConfig, "patient-level mode needs --data");
    StudyLoad load = load_patient_csv(a.data_path, a.clusters_path, a.schema_path);
    rep = run_analysis(load.study, cfg);
    rep.warnings.insert(rep.warnings.begin(), load.warnings.begin(),
                        load.warnings.end());
    rep.input_digests.emplace_back(a.data_path, file_digest(a.data_path));
    if (!a.clusters_path.empty())
      rep.input_digests.emplace_back(a.clusters_path, file_digest(a.clusters_path));
    if (!a.schema_path.empty())
      rep.input_digests.emplace_back(a.schema_path, file_digest(a.schema_path));
  } else {
    if (a.summaries_path.empty())
      throw Error(ErrorCode::InvalidConfig, "summary-level mode needs --summaries");
    const std::vector<PairSummary> summaries = load_summary_csv(a.summaries_path);
    rep = run_analysis(summaries, cfg);
    rep.input_digests.emplace_back(a.summaries_path, file_digest(a.summaries_path));
  }
  return rep;
}

int run(int argc, char** argv) {
  CLI::App app{"paircal: effect estimation in matched-pair cluster-randomized "
               "designs, with covariate calibration"};
  app.require_subcommand(1);

  CommonArgs a;
  std::string mode_s, link_s, covmode_s, sandwich_s, stat_s;
  std::vector<std::string> est_s;
  std::uint64_t seed_v = 0;
  std::int64_t draws_v = 0;
  bool calib_on = false, calib_off = false;

  auto* analyze = app.add_subcommand("analyze", "full analysis pipeline");
  add_io_flags(analyze, a);
  analyze->add_option("--mode", mode_s, "patient_level|summary_level");
  analyze->add_flag("--calibrate", calib_on, "turn calibration on");
  analyze->add_flag("--no-calibrate", calib_off, "turn calibration off");
  analyze->add_option("--estimators", est_s,
                      "subset of first_level,two_level,profile,bayes,"
                      "permutation_exact,permutation_mc")
      ->delimiter(',');
  analyze->add_option("--link", link_s, "identity|logit");
  analyze->add_option("--covariance-mode", covmode_s, "diagonal|full");
  analyze->add_option("--sandwich", sandwich_s, "hc0|hc1");
  analyze->add_option("--seed", seed_v, "RNG seed (required for Monte Carlo)");
  analyze->add_option("--mc-draws", draws_v, "Monte Carlo permutation draws");
  analyze->add_option("--statistic", stat_s,
                      "unweighted_mean|two_level_mle|first_level_calibrated_mean");
  analyze->add_flag("--full-refit", a.full_refit,
                    "refit the outcome model for every permutation");

  auto* diagnose = app.add_subcommand(
      "diagnose", "covariate imbalance and dependence diagnostics only");
  add_io_flags(diagnose, a);

  auto* permute = app.add_subcommand("permute", "permutation test on summaries");
  add_io_flags(permute, a);
  std::string perm_kind = "crude";
  bool perm_mc = false;
  permute->add_option("--kind", perm_kind, "crude|calibrated")->default_val("crude");
  permute->add_option("--statistic", stat_s,
                      "unweighted_mean|two_level_mle|first_level_calibrated_mean");
  permute->add_flag("--monte-carlo", perm_mc, "sample instead of enumerating");
  permute->add_option("--draws", draws_v, "Monte Carlo draws");
  permute->add_option("--seed", seed_v, "RNG seed (required with --monte-carlo)");

  auto* sim = app.add_subcommand("simulate-result1",
                                 "meta-analytic inconsistency construction");
  double sigma2 = 9.0;
  int n_per_arm = 10;
  std::int64_t num_pairs = 100000;
  bool serial = false;
  bool got_seed = false;
  sim->add_option("--sigma2", sigma2, "variance multiplier of type-2 practices")
      ->default_val(9.0);
  sim->add_option("--n-per-arm", n_per_arm, "patients sampled per practice")
      ->default_val(10);
  sim->add_option("--num-pairs", num_pairs, "number of simulated pairs")
      ->default_val(100000);
  auto* seed_opt = sim->add_option("--seed", seed_v, "RNG seed (required)");
  sim->add_flag("--serial", serial, "run the serial reference kernel");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;  // input error
  }
  got_seed = seed_opt->count() > 0;

  try {
    if (analyze->parsed() || diagnose->parsed()) {
      if (!mode_s.empty()) a.mode = mode_s;
      if (calib_on && calib_off)
        throw Error(ErrorCode::InvalidConfig,
                    "--calibrate and --no-calibrate are mutually exclusive");
      if (calib_on) a.calibration = true;
      if (calib_off) a.calibration = false;
      if (!est_s.empty()) a.estimators = est_s;
      if (!link_s.empty()) a.link = link_s;
      if (!covmode_s.empty()) a.covariance_mode = covmode_s;
      if (!sandwich_s.empty()) a.sandwich = sandwich_s;
      if (analyze->count("--seed")) a.seed = seed_v;
      if (analyze->count("--mc-draws")) a.mc_draws = draws_v;
      if (!stat_s.empty()) a.statistic = stat_s;

      if (diagnose->parsed()) {
        // diagnostics only: drop every estimator
        a.estimators = std::vector<std::string>{};
        if (!a.mode && a.config_path.empty())
          a.mode = a.summaries_path.empty() ? "patient_level" : "summary_level";
        if (a.mode && *a.mode == "summary_level") a.calibration = false;
      }
      if (!a.mode && a.config_path.empty() && a.data_path.empty() &&
          !a.summaries_path.empty())
        a.mode = "summary_level";
      if (a.mode && *a.mode == "summary_level" && !a.calibration)
        a.calibration = false;

      const AnalysisConfig cfg = effective_config(a);
      if (cfg.estimators.count(EstimatorChoice::PermutationMC) &&
          !analyze->count("--seed") && !cfg.seed && a.config_path.empty())
        throw Error(ErrorCode::InvalidConfig,
                    "--seed is required when permutation_mc is selected");
      const AnalysisReport rep = analyze_with_inputs(a, cfg);
      write_outputs(emit_report(rep, a.format), a.out_dir);
      return 0;
    }

    if (permute->parsed()) {
      if (a.summaries_path.empty())
        throw Error(ErrorCode::InvalidConfig, "permute needs --summaries");
      const std::vector<PairSummary> all = load_summary_csv(a.summaries_path);
      const SummaryKind kind =
          perm_kind == "calibrated" ? SummaryKind::Calibrated : SummaryKind::Crude;
      std::vector<PairSummary> rows;
      for (const auto& s : all)
        if (s.kind == kind) rows.push_back(s);
      std::sort(rows.begin(), rows.end(),
                [](const PairSummary& x, const PairSummary& y) {
                  return x.pair_id < y.pair_id;
                });
      if (rows.empty())
        throw Error(ErrorCode::InvalidConfig,
                    std::string("no '") + (kind == SummaryKind::Crude ? "crude" : "calibrated") +
                        "' rows in " + a.summaries_path);
      StatisticSpec spec;
      if (stat_s == "two_level_mle") {
        spec.kind = PermutationStatistic::TwoLevelMLE;
        for (const auto& s : rows) spec.variances.push_back(s.variance);
      } else if (stat_s == "first_level_calibrated_mean") {
        spec.kind = PermutationStatistic::FirstLevelCalibratedMean;
      }
      std::vector<double> deltas;
      for (const auto& s : rows) deltas.push_back(s.delta);

      PermutationResult res;
      if (perm_mc) {
        if (!permute->count("--seed"))
          throw Error(ErrorCode::InvalidConfig, "--seed is required with --monte-carlo");
        if (!permute->count("--draws")) draws_v = 100000;
        res = permute_monte_carlo(deltas, spec, draws_v, seed_v);
      } else {
        res = permute_exact(deltas, spec);
      }
      nlohmann::ordered_json j;
      j["kind"] = kind == SummaryKind::Crude ? "crude" : "calibrated";
      j["statistic"] = permutation_statistic_name(spec.kind);
      j["mode"] = res.mode == PermutationMode::Exact ? "exact" : "monte_carlo";
      j["p_value"] = res.p_value;
      j["n_permutations"] = res.n_permutations;
      j["statistic_observed"] = res.statistic_observed;
      std::cout << j.dump(2) << "\n";
      return 0;
    }

    if (sim->parsed()) {
      if (!got_seed)
        throw Error(ErrorCode::InvalidConfig,
                    "--seed is required for simulate-result1");
      Result1Config cfg;
      cfg.sigma2 = sigma2;
      cfg.n_per_arm = n_per_arm;
      cfg.num_pairs = num_pairs;
      cfg.seed = seed_v;
      const double plim = plim_mle(cfg);
      const Result1Simulation s =
          simulate_mle(cfg, serial ? Exec::Serial : Exec::Parallel);
      nlohmann::ordered_json j;
      j["sigma2"] = cfg.sigma2;
      j["n_per_arm"] = cfg.n_per_arm;
      j["num_pairs"] = cfg.num_pairs;
      j["seed"] = cfg.seed;
      j["plim"] = plim;
      j["estimate"] = s.estimate;
      j["mc_se"] = s.mc_se;
      j["mean_unweighted"] = s.mean_unweighted;
      j["mc_se_unweighted"] = s.mc_se_unweighted;
      std::cout << j.dump(2) << "\n";
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return is_input_error(e.code()) ? 1 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
