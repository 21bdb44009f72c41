#include "paircal/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "paircal/detail/csv.hpp"

namespace paircal {

using nlohmann::json;

namespace {

using detail::CsvRow;

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

ArmRole parse_role(const std::string& text, const std::string& source, long line) {
  const std::string t = lower(text);
  if (t == "control" || t == "1") return ArmRole::Control;
  if (t == "intervention" || t == "2") return ArmRole::Intervention;
  throw Error(ErrorCode::ParseError,
              source + " line " + std::to_string(line) +
                  ": role must be control|intervention, got '" + text + "'");
}

template <typename Enum>
Enum parse_enum(const std::string& text, const std::string& what,
                const std::vector<std::pair<std::string, Enum>>& table) {
  const std::string t = lower(text);
  for (const auto& [name, value] : table)
    if (t == name) return value;
  std::string allowed;
  for (const auto& [name, value] : table) {
    if (!allowed.empty()) allowed += "|";
    allowed += name;
  }
  throw Error(ErrorCode::InvalidConfig,
              what + " must be one of " + allowed + ", got '" + text + "'");
}

const std::vector<std::pair<std::string, EstimatorChoice>> kEstimatorTable = {
    {"first_level", EstimatorChoice::FirstLevel},
    {"two_level", EstimatorChoice::TwoLevel},
    {"profile", EstimatorChoice::Profile},
    {"bayes", EstimatorChoice::Bayes},
    {"permutation_exact", EstimatorChoice::PermutationExact},
    {"permutation_mc", EstimatorChoice::PermutationMC},
};

}  // namespace

const char* analysis_mode_name(AnalysisMode m) {
  return m == AnalysisMode::PatientLevel ? "patient_level" : "summary_level";
}

const char* covariance_mode_name(CovarianceMode m) {
  return m == CovarianceMode::Diagonal ? "diagonal" : "full";
}

const char* estimator_choice_name(EstimatorChoice e) {
  for (const auto& [name, value] : kEstimatorTable)
    if (value == e) return name.c_str();
  return "unknown";
}

void AnalysisConfig::validate() const {
  if (calibration && mode != AnalysisMode::PatientLevel)
    throw Error(ErrorCode::InvalidConfig,
                "calibration requires patient-level input");
  if (mc_draws < 1000 && estimators.count(EstimatorChoice::PermutationMC))
    throw Error(ErrorCode::InvalidConfig,
                "Monte Carlo permutation needs mc_draws >= 1000");
  if (outcome_rescale && !(outcome_rescale->second > outcome_rescale->first))
    throw Error(ErrorCode::InvalidConfig,
                "outcome_rescale needs lo < hi");
  if (permutation_full_refit && mode != AnalysisMode::PatientLevel)
    throw Error(ErrorCode::InvalidConfig,
                "full-refit permutation requires patient-level input");
}

AnalysisConfig config_from_json_text(const std::string& text,
                                     const std::string& source_name) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ParseError, source_name + ": " + e.what());
  }
  AnalysisConfig c;
  static const std::set<std::string> known = {
      "mode", "calibration", "estimators", "link", "covariance_mode",
      "sandwich", "cluster_robust", "seed", "mc_draws",
      "permutation_statistic", "permutation_full_refit", "outcome_rescale"};
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key))
      throw Error(ErrorCode::InvalidConfig,
                  source_name + ": unknown config key '" + key + "'");
    (void)value;
  }
  if (j.contains("mode"))
    c.mode = parse_enum<AnalysisMode>(j["mode"].get<std::string>(), "mode",
                                      {{"patient_level", AnalysisMode::PatientLevel},
                                       {"summary_level", AnalysisMode::SummaryLevel}});
  if (j.contains("calibration")) {
    if (j["calibration"].is_boolean()) c.calibration = j["calibration"].get<bool>();
    else
      c.calibration = parse_enum<bool>(j["calibration"].get<std::string>(),
                                       "calibration", {{"on", true}, {"off", false}});
  }
  if (j.contains("estimators")) {
    c.estimators.clear();
    for (const auto& e : j["estimators"])
      c.estimators.insert(
          parse_enum<EstimatorChoice>(e.get<std::string>(), "estimator", kEstimatorTable));
  }
  if (j.contains("link"))
    c.link = parse_enum<LinkFunction>(j["link"].get<std::string>(), "link",
                                      {{"identity", LinkFunction::Identity},
                                       {"logit", LinkFunction::Logit}});
  if (j.contains("covariance_mode"))
    c.covariance_mode = parse_enum<CovarianceMode>(
        j["covariance_mode"].get<std::string>(), "covariance_mode",
        {{"diagonal", CovarianceMode::Diagonal}, {"full", CovarianceMode::Full}});
  if (j.contains("sandwich"))
    c.sandwich = parse_enum<SandwichFlavor>(j["sandwich"].get<std::string>(),
                                            "sandwich",
                                            {{"hc0", SandwichFlavor::HC0},
                                             {"hc1", SandwichFlavor::HC1}});
  if (j.contains("cluster_robust")) c.cluster_robust = j["cluster_robust"].get<bool>();
  if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("mc_draws")) c.mc_draws = j["mc_draws"].get<std::int64_t>();
  if (j.contains("permutation_statistic"))
    c.permutation_statistic = parse_enum<PermutationStatistic>(
        j["permutation_statistic"].get<std::string>(), "permutation_statistic",
        {{"unweighted_mean", PermutationStatistic::UnweightedMean},
         {"two_level_mle", PermutationStatistic::TwoLevelMLE},
         {"first_level_calibrated_mean",
          PermutationStatistic::FirstLevelCalibratedMean}});
  if (j.contains("permutation_full_refit"))
    c.permutation_full_refit = j["permutation_full_refit"].get<bool>();
  if (j.contains("outcome_rescale")) {
    const auto& r = j["outcome_rescale"];
    if (!r.is_array() || r.size() != 2)
      throw Error(ErrorCode::InvalidConfig, "outcome_rescale must be [lo, hi]");
    c.outcome_rescale = {r[0].get<double>(), r[1].get<double>()};
  }
  c.validate();
  return c;
}

AnalysisConfig config_from_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json_text(ss.str(), path);
}

std::string config_to_json_text(const AnalysisConfig& c) {
  nlohmann::ordered_json j;
  j["mode"] = analysis_mode_name(c.mode);
  j["calibration"] = c.calibration;
  std::vector<std::string> est;
  for (EstimatorChoice e : c.estimators) est.push_back(estimator_choice_name(e));
  j["estimators"] = est;
  j["link"] = link_name(c.link);
  j["covariance_mode"] = covariance_mode_name(c.covariance_mode);
  j["sandwich"] = c.sandwich == SandwichFlavor::HC0 ? "hc0" : "hc1";
  j["cluster_robust"] = c.cluster_robust;
  j["seed"] = c.seed;
  j["mc_draws"] = c.mc_draws;
  j["permutation_statistic"] = permutation_statistic_name(c.permutation_statistic);
  j["permutation_full_refit"] = c.permutation_full_refit;
  if (c.outcome_rescale)
    j["outcome_rescale"] = {c.outcome_rescale->first, c.outcome_rescale->second};
  return j.dump(2);
}

namespace {

struct SchemaOverride {
  std::map<std::string, std::string> column_types;                // name -> type
  std::map<std::string, std::vector<std::string>> column_levels;  // name -> levels
};

SchemaOverride load_schema_sidecar(const std::string& path) {
  SchemaOverride out;
  if (path.empty()) return out;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open schema '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ParseError, path + ": " + e.what());
  }
  if (!j.contains("covariates") || !j["covariates"].is_object())
    throw Error(ErrorCode::ParseError,
                path + ": expected top-level object 'covariates'");
  for (const auto& [name, spec] : j["covariates"].items()) {
    if (spec.is_string()) {
      out.column_types[name] = spec.get<std::string>();
    } else if (spec.is_object()) {
      if (spec.contains("type")) out.column_types[name] = spec["type"].get<std::string>();
      if (spec.contains("levels")) {
        std::vector<std::string> levels;
        for (const auto& l : spec["levels"]) levels.push_back(l.get<std::string>());
        out.column_levels[name] = levels;
      }
    } else {
      throw Error(ErrorCode::ParseError,
                  path + ": covariate '" + name + "' must map to a type string "
                  "or an object");
    }
  }
  for (const auto& [name, type] : out.column_types) {
    const std::string t = lower(type);
    if (t != "continuous" && t != "categorical")
      throw Error(ErrorCode::ParseError,
                  path + ": covariate '" + name +
                      "' type must be continuous|categorical, got '" + type + "'");
  }
  return out;
}

}  // namespace

StudyLoad load_patient_csv(const std::string& data_path,
                           const std::string& clusters_path,
                           const std::string& schema_path) {
  const std::vector<CsvRow> rows = detail::parse_csv_file(data_path);
  if (rows.size() < 2)
    throw Error(ErrorCode::ParseError,
                data_path + ": needs a header row and at least one data row");
  const SchemaOverride overrides = load_schema_sidecar(schema_path);

  const CsvRow& header = rows.front();
  if (header.fields.size() < 3)
    throw Error(ErrorCode::ParseError,
                data_path + ": header must start with pair_id,role,outcome");
  auto header_name = [&](size_t i) { return header.fields[i].text; };
  if (lower(header_name(0)) != "pair_id" || lower(header_name(1)) != "role" ||
      lower(header_name(2)) != "outcome")
    throw Error(ErrorCode::ParseError,
                data_path + ": header must start with pair_id,role,outcome; got '" +
                    header_name(0) + "," + header_name(1) + "," + header_name(2) + "'");

  struct Column {
    std::string name;
    size_t index;
    bool is_weight = false;
    bool categorical = false;
  };
  std::vector<Column> cols;
  for (size_t i = 3; i < header.fields.size(); ++i) {
    Column c;
    c.name = header_name(i);
    c.index = i;
    c.is_weight = lower(c.name) == "weight";
    cols.push_back(c);
  }

  // column type inference: quoted or non-numeric fields make a column
  // categorical, unless the schema sidecar says otherwise
  for (Column& c : cols) {
    if (c.is_weight) continue;
    auto it = overrides.column_types.find(c.name);
    if (it != overrides.column_types.end()) {
      c.categorical = lower(it->second) == "categorical";
      continue;
    }
    for (size_t r = 1; r < rows.size(); ++r) {
      if (c.index >= rows[r].fields.size()) continue;  // caught below
      const auto& f = rows[r].fields[c.index];
      double tmp;
      if (f.quoted || !detail::parse_double(f.text, tmp)) {
        c.categorical = true;
        break;
      }
    }
  }

  CovariateSchema schema;
  std::map<std::string, std::set<std::string>> level_sets;
  for (const Column& c : cols) {
    if (c.is_weight) continue;
    if (c.categorical) {
      schema.categorical_names.push_back(c.name);
      level_sets[c.name] = {};
    } else {
      schema.continuous_names.push_back(c.name);
    }
  }

  struct RawArm {
    std::vector<PatientRecord> records;
  };
  std::map<std::string, std::map<ArmRole, RawArm>> groups;
  std::vector<std::string> pair_order;

  for (size_t r = 1; r < rows.size(); ++r) {
    const CsvRow& row = rows[r];
    if (row.fields.size() != header.fields.size())
      throw Error(ErrorCode::ParseError,
                  data_path + " line " + std::to_string(row.line) + ": expected " +
                      std::to_string(header.fields.size()) + " fields, got " +
                      std::to_string(row.fields.size()));
    PatientRecord rec;
    rec.pair_id = row.fields[0].text;
    if (rec.pair_id.empty())
      throw Error(ErrorCode::ParseError, data_path + " line " +
                                             std::to_string(row.line) +
                                             ": empty pair_id");
    rec.role = parse_role(row.fields[1].text, data_path, row.line);
    if (!detail::parse_double(row.fields[2].text, rec.outcome))
      throw Error(ErrorCode::ParseError,
                  data_path + " line " + std::to_string(row.line) +
                      ": outcome is not a number: '" + row.fields[2].text + "'");

    for (const Column& c : cols) {
      const auto& f = row.fields[c.index];
      if (c.is_weight) {
        if (!detail::parse_double(f.text, rec.weight))
          throw Error(ErrorCode::ParseError,
                      data_path + " line " + std::to_string(row.line) +
                          ": weight is not a number: '" + f.text + "'");
        continue;
      }
      if (c.categorical) {
        rec.covariates.categorical.push_back(f.text);
        level_sets[c.name].insert(f.text);
      } else {
        double v;
        if (!detail::parse_double(f.text, v))
          throw Error(ErrorCode::ParseError,
                      data_path + " line " + std::to_string(row.line) +
                          ": covariate '" + c.name + "' is not a number: '" +
                          f.text + "'");
        rec.covariates.continuous.push_back(v);
      }
    }

    auto& group = groups[rec.pair_id];
    if (std::find(pair_order.begin(), pair_order.end(), rec.pair_id) ==
        pair_order.end())
      pair_order.push_back(rec.pair_id);
    group[rec.role].records.push_back(std::move(rec));
  }

  // declared levels from the sidecar win; otherwise sorted observed levels
  for (const std::string& name : schema.categorical_names) {
    auto it = overrides.column_levels.find(name);
    if (it != overrides.column_levels.end()) {
      schema.categorical_levels.push_back(it->second);
    } else {
      schema.categorical_levels.emplace_back(level_sets[name].begin(),
                                             level_sets[name].end());
    }
  }

  StudyLoad out;
  out.study.covariate_schema = schema;

  // served counts
  std::map<std::string, std::map<ArmRole, long>> served;
  if (!clusters_path.empty()) {
    const std::vector<CsvRow> crows = detail::parse_csv_file(clusters_path);
    if (crows.size() < 2)
      throw Error(ErrorCode::ParseError,
                  clusters_path + ": needs a header row and data rows");
    const CsvRow& chead = crows.front();
    if (chead.fields.size() < 3 || lower(chead.fields[0].text) != "pair_id" ||
        lower(chead.fields[1].text) != "role" ||
        lower(chead.fields[2].text) != "n_served")
      throw Error(ErrorCode::ParseError,
                  clusters_path + ": header must be pair_id,role,n_served");
    for (size_t r = 1; r < crows.size(); ++r) {
      const CsvRow& row = crows[r];
      if (row.fields.size() < 3)
        throw Error(ErrorCode::ParseError, clusters_path + " line " +
                                               std::to_string(row.line) +
                                               ": expected 3 fields");
      const ArmRole role = parse_role(row.fields[1].text, clusters_path, row.line);
      served[row.fields[0].text][role] = detail::parse_positive_int(
          row.fields[2].text, "n_served", clusters_path, row.line);
    }
  } else {
    out.warnings.push_back(
        "no cluster file given; defaulting n_served to the sampled count for "
        "every arm");
  }

  for (const std::string& pid : pair_order) {
    Pair pair;
    pair.pair_id = pid;
    auto& group = groups[pid];
    for (ArmRole role : {ArmRole::Control, ArmRole::Intervention}) {
      ClusterArm arm;
      arm.pair_id = pid;
      arm.role = role;
      arm.records = std::move(group[role].records);
      arm.n_sampled = static_cast<std::int64_t>(arm.records.size());
      const auto sit = served.find(pid);
      if (sit != served.end() && sit->second.count(role)) {
        arm.n_served = sit->second.at(role);
      } else {
        arm.n_served = arm.n_sampled;
        if (!clusters_path.empty())
          out.warnings.push_back("pair " + pid + " " + arm_role_name(role) +
                                 " arm: no n_served entry; defaulting to the "
                                 "sampled count");
      }
      if (role == ArmRole::Control) pair.control = std::move(arm);
      else pair.intervention = std::move(arm);
    }
    out.study.pairs.push_back(std::move(pair));
  }

  out.study = validate_study(std::move(out.study));
  return out;
}

std::vector<PairSummary> load_summary_csv(const std::string& path) {
  const std::vector<CsvRow> rows = detail::parse_csv_file(path);
  if (rows.size() < 2)
    throw Error(ErrorCode::ParseError,
                path + ": needs a header row and at least one data row");
  const CsvRow& header = rows.front();

  int idx_pair = -1, idx_delta = -1, idx_sqrt_v = -1, idx_var = -1, idx_kind = -1;
  for (size_t i = 0; i < header.fields.size(); ++i) {
    const std::string h = lower(header.fields[i].text);
    if (h == "pair_id") idx_pair = static_cast<int>(i);
    else if (h == "delta") idx_delta = static_cast<int>(i);
    else if (h == "sqrt_v") idx_sqrt_v = static_cast<int>(i);
    else if (h == "variance") idx_var = static_cast<int>(i);
    else if (h == "kind") idx_kind = static_cast<int>(i);
  }
  if (idx_pair < 0 || idx_delta < 0 || (idx_sqrt_v < 0 && idx_var < 0))
    throw Error(ErrorCode::ParseError,
                path + ": header needs pair_id, delta, and sqrt_v or variance");

  std::vector<PairSummary> out;
  for (size_t r = 1; r < rows.size(); ++r) {
    const CsvRow& row = rows[r];
    auto field = [&](int idx) -> const std::string& {
      if (idx < 0 || static_cast<size_t>(idx) >= row.fields.size())
        throw Error(ErrorCode::ParseError, path + " line " +
                                               std::to_string(row.line) +
                                               ": missing required field");
      return row.fields[static_cast<size_t>(idx)].text;
    };
    PairSummary s;
    s.pair_id = field(idx_pair);
    if (!detail::parse_double(field(idx_delta), s.delta))
      throw Error(ErrorCode::ParseError, path + " line " + std::to_string(row.line) +
                                             ": delta is not a number");
    if (idx_var >= 0 && static_cast<size_t>(idx_var) < row.fields.size() &&
        !row.fields[static_cast<size_t>(idx_var)].text.empty()) {
      if (!detail::parse_double(field(idx_var), s.variance))
        throw Error(ErrorCode::ParseError, path + " line " +
                                               std::to_string(row.line) +
                                               ": variance is not a number");
    } else {
      double sv;
      if (!detail::parse_double(field(idx_sqrt_v), sv))
        throw Error(ErrorCode::ParseError, path + " line " +
                                               std::to_string(row.line) +
                                               ": sqrt_v is not a number");
      if (sv < 0.0)
        throw Error(ErrorCode::NegativeVariance,
                    path + " line " + std::to_string(row.line) +
                        ": sqrt_v must be nonnegative");
      s.variance = sv * sv;
    }
    if (s.variance < 0.0)
      throw Error(ErrorCode::NegativeVariance,
                  path + " line " + std::to_string(row.line) +
                      ": variance must be nonnegative");
    if (idx_kind >= 0 && static_cast<size_t>(idx_kind) < row.fields.size()) {
      const std::string k = lower(field(idx_kind));
      if (k == "crude") s.kind = SummaryKind::Crude;
      else if (k == "calibrated") s.kind = SummaryKind::Calibrated;
      else
        throw Error(ErrorCode::ParseError,
                    path + " line " + std::to_string(row.line) +
                        ": kind must be crude|calibrated, got '" + k + "'");
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::optional<Eigen::VectorXd> design_weights(const Study& study) {
  std::vector<int> order(study.pairs.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return study.pairs[a].pair_id < study.pairs[b].pair_id;
  });
  std::vector<double> w;
  bool nontrivial = false;
  for (int pi : order) {
    const Pair& pair = study.pairs[pi];
    for (ArmRole role : {ArmRole::Control, ArmRole::Intervention}) {
      for (const PatientRecord& rec : pair.arm(role).records) {
        w.push_back(rec.weight);
        nontrivial = nontrivial || rec.weight != 1.0;
      }
    }
  }
  if (!nontrivial) return std::nullopt;
  Eigen::VectorXd out(static_cast<long>(w.size()));
  for (size_t i = 0; i < w.size(); ++i) out[static_cast<long>(i)] = w[i];
  return out;
}

std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open file '" + path + "'");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[4096];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
    if (!in) break;
  }
  std::ostringstream os;
  os << "fnv1a64:" << std::hex << h;
  return os.str();
}

}  // namespace paircal
