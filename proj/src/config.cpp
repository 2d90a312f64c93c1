#include "surveycalib/config.hpp"

#include "surveycalib/errors.hpp"
#include "surveycalib/io.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace surveycalib {

namespace {

using nlohmann::json;
using Violations = std::vector<std::string>;

void check_keys(const json& obj, const std::string& where, const std::set<std::string>& allowed,
                Violations& v) {
  for (const auto& [key, _] : obj.items())
    if (!allowed.count(key)) v.push_back(where + ": unknown key '" + key + "'");
}

bool is_object(const json& j, const std::string& where, Violations& v) {
  if (j.is_object()) return true;
  v.push_back(where + ": expected an object");
  return false;
}

template <typename T>
void read_integer(const json& obj, const std::string& key, const std::string& where, T& out,
                  Violations& v, long long min_value) {
  if (!obj.contains(key)) return;
  const json& j = obj.at(key);
  if (!j.is_number_integer()) {
    v.push_back(where + "." + key + ": expected an integer");
    return;
  }
  const auto value = j.get<long long>();
  if (value < min_value) {
    v.push_back(where + "." + key + ": must be >= " + std::to_string(min_value));
    return;
  }
  out = static_cast<T>(value);
}

void read_number(const json& obj, const std::string& key, const std::string& where, double& out,
                 Violations& v) {
  if (!obj.contains(key)) return;
  const json& j = obj.at(key);
  if (!j.is_number()) {
    v.push_back(where + "." + key + ": expected a number");
    return;
  }
  out = j.get<double>();
}

void read_bool(const json& obj, const std::string& key, const std::string& where, bool& out,
               Violations& v) {
  if (!obj.contains(key)) return;
  if (!obj.at(key).is_boolean()) {
    v.push_back(where + "." + key + ": expected true or false");
    return;
  }
  out = obj.at(key).get<bool>();
}

void read_strings(const json& obj, const std::string& key, const std::string& where,
                  std::vector<std::string>& out, Violations& v) {
  if (!obj.contains(key)) return;
  const json& j = obj.at(key);
  if (!j.is_array()) {
    v.push_back(where + "." + key + ": expected an array of column names");
    return;
  }
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_string()) {
      v.push_back(where + "." + key + "[" + std::to_string(i) + "]: expected a string");
      continue;
    }
    out.push_back(j[i].get<std::string>());
  }
}

SyntheticPopSpec read_synthetic(const json& j, Violations& v) {
  const std::string where = "population.synthetic";
  SyntheticPopSpec s;
  if (!is_object(j, where, v)) return s;
  check_keys(j, where,
             {"units", "slots_per_day", "past_days", "future_days", "harmonics", "level_mean",
              "unit_level_sd", "amplitude", "noise_sd", "cross_week_correlation", "seed"},
             v);
  read_integer(j, "units", where, s.units, v, 2);
  read_integer(j, "slots_per_day", where, s.slots_per_day, v, 1);
  read_integer(j, "past_days", where, s.past_days, v, 1);
  read_integer(j, "future_days", where, s.future_days, v, 1);
  read_integer(j, "harmonics", where, s.harmonics, v, 0);
  read_integer(j, "seed", where, s.seed, v, 0);
  read_number(j, "level_mean", where, s.level_mean, v);
  read_number(j, "unit_level_sd", where, s.unit_level_sd, v);
  read_number(j, "amplitude", where, s.amplitude, v);
  read_number(j, "noise_sd", where, s.noise_sd, v);
  read_number(j, "cross_week_correlation", where, s.cross_week_correlation, v);
  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    v.push_back(std::string("population.") + e.what());
  }
  return s;
}

std::optional<EstimatorSpec> read_estimator(const json& j, const std::string& where, Violations& v) {
  if (j.is_string()) {
    try {
      return parse_estimator_id(j.get<std::string>());
    } catch (const std::invalid_argument& e) {
      v.push_back(where + ": " + e.what());
      return std::nullopt;
    }
  }
  if (!is_object(j, where, v)) return std::nullopt;
  check_keys(j, where, {"variant", "r", "p1", "estimated", "lambda", "intercept", "r_max"}, v);
  if (!j.contains("variant") || !j.at("variant").is_string()) {
    v.push_back(where + ".variant: required string (HT, full, pc, epc, pc2, ppc, ridge)");
    return std::nullopt;
  }
  const auto variant = j.at("variant").get<std::string>();
  EstimatorSpec spec;
  const std::size_t before = v.size();
  const bool auto_r = j.contains("r") && j.at("r") == "auto";
  if (variant == "HT" || variant == "ht") {
    spec.variant = EstimatorVariant::Ht;
  } else if (variant == "full") {
    spec.variant = EstimatorVariant::Full;
  } else if (variant == "pc" || variant == "epc") {
    const bool pc = variant == "pc";
    if (!j.contains("r")) v.push_back(where + ".r: required for variant '" + variant + "'");
    spec.variant = auto_r ? (pc ? EstimatorVariant::PcAuto : EstimatorVariant::EpcAuto)
                          : (pc ? EstimatorVariant::Pc : EstimatorVariant::Epc);
  } else if (variant == "pc2") {
    spec.variant = EstimatorVariant::Pc2;
    if (!j.contains("r")) v.push_back(where + ".r: required for variant 'pc2'");
  } else if (variant == "ppc") {
    spec.variant = EstimatorVariant::Ppc;
    if (!j.contains("r")) v.push_back(where + ".r: required for variant 'ppc'");
    if (!j.contains("p1")) v.push_back(where + ".p1: required for variant 'ppc'");
  } else if (variant == "ridge") {
    spec.variant = EstimatorVariant::Ridge;
    if (!j.contains("lambda")) v.push_back(where + ".lambda: required for variant 'ridge'");
  } else {
    v.push_back(where + ".variant: unknown estimator '" + variant + "'");
    return std::nullopt;
  }
  if (!auto_r) read_integer(j, "r", where, spec.r, v, 0);
  read_integer(j, "p1", where, spec.p1, v, 0);
  read_integer(j, "r_max", where, spec.r_max, v, 0);
  read_bool(j, "estimated", where, spec.estimated, v);
  read_bool(j, "intercept", where, spec.include_intercept, v);
  if (j.contains("lambda") && j.at("lambda") != "auto") {
    double lambda = 0.0;
    read_number(j, "lambda", where, lambda, v);
    if (lambda < 0.0) v.push_back(where + ".lambda: must be >= 0");
    spec.lambda = lambda;
  }
  if (v.size() != before) return std::nullopt;
  return spec;
}

// Auxiliary dimension implied by a CSV population without reading the data.
std::optional<Index> csv_aux_dim(const RunConfig& c, Violations& v) {
  if (!c.aux_columns.empty()) return static_cast<Index>(c.aux_columns.size());
  std::ifstream in(*c.csv_path);
  if (!in) {
    v.push_back("population.csv_path: cannot open '" + *c.csv_path + "'");
    return std::nullopt;
  }
  std::string line;
  std::getline(in, line);
  std::stringstream header(line);
  Index columns = 0;
  for (std::string cell; std::getline(header, cell, ',');) ++columns;
  return columns - static_cast<Index>(c.outcome_columns.size());
}

void validate_bank(const RunConfig& c, Index p, Violations& v) {
  const Index n = c.sample_size > 0 ? c.sample_size : std::numeric_limits<Index>::max() / 4;
  std::set<std::string> ids;
  for (std::size_t i = 0; i < c.estimators.size(); ++i) {
    const std::string where = "estimators[" + std::to_string(i) + "]";
    try {
      c.estimators[i].validate(p, n);
    } catch (const std::invalid_argument& e) {
      v.push_back(where + ": " + e.what());
    }
    if (!ids.insert(c.estimators[i].id()).second)
      v.push_back(where + ": duplicate estimator '" + c.estimators[i].id() + "'");
  }
  if (!ids.count(c.reference)) v.push_back("reference: '" + c.reference + "' is not in the estimator bank");
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError({std::string("not valid JSON: ") + e.what()});
  }
  Violations v;
  RunConfig c;
  if (!doc.is_object()) throw ConfigError({"top level: expected an object"});
  check_keys(doc, "top level",
             {"population", "columns", "design", "estimators", "reference", "replicates", "output"}, v);

  if (!doc.contains("population")) {
    v.push_back("population: required section is missing");
  } else if (is_object(doc["population"], "population", v)) {
    const json& pop = doc["population"];
    check_keys(pop, "population", {"csv_path", "synthetic"}, v);
    const bool has_csv = pop.contains("csv_path");
    const bool has_syn = pop.contains("synthetic");
    if (has_csv && has_syn) {
      v.push_back("population: give either csv_path or synthetic, not both (ambiguous)");
    } else if (!has_csv && !has_syn) {
      v.push_back("population: needs csv_path or synthetic");
    } else if (has_csv) {
      if (pop["csv_path"].is_string())
        c.csv_path = pop["csv_path"].get<std::string>();
      else
        v.push_back("population.csv_path: expected a string");
    } else {
      c.synthetic = read_synthetic(pop["synthetic"], v);
    }
  }

  if (doc.contains("columns") && is_object(doc["columns"], "columns", v)) {
    check_keys(doc["columns"], "columns", {"aux", "outcomes"}, v);
    read_strings(doc["columns"], "aux", "columns", c.aux_columns, v);
    read_strings(doc["columns"], "outcomes", "columns", c.outcome_columns, v);
    if (c.synthetic && (!c.aux_columns.empty() || !c.outcome_columns.empty()))
      v.push_back("columns: only applies to csv_path populations");
  }

  if (doc.contains("design") && is_object(doc["design"], "design", v)) {
    check_keys(doc["design"], "design", {"n", "seed"}, v);
    read_integer(doc["design"], "n", "design", c.sample_size, v, 1);
    read_integer(doc["design"], "seed", "design", c.seed, v, 0);
  }

  if (doc.contains("estimators")) {
    const json& bank = doc["estimators"];
    if (!bank.is_array() || bank.empty()) {
      v.push_back("estimators: expected a non-empty array");
    } else {
      for (std::size_t i = 0; i < bank.size(); ++i)
        if (auto spec = read_estimator(bank[i], "estimators[" + std::to_string(i) + "]", v))
          c.estimators.push_back(*spec);
    }
  } else {
    c.estimators = {parse_estimator_id("HT"), parse_estimator_id("full")};
  }

  if (doc.contains("reference")) {
    if (doc["reference"].is_string())
      c.reference = doc["reference"].get<std::string>();
    else
      v.push_back("reference: expected an estimator id string");
  }
  read_integer(doc, "replicates", "top level", c.replicates, v, 2);

  if (doc.contains("output") && is_object(doc["output"], "output", v)) {
    check_keys(doc["output"], "output", {"dir", "per_replicate"}, v);
    if (doc["output"].contains("dir")) {
      if (doc["output"]["dir"].is_string())
        c.output_dir = doc["output"]["dir"].get<std::string>();
      else
        v.push_back("output.dir: expected a string");
    }
    read_bool(doc["output"], "per_replicate", "output", c.per_replicate, v);
  }

  if (v.empty()) {
    std::optional<Index> p;
    if (c.synthetic) p = c.synthetic->aux_dim();
    else if (c.csv_path) p = csv_aux_dim(c, v);
    if (p) {
      c.aux_dim = *p;
      if (c.synthetic && c.sample_size > c.synthetic->units)
        v.push_back("design.n: larger than the population (" + std::to_string(c.synthetic->units) + ")");
      validate_bank(c, *p, v);
    }
  }
  if (!v.empty()) throw ConfigError(std::move(v));
  return c;
}

RunConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"cannot open config file '" + path + "'"});
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

void validate_run(const RunConfig& config, Index aux_dim) {
  Violations v;
  if (config.sample_size < 1) v.push_back("design.n: a sample size is required");
  validate_bank(config, aux_dim, v);
  if (!v.empty()) throw ConfigError(std::move(v));
}

std::string config_to_json(const RunConfig& c) {
  using nlohmann::ordered_json;
  ordered_json doc;
  if (c.csv_path) {
    doc["population"]["csv_path"] = *c.csv_path;
  } else if (c.synthetic) {
    const auto& s = *c.synthetic;
    ordered_json syn;
    syn["units"] = s.units;
    syn["slots_per_day"] = s.slots_per_day;
    syn["past_days"] = s.past_days;
    syn["future_days"] = s.future_days;
    syn["harmonics"] = s.harmonics;
    syn["level_mean"] = s.level_mean;
    syn["unit_level_sd"] = s.unit_level_sd;
    syn["amplitude"] = s.amplitude;
    syn["noise_sd"] = s.noise_sd;
    syn["cross_week_correlation"] = s.cross_week_correlation;
    syn["seed"] = s.seed;
    doc["population"]["synthetic"] = syn;
  }
  if (!c.aux_columns.empty() || !c.outcome_columns.empty()) {
    doc["columns"]["aux"] = c.aux_columns;
    doc["columns"]["outcomes"] = c.outcome_columns;
  }
  doc["design"]["n"] = c.sample_size;
  doc["design"]["seed"] = c.seed;
  ordered_json bank = ordered_json::array();
  for (const auto& e : c.estimators) bank.push_back(e.id());
  doc["estimators"] = bank;
  doc["reference"] = c.reference;
  doc["replicates"] = c.replicates;
  doc["output"]["dir"] = c.output_dir;
  doc["output"]["per_replicate"] = c.per_replicate;
  return doc.dump();
}

PopulationFrame load_population(const RunConfig& config) {
  if (config.synthetic) return synthetic_load_population(*config.synthetic);
  if (!config.csv_path) throw std::invalid_argument("config has no population");
  return frame_from_csv(read_csv_file(*config.csv_path), config.aux_columns, config.outcome_columns);
}

}  // namespace surveycalib
