#include "surveycalib/cli.hpp"

#include "surveycalib/config.hpp"
#include "surveycalib/errors.hpp"
#include "surveycalib/io.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace surveycalib {

namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

struct PopulationArgs {
  std::string input;
  std::string config;
  std::vector<std::string> aux;
  std::vector<std::string> outcomes;
};

struct SampleArgs {
  std::optional<Index> n;
  std::optional<std::uint64_t> seed;
  std::uint64_t replicate = 0;
  std::string indices_path;
};

void add_population_options(CLI::App* cmd, PopulationArgs& a) {
  cmd->add_option("--input", a.input, "population CSV (header row required)");
  cmd->add_option("--config", a.config, "experiment config (JSON)");
  cmd->add_option("--aux", a.aux, "auxiliary columns (default: all non-outcome columns)")->delimiter(',');
  cmd->add_option("--outcomes", a.outcomes, "outcome columns")->delimiter(',');
}

void add_sample_options(CLI::App* cmd, SampleArgs& a) {
  cmd->add_option("--n", a.n, "sample size (SRSWOR draw)");
  cmd->add_option("--seed", a.seed, "seed of the draw");
  cmd->add_option("--replicate", a.replicate, "replicate stream of the draw");
  cmd->add_option("--sample-indices", a.indices_path,
                  "CSV with a 'unit' column (1-based) and optional 'weight' column");
}

std::optional<RunConfig> config_of(const PopulationArgs& a) {
  if (a.config.empty()) return std::nullopt;
  return parse_config(a.config);
}

PopulationFrame load_frame(const PopulationArgs& a, const std::optional<RunConfig>& config) {
  if (!a.input.empty()) return frame_from_csv(read_csv_file(a.input), a.aux, a.outcomes);
  if (!config) throw std::invalid_argument("give --input or --config");
  RunConfig c = *config;
  if (!a.aux.empty()) c.aux_columns = a.aux;
  if (!a.outcomes.empty()) c.outcome_columns = a.outcomes;
  return load_population(c);
}

SampleData obtain_sample(const PopulationFrame& frame, const SampleArgs& a,
                         const std::optional<RunConfig>& config) {
  const Index N = frame.size();
  if (!a.indices_path.empty()) {
    const CsvTable t = read_csv_file(a.indices_path);
    const Index unit_col = t.column("unit") >= 0 ? t.column("unit") : 0;
    const Index weight_col = t.column("weight");
    std::vector<Index> idx;
    for (Index i = 0; i < t.values.rows(); ++i) {
      const double u = t.values(i, unit_col);
      if (u != std::floor(u) || u < 1 || u > static_cast<double>(N))
        throw std::invalid_argument(a.indices_path + ": unit " + format_double(u) + " is not in 1.." +
                                    std::to_string(N));
      idx.push_back(static_cast<Index>(u) - 1);
    }
    Vector w = weight_col >= 0 ? Vector(t.values.col(weight_col))
                               : Vector::Constant(static_cast<Index>(idx.size()),
                                                  static_cast<double>(N) / static_cast<double>(idx.size()));
    std::vector<Index> order(idx.size());
    std::iota(order.begin(), order.end(), Index{0});
    std::sort(order.begin(), order.end(), [&](Index x, Index y) { return idx[x] < idx[y]; });
    std::vector<Index> sorted;
    Vector sorted_w(w.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
      sorted.push_back(idx[static_cast<std::size_t>(order[i])]);
      sorted_w(static_cast<Index>(i)) = w(order[i]);
    }
    return SampleData::from_frame(frame, std::move(sorted), std::move(sorted_w));
  }
  DesignSpec design;
  design.population_size = N;
  design.sample_size = a.n ? *a.n : (config ? config->sample_size : 0);
  design.seed = a.seed ? *a.seed : (config ? config->seed : 1);
  if (design.sample_size < 1) throw std::invalid_argument("give --n, design.n in the config, or --sample-indices");
  return draw_sample(frame, design, a.replicate);
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write '" + path.string() + "'");
  f << text;
}

std::string trace_csv(const SelectionTrace& trace) {
  std::ostringstream s;
  s << "candidate,min_weight,all_positive,failed,chosen\n";
  for (std::size_t i = 0; i < trace.candidates.size(); ++i)
    s << format_double(trace.candidates[i]) << ',' << format_double(trace.min_weights[i]) << ','
      << (trace.all_positive[i] ? 1 : 0) << ',' << (trace.failed[i] ? 1 : 0) << ','
      << (trace.candidates[i] == trace.chosen ? 1 : 0) << '\n';
  return s.str();
}

// ---------------------------------------------------------------------------

struct PcaArgs {
  PopulationArgs pop;
  std::string output;
  std::string scores;
  Index r = 0;
};

int run_pca(const PcaArgs& a, std::ostream& out, std::ostream& err) {
  std::optional<PopulationFrame> frame;
  if (!a.pop.input.empty() && a.pop.outcomes.empty()) {
    // pca needs no outcomes; carry a placeholder column
    const CsvTable t = read_csv_file(a.pop.input);
    CsvTable padded = t;
    padded.header.push_back("__placeholder");
    padded.values.conservativeResize(Eigen::NoChange, t.values.cols() + 1);
    padded.values.col(t.values.cols()).setZero();
    frame = frame_from_csv(padded, a.pop.aux.empty() ? t.header : a.pop.aux, {"__placeholder"});
  } else {
    frame = load_frame(a.pop, config_of(a.pop));
  }
  const PopulationFrame centered = center_columns(*frame);
  const SymmetricSpectrum spec = symmetric_eig(population_covariance(centered));
  if (spec.any_near_degenerate())
    err << "warning: some eigenvalues are nearly tied; their components are not identifiable\n";

  const double trace = spec.eigenvalues.sum();
  std::ostringstream s;
  s << "component,eigenvalue,explained_ratio,cumulative_ratio\n";
  double cum = 0.0;
  for (Index j = 0; j < spec.dim(); ++j) {
    const double share = trace > 0.0 ? spec.eigenvalues(j) / trace : 0.0;
    cum += share;
    s << j + 1 << ',' << format_double(spec.eigenvalues(j)) << ',' << format_double(share) << ','
      << format_double(cum) << '\n';
  }
  if (a.output.empty())
    out << s.str();
  else
    write_file(a.output, s.str());

  if (!a.scores.empty()) {
    const Index r = a.r > 0 ? a.r : spec.dim();
    if (r > spec.dim()) throw std::invalid_argument("--r exceeds the number of auxiliary columns");
    const PrincipalComponents pcs = principal_components(centered, spec, r);
    std::vector<std::string> header;
    for (Index j = 0; j < r; ++j) header.push_back("pc" + std::to_string(j + 1));
    std::ostringstream sc;
    write_csv(sc, header, pcs.scores);
    write_file(a.scores, sc.str());
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct CalibrateArgs {
  PopulationArgs pop;
  SampleArgs sample;
  std::string estimator;
  std::string method = "pc";
  std::string r;
  std::string lambda;
  Index p1 = 0;
  Index r_max = -1;
  bool no_intercept = false;
  std::string select;
  std::string output_dir;
};

EstimatorSpec estimator_of(const CalibrateArgs& a) {
  EstimatorSpec spec;
  if (!a.estimator.empty()) {
    spec = parse_estimator_id(a.estimator);
  } else {
    std::string m = a.method;
    std::string r = a.r.empty() ? "0" : a.r;
    std::string lambda = a.lambda.empty() ? "auto" : a.lambda;
    if (a.select == "r-positive") {
      if (m != "pc" && m != "epc") throw std::invalid_argument("--select r-positive needs --method pc or epc");
      r = "auto";
    } else if (a.select == "lambda-positive") {
      m = "ridge";
      lambda = "auto";
    } else if (!a.select.empty()) {
      throw std::invalid_argument("--select must be r-positive or lambda-positive");
    }
    std::string id;
    if (m == "ht" || m == "HT" || m == "full") id = m;
    else if (m == "pc" || m == "epc" || m == "pc2") id = m + "(" + r + ")";
    else if (m == "ppc" || m == "ppc-est") id = m + "(" + std::to_string(a.p1) + "," + r + ")";
    else if (m == "ridge") id = "ridge(" + lambda + ")";
    else throw std::invalid_argument("unknown --method '" + m + "'");
    spec = parse_estimator_id(id);
  }
  spec.r_max = a.r_max;
  if (a.no_intercept) spec.include_intercept = false;
  return spec;
}

int run_calibrate(const CalibrateArgs& a, std::ostream& out) {
  const auto config = config_of(a.pop);
  const PopulationFrame frame = center_columns(load_frame(a.pop, config));
  const SampleData sample = obtain_sample(frame, a.sample, config);
  const EstimatorSpec spec = estimator_of(a);
  spec.validate(frame.aux_dim(), sample.size());
  const SymmetricSpectrum spectrum = symmetric_eig(population_covariance(frame));
  const EstimatorRun run = run_estimator(spec, sample, frame, spectrum);
  const CalibrationResult& res = run.result;

  std::ostringstream est;
  est << "outcome,estimate,ht_estimate\n";
  for (Index j = 0; j < frame.outcome_dim(); ++j)
    est << frame.outcome_names()[static_cast<std::size_t>(j)] << ',' << format_double(res.estimate(j)) << ','
        << format_double(res.ht_estimate(j)) << '\n';
  if (a.output_dir.empty()) {
    out << est.str();
    return 0;
  }

  const fs::path dir(a.output_dir);
  fs::create_directories(dir);
  write_file(dir / "estimates.csv", est.str());

  std::ostringstream w;
  w << "unit,design_weight,weight\n";
  for (Index k = 0; k < sample.size(); ++k)
    w << sample.indices()[static_cast<std::size_t>(k)] + 1 << ',' << format_double(sample.design_weights()(k))
      << ',' << format_double(res.weights(k)) << '\n';
  write_file(dir / "weights.csv", w.str());

  if (res.coefficient.size() > 0) {
    Matrix coef = res.coefficient;
    std::vector<std::string> terms;
    if (coef.rows() == frame.aux_dim() + 1) {
      // intercept on the original (uncentered) scale of x
      coef.row(0) -= frame.column_means().transpose() * coef.bottomRows(frame.aux_dim());
      terms.push_back("(intercept)");
    }
    terms.insert(terms.end(), frame.aux_names().begin(), frame.aux_names().end());
    std::ostringstream c;
    c << "term";
    for (const auto& name : frame.outcome_names()) c << ',' << name;
    c << '\n';
    for (Index i = 0; i < coef.rows(); ++i) {
      c << terms[static_cast<std::size_t>(i)];
      for (Index j = 0; j < coef.cols(); ++j) c << ',' << format_double(coef(i, j));
      c << '\n';
    }
    write_file(dir / "coefficient.csv", c.str());
  }

  const auto& d = res.diagnostics;
  ordered_json diag;
  diag["estimator"] = spec.id();
  diag["population_size"] = frame.size();
  diag["sample_size"] = sample.size();
  diag["calibration_variables"] = res.basis.dim();
  diag["min_weight"] = d.min_weight;
  diag["cv_weight"] = d.cv_weight;
  diag["negative_count"] = d.negative_count;
  diag["positive_fraction"] =
      static_cast<double>((res.weights.array() > 0.0).count()) / static_cast<double>(sample.size());
  diag["constraint_residual_norm"] = d.constraint_residual_norm;
  diag["sq_calibration_error_on_originals"] = d.sq_calibration_error_on_originals;
  diag["gram_condition"] = d.gram_condition;
  diag["effective_r"] = d.effective_r;
  if (!std::isnan(run.selected)) diag["selected"] = run.selected;
  write_file(dir / "diagnostics.json", diag.dump(2) + "\n");
  if (run.selection) write_file(dir / "selection.csv", trace_csv(*run.selection));
  return 0;
}

// ---------------------------------------------------------------------------

struct SelectArgs {
  PopulationArgs pop;
  SampleArgs sample;
  std::string rule;
  bool estimated = false;
  Index r_max = -1;
  bool no_intercept = false;
  std::string output;
};

int run_select(const SelectArgs& a, std::ostream& out, std::ostream& err) {
  const auto config = config_of(a.pop);
  const PopulationFrame frame = center_columns(load_frame(a.pop, config));
  const SampleData sample = obtain_sample(frame, a.sample, config);
  const bool icpt = !a.no_intercept;
  SelectionTrace trace;
  if (a.rule == "r-positive") {
    const Index r_max = a.r_max >= 0 ? a.r_max : default_r_max(frame.aux_dim(), sample.size() - (icpt ? 1 : 0));
    SelectedR chosen;
    if (a.estimated) {
      chosen = select_r_positive_estimated(sample, known_totals(frame), r_max, icpt);
    } else {
      const SymmetricSpectrum spectrum = symmetric_eig(population_covariance(frame));
      chosen = select_r_positive(sample, frame, spectrum, r_max, icpt);
    }
    trace = chosen.trace;
    err << "selected r = " << chosen.r << '\n';
  } else if (a.rule == "lambda-positive") {
    const AuxBasis basis = original_basis(sample, known_totals(frame), icpt);
    RidgeSpec shape = RidgeSpec::uniform(0.0, basis.dim());
    if (icpt) shape.hard[0] = true;
    const SelectedLambda chosen = select_lambda_positive(sample, basis, {}, &shape);
    trace = chosen.trace;
    err << "selected lambda = " << format_double(chosen.lambda) << (trace.exhausted ? " (grid exhausted)" : "")
        << '\n';
    // the refined value is usually off-grid; list it as its own row
    if (std::find(trace.candidates.begin(), trace.candidates.end(), chosen.lambda) == trace.candidates.end()) {
      RidgeSpec at = shape;
      at.lambda = chosen.lambda;
      const double lowest = ridge_weights(sample, basis, at).minCoeff();
      trace.candidates.push_back(chosen.lambda);
      trace.min_weights.push_back(lowest);
      trace.all_positive.push_back(lowest > 0.0);
      trace.failed.push_back(false);
    }
  } else {
    throw std::invalid_argument("--select must be r-positive or lambda-positive");
  }
  if (a.output.empty())
    out << trace_csv(trace);
  else
    write_file(a.output, trace_csv(trace));
  return 0;
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::string config;
  std::optional<unsigned> threads;
  std::optional<std::uint64_t> seed;
  std::optional<Index> replicates;
  std::optional<Index> n;
  std::string output_dir;
  bool per_replicate = false;
};

unsigned thread_count(const std::optional<unsigned>& flag) {
  if (flag) return std::max(1u, *flag);
  if (const char* env = std::getenv("SURVEYCALIB_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1) throw std::invalid_argument("SURVEYCALIB_THREADS must be a positive integer");
    return static_cast<unsigned>(v);
  }
  return 1;
}

int run_simulate(const SimulateArgs& a, std::ostream& out) {
  RunConfig c = parse_config(a.config);
  if (a.seed) c.seed = *a.seed;
  if (a.replicates) c.replicates = *a.replicates;
  if (a.n) c.sample_size = *a.n;
  if (!a.output_dir.empty()) c.output_dir = a.output_dir;
  if (a.per_replicate) c.per_replicate = true;
  const PopulationFrame frame = load_population(c);
  validate_run(c, frame.aux_dim());

  DesignSpec design;
  design.population_size = frame.size();
  design.sample_size = c.sample_size;
  design.seed = c.seed;
  MonteCarloOptions opts;
  opts.threads = thread_count(a.threads);
  opts.keep_records = c.per_replicate;
  const SimulationReport report = run_monte_carlo(frame, design, c.estimators, c.replicates, c.reference, opts);

  const fs::path dir(c.output_dir);
  fs::create_directories(dir);
  write_file(dir / "report.csv", report_csv(report));
  write_file(dir / "manifest.json", manifest_json(report, config_to_json(c)));
  if (c.per_replicate) write_file(dir / "per_replicate.csv", records_csv(report));
  out << "wrote " << (dir / "report.csv").string() << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

struct GenerateArgs {
  std::string config;
  std::string output;
  std::optional<Index> units, slots, past, future, harmonics;
  std::optional<double> level_mean, level_sd, amplitude, noise_sd, rho;
  std::optional<std::uint64_t> seed;
};

int run_generate(const GenerateArgs& a, std::ostream& out) {
  SyntheticPopSpec s;
  if (!a.config.empty()) {
    const RunConfig c = parse_config(a.config);
    if (!c.synthetic) throw std::invalid_argument("config population is not synthetic");
    s = *c.synthetic;
  }
  if (a.units) s.units = *a.units;
  if (a.slots) s.slots_per_day = *a.slots;
  if (a.past) s.past_days = *a.past;
  if (a.future) s.future_days = *a.future;
  if (a.harmonics) s.harmonics = *a.harmonics;
  if (a.level_mean) s.level_mean = *a.level_mean;
  if (a.level_sd) s.unit_level_sd = *a.level_sd;
  if (a.amplitude) s.amplitude = *a.amplitude;
  if (a.noise_sd) s.noise_sd = *a.noise_sd;
  if (a.rho) s.cross_week_correlation = *a.rho;
  if (a.seed) s.seed = *a.seed;
  const PopulationFrame frame = synthetic_load_population(s);
  std::ostringstream csv;
  write_population_csv(csv, frame);
  if (a.output.empty())
    out << csv.str();
  else
    write_file(a.output, csv.str());
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Survey calibration on principal components", "surveycalib"};
  app.require_subcommand(1);

  PcaArgs pca;
  auto* pca_cmd = app.add_subcommand("pca", "spectrum of the auxiliary covariance");
  add_population_options(pca_cmd, pca.pop);
  pca_cmd->add_option("--output", pca.output, "spectrum CSV (default: stdout)");
  pca_cmd->add_option("--scores", pca.scores, "write the component scores to this CSV");
  pca_cmd->add_option("--r", pca.r, "number of score columns (default: all)");

  CalibrateArgs cal;
  auto* cal_cmd = app.add_subcommand("calibrate", "calibration weights and estimates for one sample");
  add_population_options(cal_cmd, cal.pop);
  add_sample_options(cal_cmd, cal.sample);
  cal_cmd->add_option("--estimator", cal.estimator, "estimator id, e.g. pc(5), ridge(auto), ppc(4,5)");
  cal_cmd->add_option("--method", cal.method, "ht, full, pc, epc, pc2, ppc, ppc-est or ridge")->capture_default_str();
  cal_cmd->add_option("--r", cal.r, "number of components, or 'auto'");
  cal_cmd->add_option("--lambda", cal.lambda, "ridge penalty, or 'auto'");
  cal_cmd->add_option("--p1", cal.p1, "ppc: number of leading columns calibrated exactly");
  cal_cmd->add_option("--r-max", cal.r_max, "largest r tried by --select r-positive");
  cal_cmd->add_flag("--no-intercept", cal.no_intercept, "do not calibrate on the population size");
  cal_cmd->add_option("--select", cal.select, "r-positive or lambda-positive");
  cal_cmd->add_option("--output-dir", cal.output_dir,
                      "write weights.csv, estimates.csv, coefficient.csv and diagnostics.json here");

  SelectArgs sel;
  auto* sel_cmd = app.add_subcommand("select", "positive-weights choice of r or lambda");
  add_population_options(sel_cmd, sel.pop);
  add_sample_options(sel_cmd, sel.sample);
  sel_cmd->add_option("--select", sel.rule, "r-positive or lambda-positive")->required();
  sel_cmd->add_flag("--estimated", sel.estimated, "r-positive on components estimated from the sample");
  sel_cmd->add_option("--r-max", sel.r_max, "largest r tried (default min(p, n-1, 200))");
  sel_cmd->add_flag("--no-intercept", sel.no_intercept, "do not calibrate on the population size");
  sel_cmd->add_option("--output", sel.output, "trace CSV (default: stdout)");

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Monte Carlo comparison of an estimator bank");
  sim_cmd->add_option("--config", sim.config, "experiment config (JSON)")->required();
  sim_cmd->add_option("--threads", sim.threads, "worker threads (fallback: SURVEYCALIB_THREADS, then 1)");
  sim_cmd->add_option("--seed", sim.seed, "overrides design.seed");
  sim_cmd->add_option("--replicates", sim.replicates, "overrides replicates");
  sim_cmd->add_option("--n", sim.n, "overrides design.n");
  sim_cmd->add_option("--output-dir", sim.output_dir, "overrides output.dir");
  sim_cmd->add_flag("--per-replicate", sim.per_replicate, "also write per_replicate.csv");

  GenerateArgs gen;
  auto* gen_cmd = app.add_subcommand("generate", "write a synthetic load-curve population CSV");
  gen_cmd->add_option("--config", gen.config, "config with a population.synthetic section");
  gen_cmd->add_option("--output", gen.output, "CSV path (default: stdout)");
  gen_cmd->add_option("--units", gen.units);
  gen_cmd->add_option("--slots-per-day", gen.slots);
  gen_cmd->add_option("--past-days", gen.past);
  gen_cmd->add_option("--future-days", gen.future);
  gen_cmd->add_option("--harmonics", gen.harmonics);
  gen_cmd->add_option("--level-mean", gen.level_mean);
  gen_cmd->add_option("--unit-level-sd", gen.level_sd);
  gen_cmd->add_option("--amplitude", gen.amplitude);
  gen_cmd->add_option("--noise-sd", gen.noise_sd);
  gen_cmd->add_option("--rho", gen.rho, "cross-week noise correlation");
  gen_cmd->add_option("--seed", gen.seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (pca_cmd->parsed()) return run_pca(pca, out, err);
    if (cal_cmd->parsed()) return run_calibrate(cal, out);
    if (sel_cmd->parsed()) return run_select(sel, out, err);
    if (sim_cmd->parsed()) return run_simulate(sim, out);
    if (gen_cmd->parsed()) return run_generate(gen, out);
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what();
    if (!std::isnan(e.condition())) err << " (condition " << format_double(e.condition()) << ")";
    err << '\n';
    return 2;
  } catch (const ConfigError& e) {
    err << "invalid configuration:\n";
    for (const auto& v : e.violations()) err << "  " << v << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace surveycalib
