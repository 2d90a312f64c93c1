#include "surveycalib/simulate.hpp"

#include "surveycalib/errors.hpp"
#include "surveycalib/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <regex>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace surveycalib {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return kNaN;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

// ---------------------------------------------------------------------------
// Synthetic population

void SyntheticPopSpec::validate() const {
  if (units < 2) throw std::invalid_argument("synthetic.units must be at least 2");
  if (slots_per_day < 1) throw std::invalid_argument("synthetic.slots_per_day must be positive");
  if (past_days < 1 || past_days > 7) throw std::invalid_argument("synthetic.past_days must lie in [1, 7]");
  if (future_days < 1 || future_days > 7) throw std::invalid_argument("synthetic.future_days must lie in [1, 7]");
  if (harmonics < 0) throw std::invalid_argument("synthetic.harmonics must be >= 0");
  if (!(level_mean > 0.0)) throw std::invalid_argument("synthetic.level_mean must be positive");
  if (!(unit_level_sd >= 0.0)) throw std::invalid_argument("synthetic.unit_level_sd must be >= 0");
  if (!(amplitude >= 0.0)) throw std::invalid_argument("synthetic.amplitude must be >= 0");
  if (!(noise_sd >= 0.0)) throw std::invalid_argument("synthetic.noise_sd must be >= 0");
  if (!(cross_week_correlation >= 0.0 && cross_week_correlation <= 1.0))
    throw std::invalid_argument("synthetic.cross_week_correlation must lie in [0, 1]");
}

PopulationFrame synthetic_load_population(const SyntheticPopSpec& spec) {
  spec.validate();
  const Index S = spec.slots_per_day;
  const Index p = spec.aux_dim();
  const Index q = spec.future_days;
  const double rho = spec.cross_week_correlation;
  const double fresh = std::sqrt(1.0 - rho * rho);
  const double two_pi = 2.0 * M_PI;

  Matrix aux(spec.units, p);
  Matrix out(spec.units, q);
  std::vector<double> week_one(static_cast<std::size_t>(7 * S));
  std::vector<double> sin_amp(static_cast<std::size_t>(spec.harmonics));
  std::vector<double> cos_amp(static_cast<std::size_t>(spec.harmonics));
  std::vector<double> profile(static_cast<std::size_t>(S));

  for (Index k = 0; k < spec.units; ++k) {
    CounterRng rng(spec.seed, static_cast<std::uint64_t>(k));
    const double sigma = spec.unit_level_sd;
    const double level = spec.level_mean * std::exp(sigma * rng.normal() - sigma * sigma / 2.0);
    for (Index h = 0; h < spec.harmonics; ++h) {
      const double sd = spec.amplitude / static_cast<double>(h + 1) * level;
      sin_amp[static_cast<std::size_t>(h)] = sd * rng.normal();
      cos_amp[static_cast<std::size_t>(h)] = sd * rng.normal();
    }
    for (Index t = 0; t < S; ++t) {
      double v = level;
      for (Index h = 0; h < spec.harmonics; ++h) {
        const double angle = two_pi * static_cast<double>((h + 1) * t) / static_cast<double>(S);
        v += sin_amp[static_cast<std::size_t>(h)] * std::sin(angle) +
             cos_amp[static_cast<std::size_t>(h)] * std::cos(angle);
      }
      profile[static_cast<std::size_t>(t)] = v;
    }
    const double noise_scale = spec.noise_sd * level;
    for (auto& e : week_one) e = noise_scale > 0.0 ? rng.normal() : 0.0;

    const Index first_past_day = 7 - spec.past_days;
    for (Index d = 0; d < spec.past_days; ++d)
      for (Index t = 0; t < S; ++t) {
        const double e = week_one[static_cast<std::size_t>((first_past_day + d) * S + t)];
        aux(k, d * S + t) = std::max(0.0, profile[static_cast<std::size_t>(t)] + noise_scale * e);
      }
    for (Index d = 0; d < q; ++d) {
      double total = 0.0;
      for (Index t = 0; t < S; ++t) {
        const double prev = week_one[static_cast<std::size_t>(d * S + t)];
        const double e = noise_scale > 0.0 ? rho * prev + fresh * rng.normal() : 0.0;
        total += std::max(0.0, profile[static_cast<std::size_t>(t)] + noise_scale * e);
      }
      out(k, d) = total;
    }
  }

  std::vector<std::string> aux_names;
  for (Index d = 0; d < spec.past_days; ++d)
    for (Index t = 0; t < S; ++t)
      aux_names.push_back("d" + std::to_string(d + 1) + "_s" + std::to_string(t + 1));
  std::vector<std::string> outcome_names;
  for (Index d = 0; d < q; ++d) outcome_names.push_back("day" + std::to_string(d + 1));
  return PopulationFrame(std::move(aux), std::move(out), std::move(aux_names), std::move(outcome_names));
}

// ---------------------------------------------------------------------------
// Estimator specs

std::string EstimatorSpec::id() const {
  std::string base;
  switch (variant) {
    case EstimatorVariant::Ht: base = "HT"; break;
    case EstimatorVariant::Full: base = "full"; break;
    case EstimatorVariant::Pc: base = "pc(" + std::to_string(r) + ")"; break;
    case EstimatorVariant::Epc: base = "epc(" + std::to_string(r) + ")"; break;
    case EstimatorVariant::Pc2: base = "pc2(" + std::to_string(r) + ")"; break;
    case EstimatorVariant::Ppc:
      base = std::string(estimated ? "ppc-est(" : "ppc(") + std::to_string(p1) + "," + std::to_string(r) + ")";
      break;
    case EstimatorVariant::Ridge:
      base = "ridge(" + (lambda ? format_double(*lambda) : std::string("auto")) + ")";
      break;
    case EstimatorVariant::PcAuto: base = "pc(auto)"; break;
    case EstimatorVariant::EpcAuto: base = "epc(auto)"; break;
  }
  if (!include_intercept && variant != EstimatorVariant::Ht) base += "[no-intercept]";
  return base;
}

void EstimatorSpec::validate(Index p, Index n) const {
  const std::string who = id();
  const Index lead = include_intercept ? 1 : 0;
  auto fail = [&](const std::string& field, const std::string& why) {
    throw std::invalid_argument(who + ": field '" + field + "' " + why);
  };
  switch (variant) {
    case EstimatorVariant::Ht:
      break;
    case EstimatorVariant::Full:
      if (p + lead > n) fail("variant", "needs at least p+1 sampled units");
      break;
    case EstimatorVariant::Pc:
    case EstimatorVariant::Epc:
      if (r < 0 || r > p) fail("r", "r=" + std::to_string(r) + " outside [0, p=" + std::to_string(p) + "]");
      if (r + lead > n) fail("r", "needs more sampled units than calibration variables");
      break;
    case EstimatorVariant::Pc2:
      if (r < 1 || r > p) fail("r", "r=" + std::to_string(r) + " outside [1, p=" + std::to_string(p) + "]");
      if (2 * r + lead >= n) fail("r", "2r constraints need a larger sample");
      break;
    case EstimatorVariant::Ppc:
      if (p1 < 0 || p1 > p) fail("p1", "p1=" + std::to_string(p1) + " outside [0, p=" + std::to_string(p) + "]");
      if (r < 0 || r > p - p1) fail("r", "r=" + std::to_string(r) + " outside [0, p-p1=" + std::to_string(p - p1) + "]");
      if (p1 + r + lead > n) fail("r", "needs more sampled units than calibration variables");
      break;
    case EstimatorVariant::Ridge:
      if (lambda && !(*lambda >= 0.0)) fail("lambda", "must be >= 0");
      break;
    case EstimatorVariant::PcAuto:
    case EstimatorVariant::EpcAuto:
      if (r_max >= 0 && (r_max > p || r_max >= n))
        fail("r_max", "r_max=" + std::to_string(r_max) + " must be <= p and < n");
      break;
  }
}

EstimatorSpec parse_estimator_id(const std::string& id) {
  static const std::regex pattern(R"(^\s*([A-Za-z0-9-]+)\s*(?:\(\s*([^,\)]*)\s*(?:,\s*([^\)]*))?\))?\s*(\[no-intercept\])?\s*$)");
  std::smatch m;
  if (!std::regex_match(id, m, pattern)) throw std::invalid_argument("cannot parse estimator '" + id + "'");
  const std::string name = m[1];
  const std::string a = m[2];
  const std::string b = m[3];
  EstimatorSpec spec;
  spec.include_intercept = !m[4].matched;
  auto as_index = [&](const std::string& s) -> Index {
    try {
      std::size_t used = 0;
      const long long v = std::stoll(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return static_cast<Index>(v);
    } catch (const std::exception&) {
      throw std::invalid_argument("estimator '" + id + "': '" + s + "' is not an integer");
    }
  };
  if (name == "HT" || name == "ht") {
    spec.variant = EstimatorVariant::Ht;
  } else if (name == "full") {
    spec.variant = EstimatorVariant::Full;
  } else if (name == "pc" || name == "epc") {
    if (a.empty()) throw std::invalid_argument("estimator '" + id + "' needs r");
    if (a == "auto") {
      spec.variant = name == "pc" ? EstimatorVariant::PcAuto : EstimatorVariant::EpcAuto;
    } else {
      spec.variant = name == "pc" ? EstimatorVariant::Pc : EstimatorVariant::Epc;
      spec.r = as_index(a);
    }
  } else if (name == "pc2") {
    spec.variant = EstimatorVariant::Pc2;
    spec.r = as_index(a);
  } else if (name == "ppc" || name == "ppc-est") {
    if (b.empty()) throw std::invalid_argument("estimator '" + id + "' needs (p1, r)");
    spec.variant = EstimatorVariant::Ppc;
    spec.estimated = name == "ppc-est";
    spec.p1 = as_index(a);
    spec.r = as_index(b);
  } else if (name == "ridge") {
    spec.variant = EstimatorVariant::Ridge;
    if (a != "auto") {
      try {
        spec.lambda = std::stod(a);
      } catch (const std::exception&) {
        throw std::invalid_argument("estimator '" + id + "': lambda must be a number or 'auto'");
      }
    }
  } else {
    throw std::invalid_argument("unknown estimator '" + name + "'");
  }
  return spec;
}

// ---------------------------------------------------------------------------
// One estimator on one sample

EstimatorRun run_estimator(const EstimatorSpec& spec, const SampleData& sample,
                           const PopulationFrame& frame, const SymmetricSpectrum& spectrum) {
  EstimatorRun run;
  run.selected = kNaN;
  const KnownTotals totals = known_totals(frame);
  const bool icpt = spec.include_intercept;
  const Index p = frame.aux_dim();
  switch (spec.variant) {
    case EstimatorVariant::Ht: {
      AuxBasis empty;
      empty.sample_matrix = Matrix(sample.size(), 0);
      empty.totals = Vector(0);
      empty.label = "ht";
      run.result = greg_estimate(sample, empty, sample.outcome_rows(), &totals);
      break;
    }
    case EstimatorVariant::Full:
      run.result = greg_estimate(sample, original_basis(sample, totals, icpt), sample.outcome_rows(), &totals);
      break;
    case EstimatorVariant::Pc:
      run.result = pc_calibration(sample, frame, spectrum, spec.r, icpt);
      break;
    case EstimatorVariant::Epc:
      run.result = epc_calibration(sample, totals, spec.r, icpt);
      break;
    case EstimatorVariant::Pc2:
      run.result = pc2_calibration(sample, frame, spectrum, spec.r, icpt);
      break;
    case EstimatorVariant::Ppc: {
      std::vector<Index> exact(static_cast<std::size_t>(spec.p1));
      std::iota(exact.begin(), exact.end(), Index{0});
      run.result = partial_pc_calibration(sample, frame, exact, spec.r, spec.estimated, icpt);
      break;
    }
    case EstimatorVariant::Ridge: {
      const AuxBasis basis = original_basis(sample, totals, icpt);
      RidgeSpec ridge = RidgeSpec::uniform(spec.lambda.value_or(0.0), basis.dim());
      if (icpt) ridge.hard[0] = true;
      if (!spec.lambda) {
        SelectedLambda chosen = select_lambda_positive(sample, basis, {}, &ridge);
        ridge.lambda = chosen.lambda;
        run.selected = chosen.lambda;
        run.selection = std::move(chosen.trace);
      }
      run.result = ridge_calibration(sample, basis, ridge, sample.outcome_rows(), &totals);
      break;
    }
    case EstimatorVariant::PcAuto:
    case EstimatorVariant::EpcAuto: {
      const Index r_max = spec.r_max >= 0 ? spec.r_max : default_r_max(p, sample.size() - (icpt ? 1 : 0));
      SelectedR chosen = spec.variant == EstimatorVariant::PcAuto
                             ? select_r_positive(sample, frame, spectrum, r_max, icpt)
                             : select_r_positive_estimated(sample, totals, r_max, icpt);
      run.selected = static_cast<double>(chosen.r);
      run.selection = std::move(chosen.trace);
      run.result = spec.variant == EstimatorVariant::PcAuto
                       ? pc_calibration(sample, frame, spectrum, chosen.r, icpt)
                       : epc_calibration(sample, totals, chosen.r, icpt);
      break;
    }
  }
  return run;
}

ReplicateRecord evaluate_estimator(const EstimatorSpec& spec, const SampleData& sample,
                                   const PopulationFrame& frame, const SymmetricSpectrum& spectrum) {
  ReplicateRecord rec;
  try {
    const EstimatorRun run = run_estimator(spec, sample, frame, spectrum);
    const CalibrationResult& res = run.result;
    rec.selected = run.selected;
    rec.estimates = res.estimate;
    rec.min_weight = res.diagnostics.min_weight;
    rec.cv_weight = res.diagnostics.cv_weight;
    rec.positive_fraction = static_cast<double>((res.weights.array() > 0.0).count()) /
                            static_cast<double>(res.weights.size());
    rec.sq_calibration_error = res.diagnostics.sq_calibration_error_on_originals;
  } catch (const NumericalError& e) {
    rec.failed = true;
    rec.failure = e.what();
    rec.estimates = Vector::Constant(frame.outcome_dim(), kNaN);
    rec.cv_weight = rec.positive_fraction = rec.min_weight = rec.sq_calibration_error = rec.selected = kNaN;
  }
  return rec;
}

// ---------------------------------------------------------------------------
// Monte Carlo

double relative_mse(const Vector& estimates, const Vector& reference_estimates, double true_total) {
  if (estimates.size() != reference_estimates.size())
    throw std::invalid_argument("relative_mse: estimate vectors differ in length");
  const double num = (estimates.array() - true_total).square().sum();
  const double den = (reference_estimates.array() - true_total).square().sum();
  if (!(den > 0.0)) return kNaN;
  return num / den;
}

double quantile(std::vector<double> values, double prob) {
  if (values.empty()) return kNaN;
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

const EstimatorOutcomeSummary& SimulationReport::row(const std::string& estimator, Index outcome) const {
  for (const auto& r : rows)
    if (r.estimator == estimator && r.outcome == outcomes.at(static_cast<std::size_t>(outcome))) return r;
  throw std::out_of_range("no report row for estimator '" + estimator + "'");
}

SimulationReport run_monte_carlo(const PopulationFrame& input, const DesignSpec& design,
                                 const std::vector<EstimatorSpec>& estimators, Index replicates,
                                 const std::string& reference, const MonteCarloOptions& options) {
  design.validate();
  if (design.population_size != input.size())
    throw std::invalid_argument("design population size does not match the frame");
  if (replicates < 2) throw std::invalid_argument("at least 2 replicates are required");
  if (estimators.empty()) throw std::invalid_argument("estimator bank is empty");

  const PopulationFrame frame = center_columns(input);
  const Index p = frame.aux_dim();
  const Index q = frame.outcome_dim();
  const Index n = design.sample_size;

  std::vector<std::string> ids;
  std::set<std::string> seen;
  for (const auto& e : estimators) {
    e.validate(p, n);
    ids.push_back(e.id());
    if (!seen.insert(ids.back()).second) throw std::invalid_argument("duplicate estimator '" + ids.back() + "'");
  }
  const auto ref_it = std::find(ids.begin(), ids.end(), reference);
  if (ref_it == ids.end()) throw std::invalid_argument("reference estimator '" + reference + "' is not in the bank");
  const auto ref_index = static_cast<std::size_t>(ref_it - ids.begin());

  const SymmetricSpectrum spectrum = symmetric_eig(population_covariance(frame));

  const auto E = estimators.size();
  const auto I = static_cast<std::size_t>(replicates);
  std::vector<std::vector<ReplicateRecord>> records(E, std::vector<ReplicateRecord>(I));

  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= I) return;
      try {
        const SampleData sample = draw_sample(frame, design, static_cast<std::uint64_t>(i));
        for (std::size_t e = 0; e < E; ++e) {
          records[e][i] = evaluate_estimator(estimators[e], sample, frame, spectrum);
          records[e][i].replicate = i;
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(I);
        return;
      }
    }
  };
  const unsigned workers = std::max(1u, std::min<unsigned>(options.threads, static_cast<unsigned>(I)));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned t = 0; t < workers; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);

  SimulationReport report;
  report.estimators = ids;
  report.outcomes = frame.outcome_names();
  report.reference = reference;
  report.replicates = replicates;
  report.population_size = frame.size();
  report.sample_size = n;
  report.aux_dim = p;
  report.seed = design.seed;
  report.true_totals = frame.outcome_totals();
  const double trace = spectrum.eigenvalues.sum();
  const Index shown = std::min<Index>(p, 10);
  report.eigenvalue_share = trace > 0.0 ? Vector(spectrum.eigenvalues.head(shown) / trace)
                                        : Vector::Zero(shown);

  const auto& ref_records = records[ref_index];
  for (std::size_t e = 0; e < E; ++e) {
    const auto& recs = records[e];
    std::vector<double> cvs, positive, minw, calerr, selected;
    Index failures = 0;
    for (const auto& rec : recs) {
      if (rec.failed) {
        ++failures;
        continue;
      }
      cvs.push_back(rec.cv_weight);
      positive.push_back(rec.positive_fraction);
      minw.push_back(rec.min_weight);
      calerr.push_back(rec.sq_calibration_error);
      if (!std::isnan(rec.selected)) selected.push_back(rec.selected);
    }
    for (Index j = 0; j < q; ++j) {
      const double t = report.true_totals(j);
      double num = 0.0, den = 0.0, sq = 0.0, bias = 0.0;
      Index used = 0, paired = 0;
      for (std::size_t i = 0; i < I; ++i) {
        if (recs[i].failed) continue;
        const double err = recs[i].estimates(j) - t;
        sq += err * err;
        bias += err;
        ++used;
        if (ref_records[i].failed) continue;
        const double ref_err = ref_records[i].estimates(j) - t;
        num += err * err;
        den += ref_err * ref_err;
        ++paired;
      }
      EstimatorOutcomeSummary row;
      row.estimator = ids[e];
      row.outcome = report.outcomes[static_cast<std::size_t>(j)];
      const double ref_rms = paired > 0 ? std::sqrt(den / static_cast<double>(paired)) : 0.0;
      row.relative_mse = (paired > 0 && ref_rms > 1e-12 * std::max(1.0, std::abs(t))) ? num / den : kNaN;
      row.mse = used > 0 ? sq / static_cast<double>(used) : kNaN;
      row.bias = used > 0 ? bias / static_cast<double>(used) : kNaN;
      row.replicates_used = used;
      row.failures = failures;
      row.mean_cv = mean_of(cvs);
      row.cv_q1 = quantile(cvs, 0.25);
      row.cv_median = quantile(cvs, 0.5);
      row.cv_q3 = quantile(cvs, 0.75);
      row.mean_positive_fraction = mean_of(positive);
      row.mean_min_weight = mean_of(minw);
      row.mean_sq_calibration_error = mean_of(calerr);
      row.mean_selected = mean_of(selected);
      report.rows.push_back(std::move(row));
    }
  }
  if (options.keep_records) report.records = std::move(records);
  return report;
}

std::string report_csv(const SimulationReport& report) {
  std::ostringstream out;
  out << "estimator,outcome,relative_mse,mse,bias,replicates_used,failures,mean_cv,cv_q1,cv_median,"
         "cv_q3,mean_positive_fraction,mean_min_weight,mean_sq_calibration_error,mean_selected\n";
  for (const auto& r : report.rows) {
    out << r.estimator << ',' << r.outcome << ',' << format_double(r.relative_mse) << ','
        << format_double(r.mse) << ',' << format_double(r.bias) << ',' << r.replicates_used << ','
        << r.failures << ',' << format_double(r.mean_cv) << ',' << format_double(r.cv_q1) << ','
        << format_double(r.cv_median) << ',' << format_double(r.cv_q3) << ','
        << format_double(r.mean_positive_fraction) << ',' << format_double(r.mean_min_weight) << ','
        << format_double(r.mean_sq_calibration_error) << ',' << format_double(r.mean_selected) << '\n';
  }
  return out.str();
}

std::string records_csv(const SimulationReport& report) {
  std::ostringstream out;
  out << "estimator,replicate,outcome,estimate,failed,cv_weight,positive_fraction,min_weight,"
         "sq_calibration_error,selected\n";
  for (std::size_t e = 0; e < report.records.size(); ++e)
    for (const auto& rec : report.records[e])
      for (std::size_t j = 0; j < report.outcomes.size(); ++j)
        out << report.estimators[e] << ',' << rec.replicate << ',' << report.outcomes[j] << ','
            << format_double(rec.estimates(static_cast<Index>(j))) << ',' << (rec.failed ? 1 : 0) << ','
            << format_double(rec.cv_weight) << ',' << format_double(rec.positive_fraction) << ','
            << format_double(rec.min_weight) << ',' << format_double(rec.sq_calibration_error) << ','
            << format_double(rec.selected) << '\n';
  return out.str();
}

std::string manifest_json(const SimulationReport& report, const std::string& config_echo) {
  using nlohmann::ordered_json;
  ordered_json m;
  m["replicates"] = report.replicates;
  m["population_size"] = report.population_size;
  m["sample_size"] = report.sample_size;
  m["aux_dim"] = report.aux_dim;
  m["seed"] = report.seed;
  m["reference"] = report.reference;
  m["estimators"] = report.estimators;
  m["outcomes"] = report.outcomes;
  m["true_totals"] = std::vector<double>(report.true_totals.data(),
                                         report.true_totals.data() + report.true_totals.size());
  m["leading_eigenvalue_share"] = std::vector<double>(
      report.eigenvalue_share.data(), report.eigenvalue_share.data() + report.eigenvalue_share.size());
  ordered_json failures = ordered_json::object();
  for (const auto& r : report.rows)
    if (!failures.contains(r.estimator)) failures[r.estimator] = r.failures;
  m["failures"] = failures;
  m["rng"] = "splitmix64 counter stream keyed by (seed, replicate)";
  if (!config_echo.empty()) m["config"] = ordered_json::parse(config_echo);
  return m.dump(2) + "\n";
}

}  // namespace surveycalib
