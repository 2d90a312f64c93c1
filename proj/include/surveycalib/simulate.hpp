#pragma once

#include "surveycalib/calibrate.hpp"
#include "surveycalib/design.hpp"
#include "surveycalib/diagnostics.hpp"
#include "surveycalib/select.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace surveycalib {

/// Synthetic load-curve population. Unit k consumes
///   max(0, level_k + sum_h [a_kh sin(2 pi h t / S) + b_kh cos(2 pi h t / S)] + e_k(day, t))
/// at slot t of a day with S slots. level_k is log-normal with log-sd
/// `unit_level_sd` around `level_mean`; harmonic amplitudes have sd
/// amplitude / h, scaled by the unit level; noise has sd noise_sd * level_k
/// and the second week's noise is rho * (first week, same weekday and slot)
/// + sqrt(1 - rho^2) * fresh. The auxiliary curve is the last `past_days`
/// days of week one; the outcomes are the daily totals of the first
/// `future_days` days of week two.
struct SyntheticPopSpec {
  Index units = 2000;
  Index slots_per_day = 48;
  Index past_days = 2;
  Index future_days = 7;
  Index harmonics = 3;
  double level_mean = 1.0;
  double unit_level_sd = 0.8;
  double amplitude = 0.4;
  double noise_sd = 0.3;
  double cross_week_correlation = 0.6;
  std::uint64_t seed = 20140101;

  Index aux_dim() const { return past_days * slots_per_day; }
  void validate() const;
};

PopulationFrame synthetic_load_population(const SyntheticPopSpec& spec);

enum class EstimatorVariant { Ht, Full, Pc, Epc, Pc2, Ppc, Ridge, PcAuto, EpcAuto };

struct EstimatorSpec {
  EstimatorVariant variant = EstimatorVariant::Ht;
  Index r = 0;
  Index p1 = 0;                   // ppc: the first p1 auxiliary columns are calibrated exactly
  bool estimated = false;         // ppc: projection and components estimated on the sample
  std::optional<double> lambda;   // ridge: nullopt selects lambda by the positive-weights rule
  Index r_max = -1;               // pc(auto)/epc(auto): -1 means min(p, n - 1, 200)
  bool include_intercept = true;

  std::string id() const;
  /// Throws std::invalid_argument naming the offending field.
  void validate(Index p, Index n) const;
};

/// Parse an estimator id such as "HT", "full", "pc(5)", "epc(auto)",
/// "pc2(2)", "ppc(4,5)", "ppc-est(4,5)", "ridge(0.5)" or "ridge(auto)".
EstimatorSpec parse_estimator_id(const std::string& id);

/// Outcome of one estimator on one sample.
struct ReplicateRecord {
  std::uint64_t replicate = 0;
  bool failed = false;
  std::string failure;
  Vector estimates;
  double cv_weight = 0.0;
  double positive_fraction = 0.0;
  double min_weight = 0.0;
  double sq_calibration_error = 0.0;
  double selected = 0.0;   // r-hat or lambda-hat; NaN when not applicable
};

/// Full calibration output of one estimator on one sample. `selection` is
/// filled for the data-driven variants (pc(auto), epc(auto), ridge(auto)).
struct EstimatorRun {
  CalibrationResult result;
  double selected = 0.0;   // NaN when not applicable
  std::optional<SelectionTrace> selection;
};

/// Throws NumericalError when the calibration solve fails. `frame` must be
/// centered and `spectrum` its population spectrum.
EstimatorRun run_estimator(const EstimatorSpec& spec, const SampleData& sample,
                           const PopulationFrame& frame, const SymmetricSpectrum& spectrum);

/// Evaluate one estimator on a sample; numerical failures become a failed record. `frame` must be centered and
/// `spectrum` its population spectrum.
ReplicateRecord evaluate_estimator(const EstimatorSpec& spec, const SampleData& sample,
                                   const PopulationFrame& frame, const SymmetricSpectrum& spectrum);

struct EstimatorOutcomeSummary {
  std::string estimator;
  std::string outcome;
  double relative_mse = 0.0;   // NaN when the reference MSE is zero
  double mse = 0.0;
  double bias = 0.0;
  Index replicates_used = 0;
  Index failures = 0;
  double mean_cv = 0.0;
  double cv_q1 = 0.0;
  double cv_median = 0.0;
  double cv_q3 = 0.0;
  double mean_positive_fraction = 0.0;
  double mean_min_weight = 0.0;
  double mean_sq_calibration_error = 0.0;
  double mean_selected = 0.0;
};

struct SimulationReport {
  std::vector<EstimatorOutcomeSummary> rows;   // estimator-major, outcome-minor
  std::vector<std::string> estimators;
  std::vector<std::string> outcomes;
  std::string reference;
  Index replicates = 0;
  Index population_size = 0;
  Index sample_size = 0;
  Index aux_dim = 0;
  std::uint64_t seed = 0;
  Vector true_totals;
  Vector eigenvalue_share;   // leading population eigenvalues as shares of the trace
  /// records[e][i]: estimator e on replicate i (kept only on request)
  std::vector<std::vector<ReplicateRecord>> records;

  const EstimatorOutcomeSummary& row(const std::string& estimator, Index outcome) const;
};

struct MonteCarloOptions {
  unsigned threads = 1;
  bool keep_records = false;
};

/// Draw `replicates` SRSWOR samples (stream i = replicate i) and evaluate
/// every estimator on each. The frame is centered first when needed.
/// Results do not depend on the thread count.
SimulationReport run_monte_carlo(const PopulationFrame& frame, const DesignSpec& design,
                                 const std::vector<EstimatorSpec>& estimators, Index replicates,
                                 const std::string& reference, const MonteCarloOptions& options = {});

/// sum_i (est_i - t)^2 / sum_i (ref_i - t)^2; NaN when the denominator is zero.
double relative_mse(const Vector& estimates, const Vector& reference_estimates, double true_total);

/// Quantile with linear interpolation between order statistics (type 7).
double quantile(std::vector<double> values, double prob);

std::string report_csv(const SimulationReport& report);
std::string records_csv(const SimulationReport& report);
std::string manifest_json(const SimulationReport& report, const std::string& config_echo);

}  // namespace surveycalib
