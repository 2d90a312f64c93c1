#include "surveycalib/calibrate.hpp"
#include "surveycalib/config.hpp"
#include "surveycalib/errors.hpp"
#include "surveycalib/select.hpp"
#include "surveycalib/simulate.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cmath>
#include <numeric>

namespace py = pybind11;
using namespace surveycalib;

namespace {

PopulationFrame make_frame(const Matrix& aux, const std::optional<Matrix>& outcomes) {
  Matrix y = outcomes ? *outcomes : Matrix::Zero(aux.rows(), 1);
  return center_columns(PopulationFrame(aux, y));
}

SampleData make_sample(const PopulationFrame& frame, std::vector<Index> indices,
                       const std::optional<Vector>& design_weights) {
  const Index n = static_cast<Index>(indices.size());
  if (n == 0) throw std::invalid_argument("sample is empty");
  const Vector d = design_weights ? *design_weights
                                  : Vector::Constant(n, double(frame.size()) / double(n));
  return SampleData::from_frame(frame, std::move(indices), d);
}

py::dict trace_dict(const SelectionTrace& t) {
  py::dict out;
  out["candidates"] = t.candidates;
  out["min_weights"] = t.min_weights;
  out["all_positive"] = std::vector<bool>(t.all_positive);
  out["failed"] = std::vector<bool>(t.failed);
  out["chosen"] = t.chosen;
  out["exhausted"] = t.exhausted;
  return out;
}

py::dict result_dict(const CalibrationResult& r) {
  py::dict out;
  out["weights"] = r.weights;
  out["estimate"] = r.estimate;
  out["greg_estimate"] = r.greg_estimate;
  out["ht_estimate"] = r.ht_estimate;
  out["coefficient"] = r.coefficient;
  out["constraint_residual"] = r.constraint_residual;
  out["basis"] = r.basis.label;
  const auto& d = r.diagnostics;
  out["min_weight"] = d.min_weight;
  out["cv_weight"] = d.cv_weight;
  out["negative_count"] = d.negative_count;
  out["sq_calibration_error"] = d.sq_calibration_error_on_originals;
  out["gram_condition"] = d.gram_condition;
  return out;
}

py::dict summary_dict(const EstimatorOutcomeSummary& s) {
  py::dict out;
  out["estimator"] = s.estimator;
  out["outcome"] = s.outcome;
  out["relative_mse"] = s.relative_mse;
  out["mse"] = s.mse;
  out["bias"] = s.bias;
  out["replicates_used"] = s.replicates_used;
  out["failures"] = s.failures;
  out["mean_cv"] = s.mean_cv;
  out["cv_q1"] = s.cv_q1;
  out["cv_median"] = s.cv_median;
  out["cv_q3"] = s.cv_q3;
  out["mean_positive_fraction"] = s.mean_positive_fraction;
  out["mean_min_weight"] = s.mean_min_weight;
  out["mean_sq_calibration_error"] = s.mean_sq_calibration_error;
  out["mean_selected"] = s.mean_selected;
  return out;
}

}  // namespace

PYBIND11_MODULE(_surveycalib, m) {
  m.doc() = "Calibration estimators on principal components for survey sampling";

  static py::exception<NumericalError> numerical(m, "NumericalError", PyExc_ArithmeticError);
  static py::exception<ConfigError> config_error(m, "ConfigError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const NumericalError& e) {
      numerical(e.what());
    } catch (const ConfigError& e) {
      config_error(e.what());
    }
  });

  m.def(
      "eig",
      [](const Matrix& a) {
        const auto s = symmetric_eig(a);
        return py::make_tuple(s.eigenvalues, s.eigenvectors);
      },
      py::arg("matrix"), "Eigenvalues (descending) and eigenvectors of a symmetric matrix.");

  m.def(
      "population_covariance", [](const Matrix& aux) { return population_covariance(make_frame(aux, {})); },
      py::arg("aux"), "N^-1 X^T X of the column-centered auxiliary matrix.");

  m.def(
      "draw_sample",
      [](Index N, Index n, std::uint64_t seed, std::uint64_t replicate) {
        return draw_indices(N, n, seed, replicate);
      },
      py::arg("population_size"), py::arg("sample_size"), py::arg("seed"), py::arg("replicate") = 0,
      "Sorted 0-based unit indices of an SRSWOR draw.");

  m.def(
      "chi_square_weights",
      [](const Matrix& sample_matrix, const Vector& design_weights, const Vector& totals) {
        const Index n = sample_matrix.rows();
        if (design_weights.size() != n) throw std::invalid_argument("design_weights length must match rows");
        std::vector<Index> idx(static_cast<std::size_t>(n));
        std::iota(idx.begin(), idx.end(), Index{0});
        const SampleData s(idx, design_weights, sample_matrix, Matrix::Zero(n, 1));
        AuxBasis b;
        b.sample_matrix = sample_matrix;
        b.totals = totals;
        return chi_square_weights(s, b);
      },
      py::arg("sample_matrix"), py::arg("design_weights"), py::arg("totals"),
      "Chi-square calibration weights on an arbitrary basis.");

  m.def(
      "calibrate",
      [](const Matrix& aux, const Matrix& outcomes, std::vector<Index> indices, const std::string& estimator,
         const std::optional<Vector>& design_weights) {
        const PopulationFrame f = make_frame(aux, outcomes);
        const SampleData s = make_sample(f, std::move(indices), design_weights);
        const EstimatorSpec spec = parse_estimator_id(estimator);
        spec.validate(f.aux_dim(), s.size());
        const auto spectrum = symmetric_eig(population_covariance(f));
        const EstimatorRun run = run_estimator(spec, s, f, spectrum);
        py::dict out = result_dict(run.result);
        out["estimator"] = spec.id();
        out["selected"] = std::isnan(run.selected) ? py::object(py::none()) : py::object(py::float_(run.selected));
        out["selection"] = run.selection ? py::object(trace_dict(*run.selection)) : py::object(py::none());
        return out;
      },
      py::arg("aux"), py::arg("outcomes"), py::arg("indices"), py::arg("estimator") = "full",
      py::arg("design_weights") = py::none(),
      "Calibration estimator named by an id such as 'HT', 'full', 'pc(5)', 'epc(auto)' or 'ridge(auto)'.");

  m.def(
      "select_r",
      [](const Matrix& aux, std::vector<Index> indices, Index r_max, bool estimated, bool intercept,
         const std::optional<Vector>& design_weights) {
        const PopulationFrame f = make_frame(aux, {});
        const SampleData s = make_sample(f, std::move(indices), design_weights);
        if (r_max < 0) r_max = default_r_max(f.aux_dim(), s.size() - (intercept ? 1 : 0));
        const SelectedR sel = estimated ? select_r_positive_estimated(s, known_totals(f), r_max, intercept)
                                        : select_r_positive(s, f, symmetric_eig(population_covariance(f)),
                                                            r_max, intercept);
        return py::make_tuple(sel.r, trace_dict(sel.trace));
      },
      py::arg("aux"), py::arg("indices"), py::arg("r_max") = -1, py::arg("estimated") = false,
      py::arg("intercept") = false, py::arg("design_weights") = py::none(),
      "Largest r whose calibration weights are all positive, with the full trace.");

  m.def(
      "synthetic_population",
      [](Index units, Index slots_per_day, Index past_days, Index future_days, Index harmonics, double level_mean,
         double unit_level_sd, double amplitude, double noise_sd, double rho, std::uint64_t seed) {
        SyntheticPopSpec spec;
        spec.units = units;
        spec.slots_per_day = slots_per_day;
        spec.past_days = past_days;
        spec.future_days = future_days;
        spec.harmonics = harmonics;
        spec.level_mean = level_mean;
        spec.unit_level_sd = unit_level_sd;
        spec.amplitude = amplitude;
        spec.noise_sd = noise_sd;
        spec.cross_week_correlation = rho;
        spec.seed = seed;
        const PopulationFrame f = synthetic_load_population(spec);
        return py::make_tuple(f.aux(), f.outcomes());
      },
      py::kw_only(), py::arg("units") = 2000, py::arg("slots_per_day") = 48, py::arg("past_days") = 2,
      py::arg("future_days") = 7, py::arg("harmonics") = 3, py::arg("level_mean") = 1.0,
      py::arg("unit_level_sd") = 0.8, py::arg("amplitude") = 0.4, py::arg("noise_sd") = 0.3,
      py::arg("rho") = 0.6, py::arg("seed") = 20140101,
      "Synthetic load-curve population: (aux, outcomes).");

  m.def(
      "simulate",
      [](const Matrix& aux, const Matrix& outcomes, const std::vector<std::string>& estimators, Index n,
         Index replicates, const std::string& reference, std::uint64_t seed, unsigned threads) {
        std::vector<EstimatorSpec> bank;
        for (const auto& id : estimators) bank.push_back(parse_estimator_id(id));
        DesignSpec design;
        design.population_size = aux.rows();
        design.sample_size = n;
        design.seed = seed;
        MonteCarloOptions opts;
        opts.threads = threads;
        SimulationReport report;
        {
          py::gil_scoped_release release;
          report = run_monte_carlo(PopulationFrame(aux, outcomes), design, bank, replicates, reference, opts);
        }
        py::list rows;
        for (const auto& row : report.rows) rows.append(summary_dict(row));
        return rows;
      },
      py::arg("aux"), py::arg("outcomes"), py::arg("estimators"), py::arg("n"), py::arg("replicates") = 1000,
      py::arg("reference") = "full", py::arg("seed") = 1, py::arg("threads") = 1,
      "Monte Carlo comparison of an estimator bank; one dict per (estimator, outcome).");

  m.def(
      "check_config", [](const std::string& text) { return config_to_json(parse_config_text(text)); },
      py::arg("text"), "Validate a JSON run config and return it normalized.");
}
