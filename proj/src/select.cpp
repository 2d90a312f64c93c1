#include "surveycalib/select.hpp"

#include "surveycalib/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace surveycalib {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void record(SelectionTrace& trace, double candidate, const Vector* weights) {
  trace.candidates.push_back(candidate);
  if (weights) {
    const double lowest = weights->minCoeff();
    trace.min_weights.push_back(lowest);
    trace.all_positive.push_back(lowest > 0.0);
    trace.failed.push_back(false);
  } else {
    trace.min_weights.push_back(kNaN);
    trace.all_positive.push_back(false);
    trace.failed.push_back(true);
  }
}

Index largest_positive(const SelectionTrace& trace) {
  Index best = 0;
  for (std::size_t i = 0; i < trace.all_positive.size(); ++i)
    if (trace.all_positive[i]) best = static_cast<Index>(i);
  return best;
}

template <typename WeightsFor>
SelectedR scan_r(Index r_max, WeightsFor&& weights_for) {
  SelectedR out;
  for (Index r = 0; r <= r_max; ++r) {
    try {
      const Vector w = weights_for(r);
      record(out.trace, static_cast<double>(r), &w);
    } catch (const NumericalError&) {
      record(out.trace, static_cast<double>(r), nullptr);
    }
  }
  out.r = largest_positive(out.trace);
  out.trace.chosen = static_cast<double>(out.r);
  return out;
}

void check_r_max(Index r_max, Index p, Index n) {
  if (r_max < 0 || r_max > p) throw std::invalid_argument("r_max must lie in [0, p]");
  if (r_max >= n) throw std::invalid_argument("r_max must be smaller than the sample size");
}

}  // namespace

Index default_r_max(Index p, Index n) { return std::min({p, n - 1, Index{200}}); }

SelectedR select_r_positive(const SampleData& sample, const PopulationFrame& frame,
                            const SymmetricSpectrum& spectrum, Index r_max,
                            bool include_intercept) {
  check_r_max(r_max, frame.aux_dim(), sample.size());
  const KnownTotals totals = known_totals(frame);
  return scan_r(r_max, [&](Index r) {
    const AuxBasis basis = linear_basis(sample, totals, intercept_map(spectrum.leading(r), include_intercept),
                                        include_intercept, BasisKind::Pc, "pc");
    return chi_square_weights(sample, basis);
  });
}

SelectedR select_r_positive_estimated(const SampleData& sample, const KnownTotals& totals,
                                      Index r_max, bool include_intercept) {
  const Index p = sample.aux_rows().cols();
  check_r_max(r_max, p, sample.size());
  const SymmetricSpectrum spectrum = symmetric_eig(weighted_covariance(sample));
  return scan_r(r_max, [&](Index r) {
    Matrix loadings(p, 0);
    if (r > 0) loadings = estimated_principal_components(sample, spectrum, r, totals.aux_totals).loadings;
    const AuxBasis basis = linear_basis(sample, totals, intercept_map(loadings, include_intercept),
                                        include_intercept, BasisKind::Epc, "epc");
    return chi_square_weights(sample, basis);
  });
}

SelectedLambda select_lambda_positive(const SampleData& sample, const AuxBasis& basis,
                                      const LambdaGrid& grid, const RidgeSpec* shape) {
  if (grid.points < 2) throw std::invalid_argument("lambda grid needs at least two points");
  RidgeSpec spec = shape ? *shape : RidgeSpec::uniform(0.0, basis.dim());
  double lo = grid.lambda_min;
  double hi = grid.lambda_max;
  if (lo <= 0.0 || hi <= 0.0) {
    const Matrix g = basis.sample_matrix.transpose() * sample.design_weights().asDiagonal() *
                     basis.sample_matrix;
    const double scale = g.norm() > 0.0 ? g.norm() : 1.0;
    if (lo <= 0.0) lo = 1e-6 * scale;
    if (hi <= 0.0) hi = 1e6 * scale;
  }
  if (!(hi > lo)) throw std::invalid_argument("lambda grid bounds must satisfy min < max");

  auto min_weight = [&](double lambda) {
    spec.lambda = lambda;
    try {
      return ridge_weights(sample, basis, spec).minCoeff();
    } catch (const NumericalError&) {
      return kNaN;
    }
  };

  SelectedLambda out;
  const double ratio = std::log(hi / lo) / static_cast<double>(grid.points - 1);
  int first_ok = -1;
  std::vector<double> values(static_cast<std::size_t>(grid.points));
  for (int i = 0; i < grid.points; ++i) {
    const double lambda = i == grid.points - 1 ? hi : lo * std::exp(ratio * i);
    values[static_cast<std::size_t>(i)] = lambda;
    const double lowest = min_weight(lambda);
    out.trace.candidates.push_back(lambda);
    out.trace.min_weights.push_back(lowest);
    out.trace.all_positive.push_back(lowest > 0.0);
    out.trace.failed.push_back(std::isnan(lowest));
    if (first_ok < 0 && lowest > 0.0) first_ok = i;
  }

  if (first_ok < 0) {
    out.lambda = hi;
    out.trace.exhausted = true;
  } else if (first_ok == 0) {
    out.lambda = lo;
  } else {
    double bad = values[static_cast<std::size_t>(first_ok - 1)];
    double good = values[static_cast<std::size_t>(first_ok)];
    for (int step = 0; step < grid.bisection_steps; ++step) {
      const double mid = std::sqrt(bad * good);
      if (min_weight(mid) > 0.0)
        good = mid;
      else
        bad = mid;
    }
    out.lambda = good;
  }
  out.trace.chosen = out.lambda;
  return out;
}

}  // namespace surveycalib
