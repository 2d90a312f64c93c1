#pragma once

#include "surveycalib/calibrate.hpp"

#include <vector>

namespace surveycalib {

/// Record of a positive-weights selection: every candidate evaluated, its
/// smallest weight and whether all weights were strictly positive.
struct SelectionTrace {
  std::vector<double> candidates;
  std::vector<double> min_weights;      // NaN where the calibration solve failed
  std::vector<bool> all_positive;
  std::vector<bool> failed;
  double chosen = 0.0;
  /// lambda selection only: even the largest grid value gave a non-positive weight
  bool exhausted = false;
};

struct SelectedR {
  Index r = 0;
  SelectionTrace trace;
};

struct SelectedLambda {
  double lambda = 0.0;
  SelectionTrace trace;
};

/// Default largest dimension tried: min(p, n - 1, 200).
Index default_r_max(Index p, Index n);

/// Largest r in [0, r_max] whose population-PC calibration weights are all
/// strictly positive. Every candidate is evaluated, so non-monotone masks
/// stay visible in the trace.
SelectedR select_r_positive(const SampleData& sample, const PopulationFrame& frame,
                            const SymmetricSpectrum& spectrum, Index r_max,
                            bool include_intercept = false);

/// Same rule with components estimated from the sample.
SelectedR select_r_positive_estimated(const SampleData& sample, const KnownTotals& totals,
                                      Index r_max, bool include_intercept = false);

/// Geometric lambda grid. Zero bounds mean "derive from the Gram matrix":
/// 1e-6 g .. 1e6 g with g the Frobenius norm of sum_s d b b^T.
struct LambdaGrid {
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  int points = 61;
  int bisection_steps = 40;
};

/// Smallest lambda on the grid whose ridge weights are all strictly
/// positive, refined by geometric bisection against the previous grid point.
/// `shape` supplies the costs and hard-constraint mask (its lambda is
/// ignored); unit costs when null.
SelectedLambda select_lambda_positive(const SampleData& sample, const AuxBasis& basis,
                                      const LambdaGrid& grid = {}, const RidgeSpec* shape = nullptr);

}  // namespace surveycalib
