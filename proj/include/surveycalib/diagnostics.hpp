#pragma once

#include "surveycalib/core.hpp"

namespace surveycalib {

struct WeightSummary {
  double mean = 0.0;
  double cv = 0.0;  // sd / mean, divisor n; NaN when the mean is zero
  double positive_fraction = 0.0;
  double min = 0.0;
  double max = 0.0;
  Index negative_count = 0;
};

WeightSummary weight_diagnostics(const Vector& weights);

/// || sum_s w_k x_k - t_x ||^2 on the original auxiliary variables.
double calibration_error_sq(const Vector& weights, const Matrix& sample_aux_rows,
                            const Vector& original_totals);

}  // namespace surveycalib
