#include "surveycalib/diagnostics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace surveycalib {

WeightSummary weight_diagnostics(const Vector& weights) {
  const Index n = weights.size();
  if (n < 2) throw std::invalid_argument("weight diagnostics need at least two weights");
  WeightSummary out;
  out.mean = weights.mean();
  const double var = (weights.array() - out.mean).square().sum() / static_cast<double>(n);
  out.cv = out.mean == 0.0 ? std::numeric_limits<double>::quiet_NaN()
                           : std::sqrt(var) / std::abs(out.mean);
  Index positive = 0;
  for (Index k = 0; k < n; ++k) {
    if (weights(k) > 0.0) ++positive;
    if (weights(k) < 0.0) ++out.negative_count;
  }
  out.positive_fraction = static_cast<double>(positive) / static_cast<double>(n);
  out.min = weights.minCoeff();
  out.max = weights.maxCoeff();
  return out;
}

double calibration_error_sq(const Vector& weights, const Matrix& sample_aux_rows,
                            const Vector& original_totals) {
  if (sample_aux_rows.rows() != weights.size() || sample_aux_rows.cols() != original_totals.size())
    throw std::invalid_argument("calibration_error_sq: dimension mismatch");
  return (sample_aux_rows.transpose() * weights - original_totals).squaredNorm();
}

}  // namespace surveycalib
