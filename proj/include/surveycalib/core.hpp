#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <vector>

namespace surveycalib {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Full-population data: the auxiliary matrix X (N x p, one row per unit),
/// the outcome matrix (N x q, one column per study variable) and the known
/// auxiliary totals.
///
/// Frames are immutable. `center_columns` returns a new frame whose auxiliary
/// columns have zero sum; the subtracted column means are kept so original
/// totals stay recoverable as `aux_totals() + N * column_means()`.
class PopulationFrame {
 public:
  PopulationFrame(Matrix aux, Matrix outcomes,
                  std::vector<std::string> aux_names = {},
                  std::vector<std::string> outcome_names = {});

  Index size() const noexcept { return aux_.rows(); }
  Index aux_dim() const noexcept { return aux_.cols(); }
  Index outcome_dim() const noexcept { return outcomes_.cols(); }

  const Matrix& aux() const noexcept { return aux_; }
  const Matrix& outcomes() const noexcept { return outcomes_; }
  const Vector& aux_totals() const noexcept { return aux_totals_; }
  const Vector& column_means() const noexcept { return column_means_; }
  bool centered() const noexcept { return centered_; }

  const std::vector<std::string>& aux_names() const noexcept { return aux_names_; }
  const std::vector<std::string>& outcome_names() const noexcept { return outcome_names_; }

  /// Column totals of the outcomes (the targets t_y).
  Vector outcome_totals() const { return outcomes_.colwise().sum().transpose(); }

  /// Totals of the auxiliary variables on their original (uncentered) scale.
  Vector original_aux_totals() const;

 private:
  friend PopulationFrame center_columns(const PopulationFrame& frame);

  PopulationFrame() = default;

  Matrix aux_;
  Matrix outcomes_;
  Vector aux_totals_;
  Vector column_means_;
  bool centered_ = false;
  std::vector<std::string> aux_names_;
  std::vector<std::string> outcome_names_;
};

/// Known population information available to estimators that do not see
/// the full auxiliary matrix: the auxiliary totals and the population size.
struct KnownTotals {
  Vector aux_totals;
  Index population_size = 0;
};

KnownTotals known_totals(const PopulationFrame& frame);

/// A drawn sample: 0-based unit indices (strictly increasing), design
/// weights d_k = 1/pi_k and the observed rows.
class SampleData {
 public:
  SampleData(std::vector<Index> indices, Vector design_weights, Matrix aux_rows,
             Matrix outcome_rows);

  /// Rows of `frame` at `indices`, with the given design weights.
  static SampleData from_frame(const PopulationFrame& frame, std::vector<Index> indices,
                               Vector design_weights);

  Index size() const noexcept { return static_cast<Index>(indices_.size()); }
  const std::vector<Index>& indices() const noexcept { return indices_; }
  const Vector& design_weights() const noexcept { return design_weights_; }
  const Matrix& aux_rows() const noexcept { return aux_rows_; }
  const Matrix& outcome_rows() const noexcept { return outcome_rows_; }

 private:
  std::vector<Index> indices_;
  Vector design_weights_;
  Matrix aux_rows_;
  Matrix outcome_rows_;
};

/// Subtract population column means from the auxiliary matrix. A frame that
/// is already centered is returned unchanged.
PopulationFrame center_columns(const PopulationFrame& frame);

/// Column sums of the auxiliary matrix as currently stored.
Vector population_totals(const PopulationFrame& frame);

/// Prepend a constant-1 column to `rows`.
Matrix with_intercept(const Matrix& rows);

}  // namespace surveycalib
