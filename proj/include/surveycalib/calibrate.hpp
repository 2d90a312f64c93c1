#pragma once

#include "surveycalib/core.hpp"
#include "surveycalib/design.hpp"
#include "surveycalib/spectrum.hpp"

#include <string>
#include <vector>

namespace surveycalib {

enum class BasisKind { Original, Pc, Epc, PartialPc, PartialEpc, Pc2, Ridge, Custom };

std::string to_string(BasisKind kind);

/// Calibration variables observed on the sample (n x m) and their known
/// population totals.
///
/// When the variables are a linear map of the auxiliary vector, `map` holds
/// that map: b_k = map^T x_k, or b_k = map^T (1, x_k) when `affine` is set.
/// Estimators use it to express the GREG coefficient on the original
/// variables. `map` is empty for nonlinear bases (second moments).
struct AuxBasis {
  Matrix sample_matrix;
  Vector totals;
  BasisKind kind = BasisKind::Custom;
  std::string label;
  Matrix map;
  bool affine = false;

  Index dim() const noexcept { return sample_matrix.cols(); }
  bool has_map() const noexcept { return map.size() > 0 || dim() == 0; }
};

/// Map on (1, x) that keeps the intercept and applies `linear` to x; returns
/// `linear` unchanged when `affine` is false.
Matrix intercept_map(const Matrix& linear, bool affine);

/// Basis on the original auxiliary variables, optionally led by an intercept
/// whose total is the population size.
AuxBasis original_basis(const SampleData& sample, const KnownTotals& totals,
                        bool include_intercept);

/// Basis b_k = map^T x_k (or map^T (1, x_k)) with totals map^T t_x.
AuxBasis linear_basis(const SampleData& sample, const KnownTotals& totals, Matrix map,
                      bool affine, BasisKind kind, std::string label);

struct CalibrationDiagnostics {
  double min_weight = 0.0;
  double cv_weight = 0.0;
  Index negative_count = 0;
  double constraint_residual_norm = 0.0;
  /// NaN unless original totals were supplied.
  double sq_calibration_error_on_originals = 0.0;
  double gram_condition = 0.0;
  /// Components actually used (partial calibration drops numerically null
  /// residual components).
  Index effective_r = 0;
};

struct CalibrationResult {
  Vector weights;
  Vector estimate;             // sum_s w_k y_k, one entry per outcome
  Vector greg_estimate;        // t_yd - (t_bd - t_b)^T gamma, same quantity by the difference form
  Vector ht_estimate;          // t_yd
  Matrix basis_coefficient;    // m x q regression coefficient on the calibration basis
  Matrix coefficient;          // coefficient on the original variables (with leading intercept
                               // row when the basis is affine); empty for nonlinear bases
  Vector constraint_residual;  // sum_s w_k b_k - t_b
  AuxBasis basis;
  CalibrationDiagnostics diagnostics;
};

/// Chi-square calibration weights
///   w_k = d_k - d_k b_k^T (sum_s d_l b_l b_l^T)^{-1} (t_bd - t_b).
/// Throws NumericalError when the Gram matrix is singular or its condition
/// estimate (after diagonal equilibration) exceeds 1e12.
Vector chi_square_weights(const SampleData& sample, const AuxBasis& basis);

/// Chi-square distance sum (w_k - d_k)^2 / (q_k d_k) with q_k = 1.
double chi_square_distance(const Vector& weights, const Vector& design_weights);

/// Calibration estimator on `basis` for the columns of `outcomes` (n x q).
/// `originals`, when given, enables the squared calibration error on the
/// sample's auxiliary rows.
CalibrationResult greg_estimate(const SampleData& sample, const AuxBasis& basis,
                                const Matrix& outcomes, const KnownTotals* originals = nullptr);

/// Generalized difference estimator with the population PCR coefficient on
/// the first r components (r = p gives the OLS coefficient). Oracle-only:
/// needs the whole population.
Vector generalized_difference_estimate(const SampleData& sample, const PopulationFrame& frame,
                                       const SymmetricSpectrum& spectrum, Index r);
Vector generalized_difference_estimate(const SampleData& sample, const PopulationFrame& frame,
                                       Index r);

/// Population PCR coefficient sum_{j<=r} lambda_j^{-1} [v_j^T (N^{-1} X^T y)] v_j, p x q.
Matrix population_pcr_coefficient(const PopulationFrame& frame, const SymmetricSpectrum& spectrum,
                                  Index r);

/// Calibration on the first r population principal components (totals 0).
/// r = 0 leaves the design weights (or calibrates on the intercept alone).
CalibrationResult pc_calibration(const SampleData& sample, const PopulationFrame& frame,
                                 const SymmetricSpectrum& spectrum, Index r,
                                 bool include_intercept = false);

/// Calibration on the first and second moments of the first r population
/// principal components: totals 0 for z_j and N lambda_j for z_j^2.
CalibrationResult pc2_calibration(const SampleData& sample, const PopulationFrame& frame,
                                  const SymmetricSpectrum& spectrum, Index r,
                                  bool include_intercept = false);

/// Calibration on principal components estimated from the design-weighted
/// sample covariance; only the sample and the known totals are used.
CalibrationResult epc_calibration(const SampleData& sample, const KnownTotals& totals, Index r,
                                  bool include_intercept = false);

/// Exact calibration on the auxiliary columns `exact_columns` plus r
/// principal components of the part of the remaining columns orthogonal to
/// them. With `estimated` the projection and the components come from the
/// sample (design-weighted), and only `frame`'s totals are used.
CalibrationResult partial_pc_calibration(const SampleData& sample, const PopulationFrame& frame,
                                         const std::vector<Index>& exact_columns, Index r,
                                         bool estimated, bool include_intercept = false);
CalibrationResult partial_epc_calibration(const SampleData& sample, const KnownTotals& totals,
                                          const std::vector<Index>& exact_columns, Index r,
                                          bool include_intercept = false);

/// Penalty settings for ridge calibration. `hard[j]` marks an infinite cost:
/// constraint j is enforced exactly and `costs[j]` is ignored.
struct RidgeSpec {
  double lambda = 0.0;
  Vector costs;
  std::vector<bool> hard;

  static RidgeSpec uniform(double lambda, Index m);
  void validate(Index m) const;
};

/// w_k = d_k - d_k b_k^T (sum_s d b b^T + lambda C^{-1})^{-1} (t_bd - t_b),
/// with C^{-1} = 0 on hard coordinates.
Vector ridge_weights(const SampleData& sample, const AuxBasis& basis, const RidgeSpec& spec);

/// Ridge calibration estimator; the coefficient is the ridge-type estimator
/// (sum_s d b b^T + lambda C^{-1})^{-1} sum_s d b y. The constraint residual
/// diagnostic is measured on the hard coordinates only.
CalibrationResult ridge_calibration(const SampleData& sample, const AuxBasis& basis,
                                    const RidgeSpec& spec, const Matrix& outcomes,
                                    const KnownTotals* originals = nullptr);

/// HT variance estimator of the residuals y_k - aux_k^T coefficient, one
/// value per outcome. `aux` must match the coefficient rows (prepend an
/// intercept column when the coefficient has one).
Vector residual_variance_estimate(const SampleData& sample, const InclusionProbs& probs,
                                  const Matrix& outcomes, const Matrix& coefficient,
                                  const Matrix& aux);

}  // namespace surveycalib
