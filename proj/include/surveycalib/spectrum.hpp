#pragma once

#include "surveycalib/core.hpp"

#include <vector>

namespace surveycalib {

/// Eigenvalues sorted descending with matching orthonormal eigenvectors
/// (columns of `eigenvectors`). In every eigenvector the entry of largest
/// magnitude is positive, ties going to the lowest index.
struct SymmetricSpectrum {
  Vector eigenvalues;
  Matrix eigenvectors;
  /// near_degenerate[j] is set when |lambda_j - lambda_{j+1}| < 1e-10 * lambda_1,
  /// i.e. the split between components j and j+1 is not identifiable.
  std::vector<bool> near_degenerate;
  int sweeps = 0;

  Index dim() const noexcept { return eigenvalues.size(); }
  /// First r eigenvectors (G_r).
  Matrix leading(Index r) const { return eigenvectors.leftCols(r); }
  bool any_near_degenerate() const;
};

/// Scores of the first r (estimated) principal components on a set of rows,
/// with the population totals they must be calibrated to.
struct PrincipalComponents {
  Matrix scores;        // rows x r
  Matrix loadings;      // p x r
  Vector eigenvalues;   // r
  Vector totals;        // r, population totals of the components
  Index r = 0;
};

/// N^{-1} X^T X of a centered frame.
Matrix population_covariance(const PopulationFrame& frame);

/// Design-weighted covariance (1/N_hat) sum d_k x_k x_k^T - xbar xbar^T with
/// N_hat = sum d_k and xbar = N_hat^{-1} sum d_k x_k.
Matrix weighted_covariance(const SampleData& sample);
Matrix weighted_covariance(const Matrix& rows, const Vector& weights);

/// Cyclic Jacobi eigendecomposition. Stops once every off-diagonal entry is
/// below 1e-12 times the Frobenius norm of the input; throws NumericalError
/// after 100 sweeps. Eigenvalues in [-1e-10, 0) are clamped to zero.
SymmetricSpectrum symmetric_eig(const Matrix& m);

/// Z = X G_r on a centered frame.
PrincipalComponents principal_components(const PopulationFrame& frame,
                                         const SymmetricSpectrum& spectrum, Index r);

/// Z_hat = X_s G_hat_r on sampled rows, with totals t_x^T v_hat_j taken from
/// the known auxiliary totals. Rows are not re-centered.
PrincipalComponents estimated_principal_components(const SampleData& sample,
                                                   const SymmetricSpectrum& spectrum, Index r,
                                                   const Vector& aux_totals);

}  // namespace surveycalib
