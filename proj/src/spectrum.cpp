#include "surveycalib/spectrum.hpp"

#include "surveycalib/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace surveycalib {

namespace {

constexpr int kMaxSweeps = 100;
constexpr double kOffDiagonalTolerance = 1e-12;
constexpr double kClampFloor = -1e-10;
constexpr double kRetainedEigenvalueFloor = 1e-12;

double max_off_diagonal(const Matrix& a) {
  double worst = 0.0;
  for (Index j = 0; j < a.cols(); ++j)
    for (Index i = 0; i < j; ++i) worst = std::max(worst, std::abs(a(i, j)));
  return worst;
}

// Flip columns so the largest-magnitude entry is positive. Magnitudes within
// a relative 1e-12 of the maximum count as ties and the lowest index wins.
void canonicalize_signs(Matrix& v) {
  for (Index j = 0; j < v.cols(); ++j) {
    const double top = v.col(j).cwiseAbs().maxCoeff();
    if (top == 0.0) continue;
    for (Index i = 0; i < v.rows(); ++i) {
      if (std::abs(v(i, j)) >= top * (1.0 - 1e-12)) {
        if (v(i, j) < 0.0) v.col(j) = -v.col(j);
        break;
      }
    }
  }
}

void check_r(Index r, Index p) {
  if (r < 1 || r > p)
    throw std::invalid_argument("number of components r=" + std::to_string(r) +
                                " outside [1, " + std::to_string(p) + "]");
}

}  // namespace

bool SymmetricSpectrum::any_near_degenerate() const {
  return std::any_of(near_degenerate.begin(), near_degenerate.end(), [](bool b) { return b; });
}

Matrix population_covariance(const PopulationFrame& frame) {
  if (!frame.centered()) throw std::invalid_argument("population_covariance needs a centered frame");
  Matrix c = frame.aux().transpose() * frame.aux() / static_cast<double>(frame.size());
  return (c + c.transpose()) / 2.0;
}

Matrix weighted_covariance(const Matrix& rows, const Vector& weights) {
  if (rows.rows() != weights.size()) throw std::invalid_argument("weights and rows disagree");
  const double n_hat = weights.sum();
  if (!(n_hat != 0.0) || !std::isfinite(n_hat))
    throw NumericalError("sum of design weights is zero");
  const Vector mean = rows.transpose() * weights / n_hat;
  Matrix c = rows.transpose() * weights.asDiagonal() * rows / n_hat - mean * mean.transpose();
  return (c + c.transpose()) / 2.0;
}

Matrix weighted_covariance(const SampleData& sample) {
  if (sample.size() < 2) throw std::invalid_argument("weighted_covariance needs n >= 2");
  return weighted_covariance(sample.aux_rows(), sample.design_weights());
}

SymmetricSpectrum symmetric_eig(const Matrix& m) {
  if (m.rows() != m.cols() || m.rows() < 1) throw std::invalid_argument("matrix must be square");
  const Index p = m.rows();
  const double frob = m.norm();
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-9 * std::max(1.0, frob)) throw std::invalid_argument("matrix is not symmetric");

  Matrix a = (m + m.transpose()) / 2.0;
  Matrix v = Matrix::Identity(p, p);
  const double threshold = kOffDiagonalTolerance * frob;

  int sweeps = 0;
  while (max_off_diagonal(a) >= threshold && frob > 0.0) {
    if (sweeps == kMaxSweeps)
      throw NumericalError("Jacobi eigensolver did not converge; residual off-diagonal norm " +
                               std::to_string(max_off_diagonal(a)),
                           max_off_diagonal(a));
    ++sweeps;
    for (Index p1 = 0; p1 < p - 1; ++p1) {
      for (Index q = p1 + 1; q < p; ++q) {
        const double apq = a(p1, q);
        if (std::abs(apq) < threshold) continue;
        const double theta = (a(q, q) - a(p1, p1)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Index k = 0; k < p; ++k) {
          const double akp = a(k, p1);
          const double akq = a(k, q);
          a(k, p1) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Index k = 0; k < p; ++k) {
          const double apk = a(p1, k);
          const double aqk = a(q, k);
          a(p1, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p1, q) = 0.0;
        a(q, p1) = 0.0;
        for (Index k = 0; k < p; ++k) {
          const double vkp = v(k, p1);
          const double vkq = v(k, q);
          v(k, p1) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<Index> order(static_cast<std::size_t>(p));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index i, Index j) { return a(i, i) > a(j, j); });

  SymmetricSpectrum out;
  out.eigenvalues.resize(p);
  out.eigenvectors.resize(p, p);
  for (Index j = 0; j < p; ++j) {
    const Index src = order[static_cast<std::size_t>(j)];
    double lambda = a(src, src);
    if (lambda < 0.0 && lambda >= kClampFloor) lambda = 0.0;
    out.eigenvalues(j) = lambda;
    out.eigenvectors.col(j) = v.col(src);
  }
  canonicalize_signs(out.eigenvectors);

  out.near_degenerate.assign(static_cast<std::size_t>(p), false);
  const double scale = std::abs(out.eigenvalues(0));
  for (Index j = 0; j + 1 < p; ++j)
    out.near_degenerate[static_cast<std::size_t>(j)] =
        std::abs(out.eigenvalues(j) - out.eigenvalues(j + 1)) < 1e-10 * scale;
  out.sweeps = sweeps;
  return out;
}

PrincipalComponents principal_components(const PopulationFrame& frame,
                                         const SymmetricSpectrum& spectrum, Index r) {
  if (!frame.centered()) throw std::invalid_argument("principal_components needs a centered frame");
  if (spectrum.dim() != frame.aux_dim()) throw std::invalid_argument("spectrum dimension mismatch");
  check_r(r, frame.aux_dim());
  PrincipalComponents pcs;
  pcs.r = r;
  pcs.loadings = spectrum.leading(r);
  pcs.eigenvalues = spectrum.eigenvalues.head(r);
  pcs.scores = frame.aux() * pcs.loadings;
  pcs.totals = Vector::Zero(r);
  return pcs;
}

PrincipalComponents estimated_principal_components(const SampleData& sample,
                                                   const SymmetricSpectrum& spectrum, Index r,
                                                   const Vector& aux_totals) {
  const Index p = sample.aux_rows().cols();
  if (spectrum.dim() != p || aux_totals.size() != p)
    throw std::invalid_argument("spectrum or totals dimension mismatch");
  check_r(r, p);
  if (spectrum.eigenvalues(r - 1) <= kRetainedEigenvalueFloor)
    throw NumericalError("retained eigenvalue numerically zero", spectrum.eigenvalues(r - 1));
  PrincipalComponents pcs;
  pcs.r = r;
  pcs.loadings = spectrum.leading(r);
  pcs.eigenvalues = spectrum.eigenvalues.head(r);
  pcs.scores = sample.aux_rows() * pcs.loadings;
  pcs.totals = pcs.loadings.transpose() * aux_totals;
  return pcs;
}

}  // namespace surveycalib
