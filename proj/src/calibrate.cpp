#include "surveycalib/calibrate.hpp"

#include "surveycalib/errors.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace surveycalib {

namespace {

constexpr double kMaxCondition = 1e12;
constexpr double kNullComponentTolerance = 1e-12;

// Cholesky of a symmetric positive-definite matrix after symmetric diagonal
// scaling; the condition estimate is taken on the scaled matrix so it does
// not depend on the units of the calibration variables.
class SpdSolver {
 public:
  SpdSolver(const Matrix& a, const char* what) {
    const Index m = a.rows();
    scale_.resize(m);
    for (Index j = 0; j < m; ++j) {
      const double diag = a(j, j);
      if (!(diag > 0.0) || !std::isfinite(diag))
        throw NumericalError(std::string(what) + " is singular (zero diagonal entry)",
                             std::numeric_limits<double>::infinity());
      scale_(j) = 1.0 / std::sqrt(diag);
    }
    const Matrix scaled = scale_.asDiagonal() * a * scale_.asDiagonal();
    llt_.compute(scaled);
    if (llt_.info() != Eigen::Success)
      throw NumericalError(std::string(what) + " is not positive definite",
                           std::numeric_limits<double>::infinity());
    const double rcond = llt_.rcond();
    condition_ = rcond > 0.0 ? 1.0 / rcond : std::numeric_limits<double>::infinity();
    if (!(condition_ <= kMaxCondition)) {
      std::ostringstream msg;
      msg << what << " is ill-conditioned (condition estimate " << condition_ << ")";
      throw NumericalError(msg.str(), condition_);
    }
  }

  Matrix solve(const Matrix& rhs) const {
    return scale_.asDiagonal() * llt_.solve(scale_.asDiagonal() * rhs);
  }

  double condition() const noexcept { return condition_; }

 private:
  Vector scale_;
  Eigen::LLT<Matrix> llt_;
  double condition_ = 1.0;
};

Matrix gram(const SampleData& sample, const Matrix& b) {
  Matrix g = b.transpose() * sample.design_weights().asDiagonal() * b;
  return (g + g.transpose()) / 2.0;
}

void check_basis(const SampleData& sample, const AuxBasis& basis) {
  if (basis.sample_matrix.rows() != sample.size())
    throw std::invalid_argument("basis rows do not match the sample size");
  if (basis.totals.size() != basis.dim())
    throw std::invalid_argument("basis totals length does not match the number of variables");
}

void check_outcomes(const SampleData& sample, const Matrix& outcomes) {
  if (outcomes.rows() != sample.size())
    throw std::invalid_argument("outcome rows do not match the sample size");
}

Matrix extended_rows(const Matrix& rows, bool affine) {
  return affine ? with_intercept(rows) : rows;
}

Vector extended_totals(const KnownTotals& totals, bool affine) {
  if (!affine) return totals.aux_totals;
  Vector t(totals.aux_totals.size() + 1);
  t(0) = static_cast<double>(totals.population_size);
  t.tail(totals.aux_totals.size()) = totals.aux_totals;
  return t;
}

// Shared tail of every estimator: estimates by both forms plus diagnostics.
CalibrationResult assemble(const SampleData& sample, AuxBasis basis, const Matrix& outcomes,
                           Vector weights, Matrix gamma, const Vector& correction,
                           double condition, const KnownTotals* originals) {
  CalibrationResult res;
  const Vector& d = sample.design_weights();
  res.ht_estimate = outcomes.transpose() * d;
  res.estimate = outcomes.transpose() * weights;
  res.greg_estimate = res.ht_estimate;
  if (gamma.rows() > 0) res.greg_estimate -= gamma.transpose() * correction;
  if (basis.has_map()) {
    const Index rows = basis.dim() == 0 ? sample.aux_rows().cols() + (basis.affine ? 1 : 0)
                                        : basis.map.rows();
    res.coefficient = basis.dim() == 0 ? Matrix::Zero(rows, outcomes.cols()) : Matrix(basis.map * gamma);
  }
  res.constraint_residual = basis.sample_matrix.transpose() * weights - basis.totals;

  auto& diag = res.diagnostics;
  const Index n = weights.size();
  diag.min_weight = weights.minCoeff();
  const double mean = weights.mean();
  const double var = (weights.array() - mean).square().sum() / static_cast<double>(n);
  diag.cv_weight = mean == 0.0 ? std::numeric_limits<double>::quiet_NaN() : std::sqrt(var) / std::abs(mean);
  diag.negative_count = (weights.array() < 0.0).count();
  diag.constraint_residual_norm = res.constraint_residual.norm();
  diag.sq_calibration_error_on_originals =
      originals ? (sample.aux_rows().transpose() * weights - originals->aux_totals).squaredNorm()
                : std::numeric_limits<double>::quiet_NaN();
  diag.gram_condition = condition;

  res.weights = std::move(weights);
  res.basis_coefficient = std::move(gamma);
  res.basis = std::move(basis);
  return res;
}

void check_r_range(Index r, Index upper, const char* what) {
  if (r < 0 || r > upper)
    throw std::invalid_argument(std::string(what) + ": r=" + std::to_string(r) + " outside [0, " +
                                std::to_string(upper) + "]");
}

void check_population_spectrum(const PopulationFrame& frame, const SymmetricSpectrum& spectrum) {
  if (!frame.centered()) throw std::invalid_argument("principal component calibration needs a centered frame");
  if (spectrum.dim() != frame.aux_dim()) throw std::invalid_argument("spectrum dimension mismatch");
}

}  // namespace

Matrix intercept_map(const Matrix& linear, bool affine) {
  if (!affine) return linear;
  Matrix m = Matrix::Zero(linear.rows() + 1, linear.cols() + 1);
  m(0, 0) = 1.0;
  m.bottomRightCorner(linear.rows(), linear.cols()) = linear;
  return m;
}

std::string to_string(BasisKind kind) {
  switch (kind) {
    case BasisKind::Original: return "original";
    case BasisKind::Pc: return "pc";
    case BasisKind::Epc: return "epc";
    case BasisKind::PartialPc: return "ppc";
    case BasisKind::PartialEpc: return "ppc-est";
    case BasisKind::Pc2: return "pc2";
    case BasisKind::Ridge: return "ridge-basis";
    case BasisKind::Custom: return "custom";
  }
  return "custom";
}

AuxBasis linear_basis(const SampleData& sample, const KnownTotals& totals, Matrix map, bool affine,
                      BasisKind kind, std::string label) {
  const Index p = sample.aux_rows().cols();
  if (totals.aux_totals.size() != p) throw std::invalid_argument("known totals length mismatch");
  if (map.rows() != p + (affine ? 1 : 0)) throw std::invalid_argument("basis map has wrong row count");
  AuxBasis basis;
  basis.sample_matrix = extended_rows(sample.aux_rows(), affine) * map;
  basis.totals = map.transpose() * extended_totals(totals, affine);
  basis.kind = kind;
  basis.label = std::move(label);
  basis.map = std::move(map);
  basis.affine = affine;
  return basis;
}

AuxBasis original_basis(const SampleData& sample, const KnownTotals& totals,
                        bool include_intercept) {
  const Index dim = sample.aux_rows().cols() + (include_intercept ? 1 : 0);
  return linear_basis(sample, totals, Matrix::Identity(dim, dim), include_intercept,
                      BasisKind::Original, "original");
}

double chi_square_distance(const Vector& weights, const Vector& design_weights) {
  return ((weights - design_weights).array().square() / design_weights.array()).sum();
}

Vector chi_square_weights(const SampleData& sample, const AuxBasis& basis) {
  check_basis(sample, basis);
  const Vector& d = sample.design_weights();
  if (basis.dim() == 0) return d;
  const Matrix& b = basis.sample_matrix;
  const SpdSolver solver(gram(sample, b), "calibration Gram matrix");
  const Vector correction = b.transpose() * d - basis.totals;
  const Vector mu = solver.solve(correction);
  return d.array() - d.array() * (b * mu).array();
}

CalibrationResult greg_estimate(const SampleData& sample, const AuxBasis& basis,
                                const Matrix& outcomes, const KnownTotals* originals) {
  check_basis(sample, basis);
  check_outcomes(sample, outcomes);
  const Vector& d = sample.design_weights();
  const Matrix& b = basis.sample_matrix;
  if (basis.dim() == 0)
    return assemble(sample, basis, outcomes, d, Matrix(0, outcomes.cols()), Vector(0), 1.0, originals);

  const SpdSolver solver(gram(sample, b), "calibration Gram matrix");
  const Vector correction = b.transpose() * d - basis.totals;
  const Vector mu = solver.solve(correction);
  Vector w = d.array() - d.array() * (b * mu).array();
  Matrix gamma = solver.solve(b.transpose() * d.asDiagonal() * outcomes);
  return assemble(sample, basis, outcomes, std::move(w), std::move(gamma), correction,
                  solver.condition(), originals);
}

Matrix population_pcr_coefficient(const PopulationFrame& frame, const SymmetricSpectrum& spectrum,
                                  Index r) {
  if (spectrum.dim() != frame.aux_dim()) throw std::invalid_argument("spectrum dimension mismatch");
  check_r_range(r, frame.aux_dim(), "population_pcr_coefficient");
  const Index p = frame.aux_dim();
  if (r == 0) return Matrix::Zero(p, frame.outcome_dim());
  if (spectrum.eigenvalues(r - 1) <= 1e-12)
    throw NumericalError("retained eigenvalue numerically zero", spectrum.eigenvalues(r - 1));
  const Matrix cross = frame.aux().transpose() * frame.outcomes() / static_cast<double>(frame.size());
  const Matrix g = spectrum.leading(r);
  const Vector inv = spectrum.eigenvalues.head(r).cwiseInverse();
  return g * inv.asDiagonal() * (g.transpose() * cross);
}

Vector generalized_difference_estimate(const SampleData& sample, const PopulationFrame& frame,
                                       const SymmetricSpectrum& spectrum, Index r) {
  const Matrix beta = population_pcr_coefficient(frame, spectrum, r);
  const Vector& d = sample.design_weights();
  const Vector t_yd = sample.outcome_rows().transpose() * d;
  const Vector correction = sample.aux_rows().transpose() * d - frame.aux_totals();
  return t_yd - beta.transpose() * correction;
}

Vector generalized_difference_estimate(const SampleData& sample, const PopulationFrame& frame,
                                       Index r) {
  return generalized_difference_estimate(sample, frame,
                                         symmetric_eig(population_covariance(frame)), r);
}

CalibrationResult pc_calibration(const SampleData& sample, const PopulationFrame& frame,
                                 const SymmetricSpectrum& spectrum, Index r,
                                 bool include_intercept) {
  check_population_spectrum(frame, spectrum);
  check_r_range(r, frame.aux_dim(), "pc_calibration");
  const KnownTotals totals = known_totals(frame);
  AuxBasis basis = linear_basis(sample, totals, intercept_map(spectrum.leading(r), include_intercept),
                                include_intercept, BasisKind::Pc, "pc(" + std::to_string(r) + ")");
  auto res = greg_estimate(sample, basis, sample.outcome_rows(), &totals);
  res.diagnostics.effective_r = r;
  return res;
}

CalibrationResult pc2_calibration(const SampleData& sample, const PopulationFrame& frame,
                                  const SymmetricSpectrum& spectrum, Index r,
                                  bool include_intercept) {
  check_population_spectrum(frame, spectrum);
  check_r_range(r, frame.aux_dim(), "pc2_calibration");
  if (r < 1) throw std::invalid_argument("pc2_calibration: r must be at least 1");
  const Index n = sample.size();
  const Index lead = include_intercept ? 1 : 0;
  if (2 * r + lead >= n)
    throw std::invalid_argument("pc2_calibration: 2r constraints need a larger sample");
  const Matrix z = sample.aux_rows() * spectrum.leading(r);
  const double N = static_cast<double>(frame.size());

  AuxBasis basis;
  basis.sample_matrix.resize(n, lead + 2 * r);
  basis.totals = Vector::Zero(lead + 2 * r);
  if (include_intercept) {
    basis.sample_matrix.col(0).setOnes();
    basis.totals(0) = N;
  }
  basis.sample_matrix.middleCols(lead, r) = z;
  basis.sample_matrix.rightCols(r) = z.array().square().matrix();
  basis.totals.tail(r) = N * spectrum.eigenvalues.head(r);
  basis.kind = BasisKind::Pc2;
  basis.label = "pc2(" + std::to_string(r) + ")";
  basis.affine = include_intercept;

  const KnownTotals totals = known_totals(frame);
  auto res = greg_estimate(sample, basis, sample.outcome_rows(), &totals);
  res.diagnostics.effective_r = r;
  return res;
}

CalibrationResult epc_calibration(const SampleData& sample, const KnownTotals& totals, Index r,
                                  bool include_intercept) {
  const Index p = sample.aux_rows().cols();
  check_r_range(r, p, "epc_calibration");
  Matrix loadings(p, 0);
  if (r > 0) {
    const SymmetricSpectrum spectrum = symmetric_eig(weighted_covariance(sample));
    loadings = estimated_principal_components(sample, spectrum, r, totals.aux_totals).loadings;
  }
  AuxBasis basis = linear_basis(sample, totals, intercept_map(loadings, include_intercept),
                                include_intercept, BasisKind::Epc, "epc(" + std::to_string(r) + ")");
  auto res = greg_estimate(sample, basis, sample.outcome_rows(), &totals);
  res.diagnostics.effective_r = r;
  return res;
}

namespace {

struct PartialSplit {
  Matrix exact_select;     // P x p1' on the (optionally intercept-extended) vector
  Matrix residual_select;  // P x p2
};

PartialSplit split_columns(Index p, const std::vector<Index>& exact_columns, bool affine) {
  std::vector<bool> chosen(static_cast<std::size_t>(p), false);
  for (Index c : exact_columns) {
    if (c < 0 || c >= p) throw std::invalid_argument("exact column index out of range");
    if (chosen[static_cast<std::size_t>(c)]) throw std::invalid_argument("duplicate exact column index");
    chosen[static_cast<std::size_t>(c)] = true;
  }
  const Index lead = affine ? 1 : 0;
  const Index p1 = static_cast<Index>(exact_columns.size());
  PartialSplit split;
  split.exact_select = Matrix::Zero(p + lead, p1 + lead);
  split.residual_select = Matrix::Zero(p + lead, p - p1);
  if (affine) split.exact_select(0, 0) = 1.0;
  for (Index j = 0; j < p1; ++j) split.exact_select(exact_columns[static_cast<std::size_t>(j)] + lead, j + lead) = 1.0;
  Index col = 0;
  for (Index c = 0; c < p; ++c)
    if (!chosen[static_cast<std::size_t>(c)]) split.residual_select(c + lead, col++) = 1.0;
  return split;
}

// Rows `rows` with unit weights `weights`; population=true uses N^{-1} A^T A,
// otherwise the design-weighted covariance of the projected rows.
CalibrationResult partial_impl(const SampleData& sample, const KnownTotals& totals,
                               const Matrix& rows, const Vector& weights, bool population,
                               const std::vector<Index>& exact_columns, Index r,
                               bool include_intercept) {
  const Index p = sample.aux_rows().cols();
  const PartialSplit split = split_columns(p, exact_columns, include_intercept);
  const Index p2 = split.residual_select.cols();
  check_r_range(r, p2, "partial_pc_calibration");

  const Matrix ext = extended_rows(rows, include_intercept);
  const Matrix x1 = ext * split.exact_select;
  const Matrix x2 = ext * split.residual_select;

  Matrix proj_coef = Matrix::Zero(x1.cols(), p2);
  if (x1.cols() > 0 && p2 > 0) {
    Matrix g1 = x1.transpose() * weights.asDiagonal() * x1;
    g1 = (g1 + g1.transpose()) / 2.0;
    const SpdSolver solver(g1, "exact-calibration block Gram matrix");
    proj_coef = solver.solve(x1.transpose() * weights.asDiagonal() * x2);
  }

  Matrix loadings(p2, 0);
  if (r > 0) {
    const Matrix resid = x2 - x1 * proj_coef;
    const Matrix cov = population ? Matrix(resid.transpose() * resid / static_cast<double>(rows.rows()))
                                  : weighted_covariance(resid, weights);
    const double scale = population ? x2.squaredNorm() / static_cast<double>(rows.rows())
                                    : weighted_covariance(x2, weights).trace();
    const SymmetricSpectrum spectrum = symmetric_eig((cov + cov.transpose()) / 2.0);
    Index kept = 0;
    while (kept < r && spectrum.eigenvalues(kept) > kNullComponentTolerance * std::max(scale, 1e-300))
      ++kept;
    loadings = spectrum.leading(kept);
  }

  Matrix map(split.exact_select.rows(), split.exact_select.cols() + loadings.cols());
  map.leftCols(split.exact_select.cols()) = split.exact_select;
  map.rightCols(loadings.cols()) =
      split.residual_select * loadings - split.exact_select * proj_coef * loadings;

  const BasisKind kind = population ? BasisKind::PartialPc : BasisKind::PartialEpc;
  const Index kept = loadings.cols();
  AuxBasis basis = linear_basis(sample, totals, std::move(map), include_intercept, kind,
                                to_string(kind) + "(" + std::to_string(exact_columns.size()) + "," +
                                    std::to_string(r) + ")");
  auto res = greg_estimate(sample, basis, sample.outcome_rows(), &totals);
  res.diagnostics.effective_r = kept;
  return res;
}

}  // namespace

CalibrationResult partial_pc_calibration(const SampleData& sample, const PopulationFrame& frame,
                                         const std::vector<Index>& exact_columns, Index r,
                                         bool estimated, bool include_intercept) {
  if (estimated) return partial_epc_calibration(sample, known_totals(frame), exact_columns, r, include_intercept);
  if (!frame.centered()) throw std::invalid_argument("partial calibration needs a centered frame");
  if (frame.aux_dim() != sample.aux_rows().cols()) throw std::invalid_argument("frame and sample disagree on p");
  return partial_impl(sample, known_totals(frame), frame.aux(), Vector::Ones(frame.size()), true,
                      exact_columns, r, include_intercept);
}

CalibrationResult partial_epc_calibration(const SampleData& sample, const KnownTotals& totals,
                                          const std::vector<Index>& exact_columns, Index r,
                                          bool include_intercept) {
  return partial_impl(sample, totals, sample.aux_rows(), sample.design_weights(), false,
                      exact_columns, r, include_intercept);
}

RidgeSpec RidgeSpec::uniform(double lambda, Index m) {
  return RidgeSpec{lambda, Vector::Ones(m), std::vector<bool>(static_cast<std::size_t>(m), false)};
}

void RidgeSpec::validate(Index m) const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("ridge lambda must be finite and >= 0");
  if (costs.size() != m) throw std::invalid_argument("ridge costs length does not match the basis");
  if (!hard.empty() && static_cast<Index>(hard.size()) != m)
    throw std::invalid_argument("ridge hard-constraint mask length does not match the basis");
  for (Index j = 0; j < m; ++j) {
    const bool is_hard = !hard.empty() && hard[static_cast<std::size_t>(j)];
    if (!is_hard && !(costs(j) > 0.0)) throw std::invalid_argument("ridge costs must be positive");
  }
}

namespace {

// Blocks: hard rows keep the bare Gram entries (their multipliers are
// unconstrained), soft rows add lambda / c_j on the diagonal.
Matrix ridge_system(const Matrix& g, const RidgeSpec& spec) {
  Matrix system = g;
  for (Index j = 0; j < g.rows(); ++j) {
    const bool is_hard = !spec.hard.empty() && spec.hard[static_cast<std::size_t>(j)];
    if (!is_hard) system(j, j) += spec.lambda / spec.costs(j);
  }
  return system;
}

}  // namespace

Vector ridge_weights(const SampleData& sample, const AuxBasis& basis, const RidgeSpec& spec) {
  check_basis(sample, basis);
  spec.validate(basis.dim());
  const Vector& d = sample.design_weights();
  if (basis.dim() == 0) return d;
  const Matrix& b = basis.sample_matrix;
  const SpdSolver solver(ridge_system(gram(sample, b), spec), "penalized calibration matrix");
  const Vector mu = solver.solve(b.transpose() * d - basis.totals);
  return d.array() - d.array() * (b * mu).array();
}

CalibrationResult ridge_calibration(const SampleData& sample, const AuxBasis& basis,
                                    const RidgeSpec& spec, const Matrix& outcomes,
                                    const KnownTotals* originals) {
  check_basis(sample, basis);
  check_outcomes(sample, outcomes);
  spec.validate(basis.dim());
  const Vector& d = sample.design_weights();
  const Matrix& b = basis.sample_matrix;
  if (basis.dim() == 0)
    return assemble(sample, basis, outcomes, d, Matrix(0, outcomes.cols()), Vector(0), 1.0, originals);
  const SpdSolver solver(ridge_system(gram(sample, b), spec), "penalized calibration matrix");
  const Vector correction = b.transpose() * d - basis.totals;
  Vector w = d.array() - d.array() * (b * solver.solve(correction)).array();
  Matrix beta = solver.solve(b.transpose() * d.asDiagonal() * outcomes);
  auto res = assemble(sample, basis, outcomes, std::move(w), std::move(beta), correction,
                      solver.condition(), originals);
  double hard_sq = 0.0;
  for (Index j = 0; j < basis.dim(); ++j)
    if (!spec.hard.empty() && spec.hard[static_cast<std::size_t>(j)])
      hard_sq += res.constraint_residual(j) * res.constraint_residual(j);
  res.diagnostics.constraint_residual_norm = std::sqrt(hard_sq);
  return res;
}

Vector residual_variance_estimate(const SampleData& sample, const InclusionProbs& probs,
                                  const Matrix& outcomes, const Matrix& coefficient,
                                  const Matrix& aux) {
  check_outcomes(sample, outcomes);
  if (aux.rows() != sample.size() || aux.cols() != coefficient.rows() ||
      coefficient.cols() != outcomes.cols())
    throw std::invalid_argument("residual_variance_estimate: dimension mismatch");
  const Matrix residuals = outcomes - aux * coefficient;
  Vector out(outcomes.cols());
  for (Index j = 0; j < outcomes.cols(); ++j)
    out(j) = ht_variance_estimator(sample, probs, residuals.col(j));
  return out;
}

}  // namespace surveycalib
