#include "surveycalib/core.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace surveycalib {

namespace {

std::vector<std::string> default_names(const char* prefix, Index count) {
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(count));
  for (Index j = 0; j < count; ++j) names.push_back(prefix + std::to_string(j + 1));
  return names;
}

}  // namespace

PopulationFrame::PopulationFrame(Matrix aux, Matrix outcomes,
                                 std::vector<std::string> aux_names,
                                 std::vector<std::string> outcome_names)
    : aux_(std::move(aux)),
      outcomes_(std::move(outcomes)),
      aux_names_(std::move(aux_names)),
      outcome_names_(std::move(outcome_names)) {
  if (aux_.rows() < 2) throw std::invalid_argument("population needs at least 2 units");
  if (aux_.cols() < 1) throw std::invalid_argument("population needs at least 1 auxiliary variable");
  if (outcomes_.cols() < 1) throw std::invalid_argument("population needs at least 1 outcome");
  if (outcomes_.rows() != aux_.rows())
    throw std::invalid_argument("auxiliary and outcome matrices have different row counts");
  if (!aux_.allFinite() || !outcomes_.allFinite())
    throw std::invalid_argument("population contains non-finite values");
  if (aux_names_.empty()) aux_names_ = default_names("x", aux_.cols());
  if (outcome_names_.empty()) outcome_names_ = default_names("y", outcomes_.cols());
  if (static_cast<Index>(aux_names_.size()) != aux_.cols() ||
      static_cast<Index>(outcome_names_.size()) != outcomes_.cols())
    throw std::invalid_argument("column name count does not match matrix width");
  aux_totals_ = aux_.colwise().sum().transpose();
  column_means_ = Vector::Zero(aux_.cols());
}

Vector PopulationFrame::original_aux_totals() const {
  return aux_totals_ + static_cast<double>(size()) * column_means_;
}

KnownTotals known_totals(const PopulationFrame& frame) {
  return KnownTotals{frame.aux_totals(), frame.size()};
}

SampleData::SampleData(std::vector<Index> indices, Vector design_weights, Matrix aux_rows,
                       Matrix outcome_rows)
    : indices_(std::move(indices)),
      design_weights_(std::move(design_weights)),
      aux_rows_(std::move(aux_rows)),
      outcome_rows_(std::move(outcome_rows)) {
  const auto n = static_cast<Index>(indices_.size());
  if (n < 1) throw std::invalid_argument("sample must contain at least one unit");
  for (std::size_t i = 0; i < indices_.size(); ++i) {
    if (indices_[i] < 0) throw std::invalid_argument("negative unit index in sample");
    if (i > 0 && indices_[i] <= indices_[i - 1])
      throw std::invalid_argument("sample indices must be strictly increasing");
  }
  if (design_weights_.size() != n || aux_rows_.rows() != n || outcome_rows_.rows() != n)
    throw std::invalid_argument("sample arrays disagree on the sample size");
  for (Index k = 0; k < n; ++k) {
    const double d = design_weights_(k);
    if (!(d > 0.0) || !std::isfinite(d))
      throw std::invalid_argument("design weights must be strictly positive and finite");
  }
}

SampleData SampleData::from_frame(const PopulationFrame& frame, std::vector<Index> indices,
                                  Vector design_weights) {
  const auto n = static_cast<Index>(indices.size());
  Matrix aux(n, frame.aux_dim());
  Matrix out(n, frame.outcome_dim());
  for (Index i = 0; i < n; ++i) {
    const Index k = indices[static_cast<std::size_t>(i)];
    if (k < 0 || k >= frame.size()) throw std::invalid_argument("sample index outside population");
    aux.row(i) = frame.aux().row(k);
    out.row(i) = frame.outcomes().row(k);
  }
  return SampleData(std::move(indices), std::move(design_weights), std::move(aux), std::move(out));
}

PopulationFrame center_columns(const PopulationFrame& frame) {
  if (frame.centered()) return frame;
  PopulationFrame out;
  const Vector means = frame.aux().colwise().mean().transpose();
  out.aux_ = frame.aux().rowwise() - means.transpose();
  out.outcomes_ = frame.outcomes();
  out.aux_totals_ = Vector::Zero(frame.aux_dim());
  out.column_means_ = frame.column_means() + means;
  out.centered_ = true;
  out.aux_names_ = frame.aux_names();
  out.outcome_names_ = frame.outcome_names();
  return out;
}

Vector population_totals(const PopulationFrame& frame) {
  return frame.aux().colwise().sum().transpose();
}

Matrix with_intercept(const Matrix& rows) {
  Matrix out(rows.rows(), rows.cols() + 1);
  out.col(0).setOnes();
  out.rightCols(rows.cols()) = rows;
  return out;
}

}  // namespace surveycalib
