#pragma once

#include "surveycalib/core.hpp"
#include "surveycalib/design.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

namespace testsupport {

using surveycalib::Index;
using surveycalib::Matrix;
using surveycalib::Vector;

// Fixture generator for property tests. Independent of the library RNG.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : eng_(seed) {}

  double normal() { return std::normal_distribution<double>(0.0, 1.0)(eng_); }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(eng_); }
  Index integer(Index lo, Index hi) { return std::uniform_int_distribution<Index>(lo, hi)(eng_); }

  Matrix normal_matrix(Index rows, Index cols) {
    Matrix m(rows, cols);
    for (Index j = 0; j < cols; ++j)
      for (Index i = 0; i < rows; ++i) m(i, j) = normal();
    return m;
  }

  Matrix symmetric(Index p) {
    Matrix a = normal_matrix(p, p);
    return (a + a.transpose()) / 2.0;
  }

  // Correlated auxiliaries plus outcomes that depend on them linearly with noise.
  surveycalib::PopulationFrame frame(Index N, Index p, Index q) {
    Matrix mix = normal_matrix(p, p);
    Matrix x = normal_matrix(N, p) * mix;
    for (Index j = 0; j < p; ++j) x.col(j).array() += uniform(-3.0, 3.0);
    Matrix beta = normal_matrix(p, q);
    Matrix y = x * beta + 0.5 * normal_matrix(N, q);
    y.array() += 10.0;
    return surveycalib::PopulationFrame(x, y);
  }

  std::vector<Index> subset(Index N, Index n) {
    std::vector<Index> all(static_cast<std::size_t>(N));
    std::iota(all.begin(), all.end(), Index{0});
    std::shuffle(all.begin(), all.end(), eng_);
    all.resize(static_cast<std::size_t>(n));
    std::sort(all.begin(), all.end());
    return all;
  }

  surveycalib::SampleData srswor(const surveycalib::PopulationFrame& frame, Index n) {
    const double d = static_cast<double>(frame.size()) / static_cast<double>(n);
    return surveycalib::SampleData::from_frame(frame, subset(frame.size(), n), Vector::Constant(n, d));
  }

  std::mt19937_64& engine() { return eng_; }

 private:
  std::mt19937_64 eng_;
};

// Minimizer of sum (w - d)^2 / (2 d) subject to B^T w = t, from the full KKT
// system [D^{-1} B; B^T 0] [w; mu] = [1; t].
inline Vector kkt_calibration(const Matrix& B, const Vector& d, const Vector& t) {
  const Index n = B.rows();
  const Index m = B.cols();
  Matrix K = Matrix::Zero(n + m, n + m);
  K.topLeftCorner(n, n) = d.cwiseInverse().asDiagonal();
  K.topRightCorner(n, m) = B;
  K.bottomLeftCorner(m, n) = B.transpose();
  Vector rhs(n + m);
  rhs.head(n).setOnes();
  rhs.tail(m) = t;
  return Eigen::FullPivLU<Matrix>(K).solve(rhs).head(n);
}

inline double phi(const Vector& w, const Vector& d) { return ((w - d).array().square() / d.array()).sum(); }

inline double rel_diff(double a, double b) { return std::abs(a - b) / std::max(1.0, std::max(std::abs(a), std::abs(b))); }

inline double max_abs(const Matrix& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace testsupport
