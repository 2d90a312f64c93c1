#include "support.hpp"

#include "surveycalib/errors.hpp"
#include "surveycalib/spectrum.hpp"

#include <doctest.h>

using namespace surveycalib;
using testsupport::Gen;

namespace {

void check_sign_convention(const Matrix& v) {
  for (Index j = 0; j < v.cols(); ++j) {
    Index arg = 0;
    v.col(j).cwiseAbs().maxCoeff(&arg);
    CHECK(v(arg, j) > 0.0);
  }
}

}  // namespace

TEST_CASE("closed-form spectra") {
  SUBCASE("diagonal") {
    Matrix m(2, 2);
    m << 2, 0, 0, 1;
    const auto s = symmetric_eig(m);
    CHECK(s.eigenvalues(0) == 2.0);
    CHECK(s.eigenvalues(1) == 1.0);
    CHECK(s.eigenvectors.isApprox(Matrix::Identity(2, 2)));
  }
  SUBCASE("rank one") {
    Matrix m(2, 2);
    m << 1, 1, 1, 1;
    const auto s = symmetric_eig(m);
    CHECK(s.eigenvalues(0) == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(s.eigenvalues(1) == 0.0);
    CHECK(s.eigenvectors(0, 0) == doctest::Approx(1.0 / std::sqrt(2.0)));
    CHECK(s.eigenvectors(1, 0) == doctest::Approx(1.0 / std::sqrt(2.0)));
  }
  SUBCASE("ties flag near-degeneracy") {
    const auto s = symmetric_eig(Matrix::Identity(3, 3));
    CHECK(s.any_near_degenerate());
    CHECK(s.near_degenerate[0]);
  }
  SUBCASE("asymmetric input rejected") {
    Matrix m(2, 2);
    m << 1, 2, 0, 1;
    CHECK_THROWS_AS(symmetric_eig(m), std::invalid_argument);
  }
}

TEST_CASE("Jacobi agrees with an independent symmetric solver") {
  Gen g(3);
  for (int rep = 0; rep < 60; ++rep) {
    const Index p = g.integer(1, 25);
    const Matrix m = g.symmetric(p);
    const auto s = symmetric_eig(m);
    Eigen::SelfAdjointEigenSolver<Matrix> ref(m);
    const Vector ref_values = ref.eigenvalues().reverse();
    const double scale = std::max(1.0, m.norm());
    for (Index j = 0; j < p; ++j) {
      // clamping only touches values in [-1e-10, 0)
      const double expected = (ref_values(j) < 0.0 && ref_values(j) >= -1e-10) ? 0.0 : ref_values(j);
      CHECK(std::abs(s.eigenvalues(j) - expected) <= 1e-10 * scale);
    }
    // eigenvectors agree up to sign where the eigenvalue is well separated
    for (Index j = 0; j < p; ++j) {
      const double gap_lo = j > 0 ? ref_values(j - 1) - ref_values(j) : 1e300;
      const double gap_hi = j + 1 < p ? ref_values(j) - ref_values(j + 1) : 1e300;
      if (std::min(gap_lo, gap_hi) < 1e-3 * scale) continue;
      const Vector other = ref.eigenvectors().col(p - 1 - j);
      CHECK(std::abs(std::abs(s.eigenvectors.col(j).dot(other)) - 1.0) <= 1e-9);
    }
  }
}

TEST_CASE("spectrum invariants on random symmetric matrices") {
  Gen g(5);
  for (int rep = 0; rep < 80; ++rep) {
    const Index p = g.integer(1, 30);
    const Matrix m = g.symmetric(p);
    const auto s = symmetric_eig(m);
    const Matrix& v = s.eigenvectors;
    CHECK(testsupport::max_abs(v.transpose() * v - Matrix::Identity(p, p)) <= 1e-10);
    const Matrix rebuilt = v * s.eigenvalues.asDiagonal() * v.transpose();
    CHECK((rebuilt - m).norm() <= 1e-9 * std::max(1e-300, m.norm()));
    CHECK(std::abs(s.eigenvalues.sum() - m.trace()) <= 1e-9 * std::max(1.0, m.norm()));
    for (Index j = 1; j < p; ++j) CHECK(s.eigenvalues(j - 1) >= s.eigenvalues(j));
    check_sign_convention(v);
    // bitwise reproducible
    const auto again = symmetric_eig(m);
    CHECK(again.eigenvalues == s.eigenvalues);
    CHECK(again.eigenvectors == s.eigenvectors);
  }
}

TEST_CASE("round-off negatives on a covariance are clamped") {
  Matrix x(3, 3);
  x << 1, 2, 3, 2, 4, 6, -3, -6, -9;  // rank one
  const Matrix m = x.transpose() * x;
  const auto s = symmetric_eig(m);
  for (Index j = 0; j < 3; ++j) CHECK(s.eigenvalues(j) >= 0.0);
}

TEST_CASE("population covariance") {
  Matrix x(2, 1);
  x << -1, 1;
  const PopulationFrame f = center_columns(PopulationFrame(x, Matrix::Zero(2, 1)));
  CHECK(population_covariance(f)(0, 0) == 1.0);
  CHECK_THROWS_AS(population_covariance(PopulationFrame(x, Matrix::Zero(2, 1))), std::invalid_argument);

  Matrix dup(4, 2);
  dup << 1, 1, 2, 2, 3, 3, 5, 5;
  const Matrix c = population_covariance(center_columns(PopulationFrame(dup, Matrix::Zero(4, 1))));
  CHECK(std::abs(c.determinant()) <= 1e-12);

  const PopulationFrame g4 = center_columns(PopulationFrame(
      (Matrix(4, 1) << -1.5, -0.5, 0.5, 1.5).finished(), Matrix::Zero(4, 1)));
  CHECK(symmetric_eig(population_covariance(g4)).eigenvalues(0) == doctest::Approx(1.25).epsilon(1e-15));
}

TEST_CASE("design-weighted covariance") {
  SUBCASE("hand case") {
    const SampleData s({0, 1}, Vector::Constant(2, 2.0), (Matrix(2, 1) << -1, 1).finished(), Matrix::Zero(2, 1));
    CHECK(weighted_covariance(s)(0, 0) == doctest::Approx(1.0));
  }
  SUBCASE("constant rows give zero") {
    const SampleData s({0, 1, 2}, (Vector(3) << 1, 2, 3).finished(), Matrix::Constant(3, 2, 4.0),
                       Matrix::Zero(3, 1));
    CHECK(testsupport::max_abs(weighted_covariance(s)) <= 1e-12);
  }
  SUBCASE("direct double-loop evaluation") {
    Gen g(8);
    for (int rep = 0; rep < 30; ++rep) {
      const Index n = g.integer(2, 15);
      const Index p = g.integer(1, 5);
      const Matrix rows = g.normal_matrix(n, p);
      Vector d(n);
      for (Index k = 0; k < n; ++k) d(k) = g.uniform(0.5, 4.0);
      double nhat = 0.0;
      Vector mean = Vector::Zero(p);
      for (Index k = 0; k < n; ++k) {
        nhat += d(k);
        mean += d(k) * rows.row(k).transpose();
      }
      mean /= nhat;
      Matrix expected = Matrix::Zero(p, p);
      for (Index k = 0; k < n; ++k) expected += d(k) * rows.row(k).transpose() * rows.row(k);
      expected = expected / nhat - mean * mean.transpose();
      CHECK(testsupport::max_abs(weighted_covariance(rows, d) - expected) <= 1e-12 * (1.0 + testsupport::max_abs(expected)));
    }
  }
  SUBCASE("census with unit weights equals the population covariance") {
    Gen g(9);
    const PopulationFrame f = center_columns(g.frame(20, 4, 1));
    std::vector<Index> all(20);
    std::iota(all.begin(), all.end(), Index{0});
    const SampleData census = SampleData::from_frame(f, all, Vector::Ones(20));
    CHECK(testsupport::max_abs(weighted_covariance(census) - population_covariance(f)) <= 1e-12);
  }
}

TEST_CASE("population principal components") {
  Gen g(12);
  for (int rep = 0; rep < 20; ++rep) {
    const Index N = g.integer(10, 60);
    const Index p = g.integer(1, 6);
    const PopulationFrame f = center_columns(g.frame(N, p, 1));
    const auto s = symmetric_eig(population_covariance(f));
    const PrincipalComponents pcs = principal_components(f, s, p);
    CHECK(pcs.totals == Vector::Zero(p));
    for (Index j = 0; j < p; ++j) {
      CHECK(std::abs(pcs.scores.col(j).sum()) <= 1e-8 * N * std::max(1.0, std::sqrt(s.eigenvalues(0))));
      CHECK(pcs.scores.col(j).squaredNorm() / N == doctest::Approx(s.eigenvalues(j)).epsilon(1e-8));
    }
    const Matrix ztz = pcs.scores.transpose() * pcs.scores / static_cast<double>(N);
    CHECK(testsupport::max_abs(ztz - Matrix(s.eigenvalues.asDiagonal())) <= 1e-9 * std::max(1.0, s.eigenvalues(0)));
  }
  SUBCASE("collinear pair") {
    Vector c(5);
    c << -2, -1, 0, 1, 2;
    Matrix x(5, 2);
    x.col(0) = c;
    x.col(1) = 2.0 * c;
    const PopulationFrame f = center_columns(PopulationFrame(x, Matrix::Zero(5, 1)));
    const auto s = symmetric_eig(population_covariance(f));
    CHECK(s.eigenvalues(1) == doctest::Approx(0.0));
    const PrincipalComponents pc = principal_components(f, s, 1);
    CHECK((pc.scores.col(0) - std::sqrt(5.0) * c).norm() <= 1e-12);
  }
  SUBCASE("out of range r") {
    const PopulationFrame f = center_columns(g.frame(10, 3, 1));
    const auto s = symmetric_eig(population_covariance(f));
    CHECK_THROWS_AS(principal_components(f, s, 4), std::invalid_argument);
  }
}

TEST_CASE("estimated principal components") {
  Gen g(13);
  const PopulationFrame f = center_columns(g.frame(40, 4, 1));
  SUBCASE("scores are X v-hat and totals vanish on centered frames") {
    const SampleData s = g.srswor(f, 12);
    const auto spec = symmetric_eig(weighted_covariance(s));
    const PrincipalComponents pcs = estimated_principal_components(s, spec, 3, f.aux_totals());
    for (Index k = 0; k < s.size(); ++k)
      for (Index j = 0; j < 3; ++j)
        CHECK(pcs.scores(k, j) == doctest::Approx(s.aux_rows().row(k).dot(spec.eigenvectors.col(j))));
    CHECK(pcs.totals.norm() <= 1e-10);
  }
  SUBCASE("uncentered totals are t_x^T v-hat") {
    const PopulationFrame raw = g.frame(30, 3, 1);
    const SampleData s = g.srswor(raw, 10);
    const auto spec = symmetric_eig(weighted_covariance(s));
    const PrincipalComponents pcs = estimated_principal_components(s, spec, 2, raw.aux_totals());
    for (Index j = 0; j < 2; ++j)
      CHECK(pcs.totals(j) == doctest::Approx(raw.aux_totals().dot(spec.eigenvectors.col(j))));
  }
  SUBCASE("census reproduces the population components") {
    std::vector<Index> all(40);
    std::iota(all.begin(), all.end(), Index{0});
    const SampleData census = SampleData::from_frame(f, all, Vector::Ones(40));
    const auto pop = symmetric_eig(population_covariance(f));
    const auto est = symmetric_eig(weighted_covariance(census));
    const PrincipalComponents a = principal_components(f, pop, 4);
    const PrincipalComponents b = estimated_principal_components(census, est, 4, f.aux_totals());
    CHECK(testsupport::max_abs(a.scores.cwiseAbs() - b.scores.cwiseAbs()) <= 1e-9);
  }
  SUBCASE("vanishing retained eigenvalue") {
    // n = 2 sample gives a rank-one covariance
    const SampleData s = g.srswor(f, 2);
    const auto spec = symmetric_eig(weighted_covariance(s));
    CHECK_THROWS_AS(estimated_principal_components(s, spec, 2, f.aux_totals()), NumericalError);
  }
}
