#include "support.hpp"

#include "surveycalib/io.hpp"
#include "surveycalib/simulate.hpp"

#include <doctest.h>

#include <sstream>

using namespace surveycalib;
using testsupport::Gen;

namespace {

DesignSpec design(Index N, Index n, std::uint64_t seed) {
  DesignSpec d;
  d.population_size = N;
  d.sample_size = n;
  d.seed = seed;
  return d;
}

std::vector<EstimatorSpec> bank(std::initializer_list<const char*> ids) {
  std::vector<EstimatorSpec> out;
  for (const char* id : ids) out.push_back(parse_estimator_id(id));
  return out;
}

}  // namespace

TEST_CASE("relative MSE and quantiles") {
  const Vector ref = (Vector(3) << 9, 11, 12).finished();
  CHECK(relative_mse(ref, ref, 10.0) == 1.0);
  CHECK(relative_mse(Vector::Constant(3, 10.0), ref, 10.0) == 0.0);
  const Vector doubled = (Vector(3) << 8, 12, 14).finished();
  CHECK(relative_mse(doubled, ref, 10.0) == doctest::Approx(4.0));
  CHECK(std::isnan(relative_mse(ref, Vector::Constant(3, 10.0), 10.0)));

  CHECK(quantile({1, 2, 3, 4}, 0.5) == 2.5);
  CHECK(quantile({1, 2, 3, 4}, 0.25) == 1.75);
  CHECK(quantile({5}, 0.75) == 5.0);
  CHECK(std::isnan(quantile({}, 0.5)));
}

TEST_CASE("estimator ids") {
  for (const char* id : {"HT", "full", "pc(5)", "epc(3)", "pc2(2)", "ppc(4,5)", "ppc-est(4,5)", "ridge(0.5)",
                         "ridge(auto)", "pc(auto)", "epc(auto)", "pc(3)[no-intercept]"})
    CHECK(parse_estimator_id(id).id() == id);
  CHECK(parse_estimator_id("ppc(4, 5)").p1 == 4);
  CHECK_FALSE(parse_estimator_id("ridge(auto)").lambda.has_value());
  CHECK_THROWS_AS(parse_estimator_id("pca(3)"), std::invalid_argument);
  CHECK_THROWS_AS(parse_estimator_id("pc(x)"), std::invalid_argument);
  CHECK_THROWS_AS(parse_estimator_id("ppc(3)"), std::invalid_argument);

  CHECK_THROWS_WITH_AS(parse_estimator_id("pc(7)").validate(6, 50), doctest::Contains("'r'"), std::invalid_argument);
  CHECK_THROWS_AS(parse_estimator_id("ppc(4,3)").validate(6, 50), std::invalid_argument);
  CHECK_THROWS_AS(parse_estimator_id("pc2(3)").validate(6, 7), std::invalid_argument);
  CHECK_NOTHROW(parse_estimator_id("pc(6)").validate(6, 50));
}

TEST_CASE("synthetic population") {
  SyntheticPopSpec spec;
  spec.units = 300;
  spec.slots_per_day = 12;
  const PopulationFrame a = synthetic_load_population(spec);
  const PopulationFrame b = synthetic_load_population(spec);
  CHECK(a.aux() == b.aux());
  CHECK(a.outcomes() == b.outcomes());
  CHECK(a.aux_dim() == 24);
  CHECK(a.outcome_dim() == 7);
  CHECK(a.aux().minCoeff() >= 0.0);
  CHECK(a.outcomes().minCoeff() >= 0.0);
  spec.seed += 1;
  CHECK(synthetic_load_population(spec).aux() != a.aux());

  SUBCASE("flat curves without noise or harmonics") {
    SyntheticPopSpec flat = spec;
    flat.noise_sd = 0.0;
    flat.harmonics = 0;
    const PopulationFrame f = synthetic_load_population(flat);
    for (Index k = 0; k < f.size(); ++k)
      CHECK(f.aux().row(k).maxCoeff() == f.aux().row(k).minCoeff());
    const auto s = symmetric_eig(population_covariance(center_columns(f)));
    CHECK(s.eigenvalues(1) <= 1e-10 * s.eigenvalues(0));
  }
  SUBCASE("defaults have a dominant first component") {
    const PopulationFrame f = synthetic_load_population(SyntheticPopSpec{});
    CHECK(f.aux_dim() == 96);
    const auto s = symmetric_eig(population_covariance(center_columns(f)));
    const double share = s.eigenvalues(0) / s.eigenvalues.sum();
    CHECK(share >= 0.5);
    CHECK(share <= 0.95);
  }
  SUBCASE("invalid specs") {
    SyntheticPopSpec bad;
    bad.cross_week_correlation = 1.5;
    CHECK_THROWS_AS(synthetic_load_population(bad), std::invalid_argument);
    bad = SyntheticPopSpec{};
    bad.future_days = 8;
    CHECK_THROWS_AS(synthetic_load_population(bad), std::invalid_argument);
  }
}

TEST_CASE("Monte Carlo harness") {
  Gen g(107);
  const PopulationFrame f = g.frame(200, 12, 2);

  SUBCASE("HT against itself") {
    const auto report = run_monte_carlo(f, design(200, 40, 1), bank({"HT"}), 20, "HT");
    for (const auto& row : report.rows) CHECK(row.relative_mse == 1.0);
  }
  SUBCASE("census makes every estimator exact") {
    const auto report = run_monte_carlo(f, design(200, 200, 1), bank({"HT", "full", "pc(3)"}), 3, "full");
    for (const auto& row : report.rows) {
      CHECK(std::isnan(row.relative_mse));
      CHECK(row.mse <= 1e-12 * report.true_totals.squaredNorm());
    }
  }
  SUBCASE("principal components beat Horvitz-Thompson on a linear population") {
    const auto report = run_monte_carlo(f, design(200, 40, 3), bank({"HT", "full", "pc(1)", "pc(3)", "pc(6)"}),
                                        200, "full");
    bool better = false;
    for (const char* id : {"pc(1)", "pc(3)", "pc(6)"})
      if (report.row(id, 0).relative_mse < report.row("HT", 0).relative_mse) better = true;
    CHECK(better);
    CHECK(report.row("full", 0).relative_mse == 1.0);
  }
  SUBCASE("aggregates match the retained records") {
    MonteCarloOptions opts;
    opts.keep_records = true;
    const auto report = run_monte_carlo(f, design(200, 30, 5), bank({"HT", "full", "pc(2)", "ridge(auto)"}), 25,
                                        "full", opts);
    REQUIRE(report.records.size() == 4);
    for (std::size_t e = 0; e < 4; ++e) {
      for (Index j = 0; j < 2; ++j) {
        const auto& row = report.row(report.estimators[e], j);
        Vector est(25), ref(25);
        double cv = 0.0;
        for (std::size_t i = 0; i < 25; ++i) {
          est(static_cast<Index>(i)) = report.records[e][i].estimates(j);
          ref(static_cast<Index>(i)) = report.records[1][i].estimates(j);
          cv += report.records[e][i].cv_weight;
        }
        CHECK(row.relative_mse == doctest::Approx(relative_mse(est, ref, report.true_totals(j))).epsilon(1e-12));
        CHECK(row.mean_cv == doctest::Approx(cv / 25.0).epsilon(1e-12));
        CHECK(row.mean_positive_fraction >= 0.0);
        CHECK(row.mean_positive_fraction <= 1.0);
      }
    }
    CHECK(report.row("ridge(auto)", 0).mean_selected > 0.0);
  }
  SUBCASE("relative MSE is unchanged by rescaling the outcomes") {
    const PopulationFrame scaled(f.aux(), f.outcomes() * 7.5);
    const auto ids = bank({"HT", "full", "pc(2)", "epc(2)", "pc2(1)", "ppc(3,2)", "ridge(3.0)"});
    const auto a = run_monte_carlo(f, design(200, 30, 9), ids, 30, "full");
    const auto b = run_monte_carlo(scaled, design(200, 30, 9), ids, 30, "full");
    for (std::size_t i = 0; i < a.rows.size(); ++i)
      CHECK(a.rows[i].relative_mse == doctest::Approx(b.rows[i].relative_mse).epsilon(1e-9));
  }
  SUBCASE("thread count does not change the report") {
    const auto ids = bank({"HT", "full", "pc(2)", "pc(auto)", "ridge(auto)"});
    MonteCarloOptions one, four;
    four.threads = 4;
    const auto a = run_monte_carlo(f, design(200, 30, 11), ids, 16, "full", one);
    const auto b = run_monte_carlo(f, design(200, 30, 11), ids, 16, "full", four);
    CHECK(report_csv(a) == report_csv(b));
    CHECK(manifest_json(a, "") == manifest_json(b, ""));
  }
  SUBCASE("failures are counted, not imputed") {
    // duplicated auxiliary column makes full calibration singular
    Matrix x(200, 3);
    x << f.aux().leftCols(2), f.aux().col(0);
    const PopulationFrame dup(x, f.outcomes());
    const auto report = run_monte_carlo(dup, design(200, 30, 2), bank({"HT", "full", "pc(2)"}), 10, "HT");
    CHECK(report.row("full", 0).failures == 10);
    CHECK(report.row("full", 0).replicates_used == 0);
    CHECK(std::isnan(report.row("full", 0).relative_mse));
    CHECK(report.row("pc(2)", 0).failures == 0);
  }
  SUBCASE("bank checks") {
    CHECK_THROWS_AS(run_monte_carlo(f, design(200, 30, 1), bank({"HT"}), 10, "full"), std::invalid_argument);
    CHECK_THROWS_AS(run_monte_carlo(f, design(200, 30, 1), bank({"HT", "HT"}), 10, "HT"), std::invalid_argument);
    CHECK_THROWS_AS(run_monte_carlo(f, design(200, 30, 1), bank({"HT"}), 1, "HT"), std::invalid_argument);
    CHECK_THROWS_AS(run_monte_carlo(f, design(100, 30, 1), bank({"HT"}), 10, "HT"), std::invalid_argument);
  }
}

TEST_CASE("report formats") {
  Gen g(109);
  const PopulationFrame f = g.frame(50, 3, 1);
  MonteCarloOptions opts;
  opts.keep_records = true;
  const auto report = run_monte_carlo(f, design(50, 10, 1), bank({"HT", "full"}), 5, "full", opts);
  std::istringstream csv(report_csv(report));
  std::string header;
  std::getline(csv, header);
  CHECK(header.rfind("estimator,outcome,relative_mse,", 0) == 0);
  int lines = 0;
  for (std::string line; std::getline(csv, line);) ++lines;
  CHECK(lines == 2);
  std::istringstream per(records_csv(report));
  lines = 0;
  for (std::string line; std::getline(per, line);) ++lines;
  CHECK(lines == 1 + 2 * 5);
  CHECK(manifest_json(report, "{\"a\":1}").find("\"config\"") != std::string::npos);
}
