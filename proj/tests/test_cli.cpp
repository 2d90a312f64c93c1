#include "support.hpp"

#include "surveycalib/cli.hpp"
#include "surveycalib/config.hpp"
#include "surveycalib/errors.hpp"
#include "surveycalib/io.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace surveycalib;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "surveycalib");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("surveycalib_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

// numeric cell of a CSV whose first column is a label
double cell(const fs::path& p, int row, int col) {
  std::ifstream in(p);
  std::string line;
  for (int i = 0; i <= row; ++i) std::getline(in, line);
  std::getline(in, line);
  std::istringstream fields(line);
  std::string field;
  for (int j = 0; j <= col; ++j) std::getline(fields, field, ',');
  return std::stod(field);
}

const char* kFixture = "x,y\n-1.5,1\n-0.5,2\n0.5,3\n1.5,4\n";

}  // namespace

TEST_CASE("config parsing") {
  SUBCASE("minimal config gets defaults") {
    const RunConfig c = parse_config_text(R"({"population": {"synthetic": {"units": 100, "slots_per_day": 4}}})");
    REQUIRE(c.synthetic);
    CHECK(c.synthetic->units == 100);
    CHECK(c.synthetic->past_days == 2);
    CHECK(c.reference == "full");
    CHECK(c.replicates == 1000);
    CHECK(c.estimators.size() == 2);
    CHECK(c.aux_dim == 8);
    CHECK_FALSE(c.per_replicate);
  }
  SUBCASE("r larger than p names the field") {
    try {
      parse_config_text(R"({"population": {"synthetic": {"slots_per_day": 4}},
                            "estimators": ["HT", "full", {"variant": "pc", "r": 9}]})");
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      REQUIRE(e.violations().size() == 1);
      CHECK(e.violations()[0].find("estimators[2]") != std::string::npos);
      CHECK(e.violations()[0].find("'r'") != std::string::npos);
    }
  }
  SUBCASE("csv and synthetic together are ambiguous") {
    CHECK_THROWS_WITH_AS(parse_config_text(R"({"population": {"csv_path": "a.csv", "synthetic": {}}})"),
                         doctest::Contains("ambiguous"), ConfigError);
  }
  SUBCASE("every violation is reported") {
    try {
      parse_config_text(R"({"population": {"synthetic": {"units": 1}}, "colour": 3,
                            "design": {"n": "ten"}, "replicates": 1, "output": {"per_replicate": 2}})");
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(e.violations().size() >= 5);
    }
  }
  SUBCASE("estimator objects") {
    const RunConfig c = parse_config_text(R"({"population": {"synthetic": {"slots_per_day": 4}},
        "estimators": [{"variant": "HT"}, {"variant": "pc", "r": "auto", "r_max": 5},
                       {"variant": "ridge", "lambda": 2.5, "intercept": false},
                       {"variant": "ppc", "p1": 2, "r": 3, "estimated": true}],
        "reference": "HT"})");
    REQUIRE(c.estimators.size() == 4);
    CHECK(c.estimators[1].variant == EstimatorVariant::PcAuto);
    CHECK(c.estimators[1].r_max == 5);
    CHECK(c.estimators[2].id() == "ridge(2.5)[no-intercept]");
    CHECK(c.estimators[3].id() == "ppc-est(2,3)");
  }
  SUBCASE("reference must be in the bank") {
    CHECK_THROWS_AS(parse_config_text(R"({"population": {"synthetic": {}}, "estimators": ["HT"]})"), ConfigError);
  }
  SUBCASE("missing file") { CHECK_THROWS_AS(parse_config("/nonexistent/config.json"), ConfigError); }
}

TEST_CASE("CSV round trip") {
  SyntheticPopSpec spec;
  spec.units = 50;
  spec.slots_per_day = 6;
  const PopulationFrame f = synthetic_load_population(spec);
  std::stringstream csv;
  write_population_csv(csv, f);
  const CsvTable t = read_csv(csv);
  const PopulationFrame g = frame_from_csv(t, {}, f.outcome_names());
  CHECK(g.aux_names() == f.aux_names());
  CHECK((g.aux() - f.aux()).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(g.outcomes() == f.outcomes());

  std::istringstream ragged("a,b\n1,2\n3\n");
  CHECK_THROWS_WITH_AS(read_csv(ragged), doctest::Contains("line 3"), std::runtime_error);
  std::istringstream text("a,b\n1,x\n");
  CHECK_THROWS_AS(read_csv(text), std::runtime_error);
  std::istringstream dup("a,a\n1,2\n");
  CHECK_THROWS_AS(read_csv(dup), std::runtime_error);
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(std::nan("")) == "nan");
}

TEST_CASE("pca subcommand") {
  const fs::path dir = scratch("pca");
  write(dir / "pop.csv", kFixture);
  const Run r = cli({"pca", "--input", (dir / "pop.csv").string(), "--aux", "x"});
  CHECK(r.code == 0);
  CHECK(r.out == "component,eigenvalue,explained_ratio,cumulative_ratio\n1,1.25,1,1\n");
  const Run s = cli({"pca", "--input", (dir / "pop.csv").string(), "--aux", "x", "--scores",
                     (dir / "scores.csv").string()});
  CHECK(s.code == 0);
  CHECK(slurp(dir / "scores.csv") == "pc1\n-1.5\n-0.5\n0.5\n1.5\n");
}

TEST_CASE("calibrate subcommand") {
  const fs::path dir = scratch("calibrate");
  write(dir / "pop.csv", kFixture);
  write(dir / "units.csv", "unit\n1\n2\n");
  const std::string pop = (dir / "pop.csv").string();

  SUBCASE("hand fixture") {
    const Run r = cli({"calibrate", "--input", pop, "--outcomes", "y", "--sample-indices",
                       (dir / "units.csv").string(), "--method", "pc", "--r", "1", "--no-intercept",
                       "--output-dir", (dir / "out").string()});
    REQUIRE(r.code == 0);
    const CsvTable w = read_csv_file((dir / "out" / "weights.csv").string());
    CHECK(w.values(0, 2) == doctest::Approx(-0.4));
    CHECK(w.values(1, 2) == doctest::Approx(1.2));
    CHECK(cell(dir / "out" / "estimates.csv", 0, 1) == doctest::Approx(2.0));
    CHECK(fs::exists(dir / "out" / "diagnostics.json"));
    CHECK(fs::exists(dir / "out" / "coefficient.csv"));
  }
  SUBCASE("r = 0 is Horvitz-Thompson") {
    const Run r = cli({"calibrate", "--input", pop, "--outcomes", "y", "--n", "2", "--seed", "5", "--r", "0",
                       "--output-dir", (dir / "ht").string()});
    REQUIRE(r.code == 0);
    const CsvTable w = read_csv_file((dir / "ht" / "weights.csv").string());
    CHECK(w.values(0, 2) == 2.0);
    CHECK(w.values(1, 2) == 2.0);
    CHECK(cell(dir / "ht" / "estimates.csv", 0, 1) == cell(dir / "ht" / "estimates.csv", 0, 2));
  }
  SUBCASE("positive-weights selection") {
    const Run r = cli({"calibrate", "--input", pop, "--outcomes", "y", "--sample-indices",
                       (dir / "units.csv").string(), "--select", "r-positive", "--no-intercept", "--r-max", "1",
                       "--output-dir", (dir / "sel").string()});
    REQUIRE(r.code == 0);
    CHECK(slurp(dir / "sel" / "diagnostics.json").find("\"selected\": 0.0") != std::string::npos);
  }
  SUBCASE("singular Gram matrix exits with 2") {
    write(dir / "dup.csv", "a,b,y\n1,2,1\n2,4,2\n3,6,2\n4,8,5\n5,10,1\n");
    const Run r = cli({"calibrate", "--input", (dir / "dup.csv").string(), "--outcomes", "y", "--n", "4",
                       "--method", "full"});
    CHECK(r.code == 2);
    CHECK(r.err.find("numerical failure") != std::string::npos);
  }
  SUBCASE("usage errors exit with 1") {
    CHECK(cli({"calibrate", "--bogus"}).code == 1);
    CHECK(cli({}).code == 1);
    CHECK(cli({"calibrate", "--input", pop, "--outcomes", "y"}).code == 1);
    CHECK(cli({"calibrate", "--input", (dir / "missing.csv").string()}).code == 1);
  }
}

TEST_CASE("select subcommand") {
  const fs::path dir = scratch("select");
  write(dir / "pop.csv", kFixture);
  write(dir / "units.csv", "unit\n1\n2\n");
  const Run r = cli({"select", "--input", (dir / "pop.csv").string(), "--outcomes", "y", "--sample-indices",
                     (dir / "units.csv").string(), "--select", "r-positive", "--r-max", "1", "--no-intercept"});
  REQUIRE(r.code == 0);
  CHECK(r.out == "candidate,min_weight,all_positive,failed,chosen\n0,2,1,0,1\n1,-0.3999999999999999,0,0,0\n");
}

TEST_CASE("generate and simulate subcommands") {
  const fs::path dir = scratch("simulate");
  write(dir / "config.json", R"J({
    "population": {"synthetic": {"units": 150, "slots_per_day": 6, "future_days": 3, "seed": 4}},
    "design": {"n": 30, "seed": 8},
    "estimators": ["HT", "full", "pc(2)", "pc(auto)", "ridge(auto)"],
    "replicates": 12,
    "output": {"dir": "unused", "per_replicate": true}
  })J");
  const std::string config = (dir / "config.json").string();

  const Run g = cli({"generate", "--config", config, "--output", (dir / "pop.csv").string()});
  REQUIRE(g.code == 0);
  const CsvTable t = read_csv_file((dir / "pop.csv").string());
  CHECK(t.values.rows() == 150);
  CHECK(t.header.size() == 12 + 3);
  const Run g2 = cli({"generate", "--config", config, "--units", "20"});
  CHECK(read_csv(*std::make_unique<std::istringstream>(g2.out)).values.rows() == 20);

  const Run a = cli({"simulate", "--config", config, "--output-dir", (dir / "a").string()});
  const Run b = cli({"simulate", "--config", config, "--output-dir", (dir / "b").string(), "--threads", "3"});
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  for (const char* file : {"report.csv", "manifest.json", "per_replicate.csv"}) CHECK(fs::exists(dir / "a" / file));
  CHECK(slurp(dir / "a" / "report.csv") == slurp(dir / "b" / "report.csv"));
  CHECK(slurp(dir / "a" / "per_replicate.csv") == slurp(dir / "b" / "per_replicate.csv"));
  // manifests differ only in the echoed output directory
  std::string ma = slurp(dir / "a" / "manifest.json"), mb = slurp(dir / "b" / "manifest.json");
  ma.replace(ma.find((dir / "a").string()), (dir / "a").string().size(), "X");
  mb.replace(mb.find((dir / "b").string()), (dir / "b").string().size(), "X");
  CHECK(ma == mb);
  const Run c = cli({"simulate", "--config", config, "--output-dir", (dir / "c").string(), "--seed", "9"});
  REQUIRE(c.code == 0);
  CHECK(slurp(dir / "a" / "report.csv") != slurp(dir / "c" / "report.csv"));
  CHECK(slurp(dir / "c" / "manifest.json").find("\"seed\": 9") != std::string::npos);

  CHECK(cli({"simulate"}).code == 1);
  write(dir / "bad.json", R"J({"population": {"synthetic": {}}, "estimators": ["pc(500)", "full"]})J");
  const Run bad = cli({"simulate", "--config", (dir / "bad.json").string()});
  CHECK(bad.code == 1);
  CHECK(bad.err.find("estimators[0]") != std::string::npos);
}

#ifdef SURVEYCALIB_CLI_PATH
TEST_CASE("installed executable") {
  const fs::path dir = scratch("exe");
  write(dir / "pop.csv", kFixture);
  const std::string cmd = std::string(SURVEYCALIB_CLI_PATH) + " pca --input " + (dir / "pop.csv").string() +
                          " --aux x --output " + (dir / "spec.csv").string();
  CHECK(std::system(cmd.c_str()) == 0);
  CHECK(slurp(dir / "spec.csv") == "component,eigenvalue,explained_ratio,cumulative_ratio\n1,1.25,1,1\n");
  const std::string bad = std::string(SURVEYCALIB_CLI_PATH) + " nosuch 2>/dev/null";
  CHECK(WEXITSTATUS(std::system(bad.c_str())) == 1);
}
#endif
