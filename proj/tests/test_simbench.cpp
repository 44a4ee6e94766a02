#include <doctest.h>

#include <map>
#include <numbers>

#include "support.hpp"
#include "tlcqm/csv.hpp"
#include "tlcqm/errors.hpp"
#include "tlcqm/simbench.hpp"

using namespace tlcqm;

namespace {

BenchOptions quick_options(int reps) {
  BenchOptions o;
  SimScenario s;
  s.n0 = 20;
  s.ratio = 2.0;
  s.test_size = 200;
  o.scenarios = {s};
  o.repetitions = reps;
  o.folds = 3;
  o.pipeline.engression.hidden_sizes = {10, 10};
  o.pipeline.engression.epochs = 30;
  o.pipeline.M = 50;
  o.pipeline.M_pred = 8;
  o.pipeline.kmm.max_iter = 200;
  return o;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

}  // namespace

TEST_CASE("theta and scenario sizes") {
  const Eigen::VectorXd theta = SimScenario::theta();
  REQUIRE(theta.size() == 6);
  for (int i = 0; i < 6; ++i) CHECK(theta(i) == doctest::Approx(1.0 / (i + 1)).epsilon(1e-15));
  CHECK(SimScenario::noise_sd * SimScenario::noise_sd == doctest::Approx(0.25));

  SimScenario s;
  s.n0 = 30;
  s.ratio = 2.5;
  s.test_size = 40;
  CHECK(s.source_size() == 75);
  RngStream rng(1);
  const ScenarioData d = generate_scenario(s, rng);
  CHECK(d.target.size() == 30);
  REQUIRE(d.sources.size() == 2);
  CHECK(d.sources[0].size() == 75);
  CHECK(d.sources[1].size() == 75);
  CHECK(d.oracle.size() == 180);
  CHECK(d.test.size() == 40);
  CHECK(d.target.dim() == 6);
  CHECK(d.sources[1].domain_id() == 2);

  s.n0 = 1;
  CHECK_THROWS_AS(s.validate(), InvalidArgument);
  s.n0 = 10;
  s.ratio = 0.5;
  CHECK_THROWS_AS(s.validate(), InvalidArgument);
}

TEST_CASE("mean responses follow the data-generating formulas") {
  const Eigen::VectorXd theta = SimScenario::theta();
  // theta'x = pi/6 along theta.
  const Eigen::VectorXd x = theta * (std::numbers::pi / 6.0) / theta.squaredNorm();
  CHECK(SimScenario::mean_response(1, x) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(SimScenario::mean_response(2, x) == doctest::Approx(std::cos(std::numbers::pi / 2.0) + 1.0));
  CHECK(SimScenario::mean_response(0, x) == doctest::Approx(1.0 / 3.0 - 3.0).epsilon(1e-14));
  CHECK_THROWS(SimScenario::mean_response(3, x));
}

TEST_CASE("draws follow the covariate laws and target responses stay in range") {
  SimScenario s;
  s.n0 = 2;
  s.ratio = 5000.0;
  s.test_size = 100000;
  RngStream rng(2);
  const ScenarioData d = generate_scenario(s, rng);
  const double lo = -3.0 - 1.0 / 3.0 - 2.5, hi = -3.0 + 1.0 / 3.0 + 2.5;
  const auto& y = d.test.responses();
  const auto inside = (y.array() >= lo && y.array() <= hi).count();
  CHECK(static_cast<double>(inside) / static_cast<double>(y.size()) >= 0.9999);

  const Eigen::MatrixXd& xt = d.test.features();
  CHECK(xt.mean() == doctest::Approx(0.0).epsilon(0.01).scale(1.0));
  CHECK((xt.array() - xt.mean()).square().mean() == doctest::Approx(0.25).epsilon(0.02));
  const Eigen::MatrixXd& xs = d.sources[0].features();
  CHECK(std::abs(xs.mean() - 1.0) < 0.02);
  CHECK((xs.array() - xs.mean()).square().mean() == doctest::Approx(1.0).epsilon(0.02));

  // Residuals around the noise-free curve have standard deviation 0.5.
  double ss = 0.0;
  for (Eigen::Index i = 0; i < d.sources[1].size(); ++i) {
    const double r = d.sources[1].responses()(i) - SimScenario::mean_response(2, d.sources[1].features().row(i).transpose());
    ss += r * r;
  }
  CHECK(std::sqrt(ss / d.sources[1].size()) == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("one repetition yields one row per regime") {
  const BenchResult r = run_benchmark(quick_options(1), RngStream(5));
  REQUIRE(r.records.size() == 3);
  CHECK(r.summary.size() == 3);
  CHECK(r.failures.empty());
  for (const auto& rec : r.records) {
    CHECK(rec.mse >= 0.0);
    CHECK(rec.n0 == 20);
    CHECK(rec.learner == LearnerKind::krr);
  }
  for (Regime g : {Regime::target_only, Regime::oracle, Regime::tlcqm}) {
    const SummaryRow* row = r.find(LearnerKind::krr, g, 20, 2.0);
    REQUIRE(row != nullptr);
    CHECK(row->count == 1);
    CHECK(row->sd_mse == 0.0);
  }
  CHECK(r.find(LearnerKind::mlp, Regime::oracle, 20, 2.0) == nullptr);
}

TEST_CASE("seeded benchmarks reproduce exactly and summaries match the per-repetition log") {
  const BenchOptions o = quick_options(3);
  const BenchResult a = run_benchmark(o, RngStream(8));
  const BenchResult b = run_benchmark(o, RngStream(8));
  REQUIRE(a.records.size() == 9);
  for (std::size_t i = 0; i < a.records.size(); ++i) CHECK(a.records[i].mse == b.records[i].mse);

  const auto dir = testing::scratch_dir("simbench_csv");
  a.write_results_csv((dir / "results.csv").string());
  a.write_summary_csv((dir / "summary.csv").string());

  std::ifstream in(dir / "results.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "repetition,learner,regime,n0,ratio,mse");
  std::map<std::string, std::vector<double>> groups;
  while (std::getline(in, line)) {
    const auto cells = split(line);
    REQUIRE(cells.size() == 6);
    groups[cells[1] + "," + cells[2]].push_back(csv::parse_number(cells[5]).value());
  }
  CHECK(groups.size() == 3);

  std::ifstream sin(dir / "summary.csv");
  std::getline(sin, line);
  CHECK(line == "learner,regime,n0,ratio,mean_mse,sd_mse,count");
  int rows = 0;
  while (std::getline(sin, line)) {
    const auto cells = split(line);
    REQUIRE(cells.size() == 7);
    const auto& v = groups.at(cells[0] + "," + cells[1]);
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    const double sd = std::sqrt(var / static_cast<double>(v.size() - 1));
    CHECK(csv::parse_number(cells[4]).value() == doctest::Approx(mean).epsilon(1e-12));
    CHECK(csv::parse_number(cells[5]).value() == doctest::Approx(sd).epsilon(1e-12));
    CHECK(std::stoi(cells[6]) == static_cast<int>(v.size()));
    ++rows;
  }
  CHECK(rows == 3);
}

TEST_CASE("summarize groups and averages") {
  std::vector<RepetitionRecord> recs;
  for (int r = 0; r < 4; ++r) recs.push_back({r, LearnerKind::krr, Regime::oracle, 50, 10.0, 1.0 + r});
  recs.push_back({0, LearnerKind::krr, Regime::tlcqm, 50, 10.0, 5.0});
  const auto rows = summarize(recs);
  REQUIRE(rows.size() == 2);
  const auto& o = rows[0].regime == Regime::oracle ? rows[0] : rows[1];
  CHECK(o.mean_mse == 2.5);
  CHECK(o.sd_mse == doctest::Approx(std::sqrt(5.0 / 3.0)));
  CHECK(o.count == 4);
}

TEST_CASE("failing repetitions abort the benchmark") {
  BenchOptions o = quick_options(2);
  o.pipeline.engression.learning_rate = 1e300;
  o.pipeline.engression.standardize_response = false;
  try {
    run_benchmark(o, RngStream(1));
    FAIL("expected the benchmark to abort");
  } catch (const BenchmarkAborted& e) {
    CHECK(e.failures().size() == 2);
  }
}

TEST_CASE("benchmark option validation") {
  BenchOptions o = quick_options(1);
  o.repetitions = 0;
  CHECK_THROWS_AS(o.validate(), InvalidArgument);
  o = quick_options(1);
  o.learners.clear();
  CHECK_THROWS_AS(o.validate(), InvalidArgument);
  o = quick_options(1);
  o.folds = 1;
  CHECK_THROWS_AS(o.validate(), InvalidArgument);
  CHECK(to_string(Regime::target_only) != to_string(Regime::tlcqm));
}
