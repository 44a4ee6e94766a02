#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tlcqm/dataset.hpp"
#include "tlcqm/learners.hpp"
#include "tlcqm/pipeline.hpp"
#include "tlcqm/rng.hpp"

namespace tlcqm {

/// Six-dimensional simulation with covariate and concept shift between two
/// sources and the target.
struct SimScenario {
  static constexpr int dim = 6;
  static constexpr double noise_sd = 0.5;

  int n0 = 50;
  /// Source size relative to n0.
  double ratio = 10.0;
  int test_size = 2000;

  /// (1, 1/2, ..., 1/6).
  static Eigen::VectorXd theta();
  /// Noise-free response of domain 0 (target), 1 or 2 at x.
  static double mean_response(int domain, const Eigen::VectorXd& x);
  Eigen::Index source_size() const;
  void validate() const;
};

struct ScenarioData {
  DomainDataset target;
  std::vector<DomainDataset> sources;
  /// Target-law sample of size n0 + sum of source sizes.
  DomainDataset oracle;
  DomainDataset test;
};

ScenarioData generate_scenario(const SimScenario& scenario, RngStream& rng);

enum class Regime { target_only, oracle, tlcqm };

std::string to_string(Regime regime);

struct RepetitionRecord {
  int repetition = 0;
  LearnerKind learner = LearnerKind::krr;
  Regime regime = Regime::target_only;
  int n0 = 0;
  double ratio = 0.0;
  double mse = 0.0;
};

struct SummaryRow {
  LearnerKind learner = LearnerKind::krr;
  Regime regime = Regime::target_only;
  int n0 = 0;
  double ratio = 0.0;
  double mean_mse = 0.0;
  /// Sample standard deviation (0 with one repetition).
  double sd_mse = 0.0;
  int count = 0;
};

struct BenchOptions {
  std::vector<SimScenario> scenarios{SimScenario{}};
  std::vector<LearnerKind> learners{LearnerKind::krr};
  int repetitions = 50;
  int folds = 5;
  int mlp_epochs = 1000;
  PipelineConfig pipeline;
  /// Optional progress sink, called once per finished repetition.
  std::function<void(const std::string&)> progress;

  void validate() const;
};

struct BenchResult {
  /// Ordered by scenario, repetition, learner, regime.
  std::vector<RepetitionRecord> records;
  std::vector<SummaryRow> summary;
  /// One message per skipped repetition.
  std::vector<std::string> failures;

  const SummaryRow* find(LearnerKind learner, Regime regime, int n0, double ratio) const;
  /// Columns: repetition, learner, regime, n0, ratio, mse.
  void write_results_csv(const std::string& path) const;
  /// Columns: learner, regime, n0, ratio, mean_mse, sd_mse, count.
  void write_summary_csv(const std::string& path) const;
};

/// Thrown when more than 10% of the repetitions failed.
class BenchmarkAborted : public std::runtime_error {
 public:
  BenchmarkAborted(const std::string& what, std::vector<std::string> failures)
      : std::runtime_error(what), failures_(std::move(failures)) {}
  const std::vector<std::string>& failures() const noexcept { return failures_; }

 private:
  std::vector<std::string> failures_;
};

/// Grouped mean and standard deviation of the per-repetition MSEs.
std::vector<SummaryRow> summarize(const std::vector<RepetitionRecord>& records);

/// For every scenario and repetition: draw fresh data, fit each learner on
/// the target alone, on the oracle sample and on the augmented data, and
/// score each on the test set. Repetition r of scenario s uses
/// rng.child(s, r), so results do not depend on scheduling.
BenchResult run_benchmark(const BenchOptions& options, const RngStream& rng);

}  // namespace tlcqm
