#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tlcqm/pipeline.hpp"
#include "tlcqm/simbench.hpp"

namespace tlcqm {

/// Error in a configuration file or flag value.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Everything a command needs, with defaults that work without a file.
///
/// The file form is a JSON object with flat dotted keys, for example
/// {"pipeline.M": 1000, "engression.epochs": 300, "scenario.n0": [50, 100]}.
/// Unknown keys are rejected. See RunConfig::keys() for the full list.
struct RunConfig {
  PipelineConfig pipeline;
  std::vector<std::string> learners{"krr"};
  int folds = 5;
  int mlp_epochs = 1000;
  std::vector<int> n0{50};
  std::vector<double> ratio{10.0};
  int test_size = 2000;
  int repetitions = 50;
  std::uint64_t seed = 1;
  std::string output_dir = ".";

  /// Defaults, with the seed taken from TLCQM_SEED when that is set.
  static RunConfig defaults();
  static RunConfig from_json_text(const std::string& text, RunConfig base = defaults());
  static RunConfig load(const std::string& path, RunConfig base = defaults());

  /// Sets one dotted key from a JSON value.
  void set(const std::string& key, const std::string& json_value);

  static std::vector<std::string> keys();
  std::string to_json() const;

  /// Scenario grid, learner kinds and pipeline settings for simbench.
  BenchOptions bench_options() const;
  std::vector<LearnerKind> learner_kinds() const;

  void validate() const;
};

}  // namespace tlcqm
