#include "tlcqm/simbench.hpp"

#include <cmath>
#include <fmt/format.h>
#include <fstream>
#include <map>
#include <tuple>

#include "tlcqm/csv.hpp"
#include "tlcqm/errors.hpp"
#include "tlcqm/parallel.hpp"

namespace tlcqm {

namespace {

// Domain 0 draws X ~ N(0, 0.25 I); sources draw X ~ N(1, I).
DomainDataset draw_domain(int domain, Eigen::Index n, RngStream& rng) {
  Eigen::MatrixXd x(n, SimScenario::dim);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int j = 0; j < SimScenario::dim; ++j) {
      x(i, j) = domain == 0 ? 0.5 * rng.normal() : 1.0 + rng.normal();
    }
    y(i) = SimScenario::mean_response(domain, x.row(i).transpose()) + SimScenario::noise_sd * rng.normal();
  }
  return DomainDataset(std::move(x), std::move(y), domain);
}

LearnerGrid grid_for(LearnerKind kind, Eigen::Index n, int mlp_epochs) {
  return kind == LearnerKind::krr ? LearnerGrid::krr(n) : LearnerGrid::mlp(mlp_epochs);
}

double fit_and_score(const WeightedTrainingSet& train, const DomainDataset& test, LearnerKind kind,
                     const BenchOptions& options, RngStream rng) {
  const auto tuned = tune_and_fit(train, grid_for(kind, train.size(), options.mlp_epochs), options.folds, rng);
  return evaluate_mse(*tuned.model, test);
}

}  // namespace

Eigen::VectorXd SimScenario::theta() {
  Eigen::VectorXd t(dim);
  for (int j = 0; j < dim; ++j) t(j) = 1.0 / (j + 1);
  return t;
}

double SimScenario::mean_response(int domain, const Eigen::VectorXd& x) {
  if (x.size() != dim) throw InvalidArgument("scenario: expected 6 features");
  const double t = 3.0 * theta().dot(x);
  switch (domain) {
    case 0: return std::sin(t) / 3.0 - 3.0;
    case 1: return std::sin(t) + 1.0;
    case 2: return std::cos(t) + 1.0;
    default: throw InvalidArgument("scenario: domain must be 0, 1 or 2");
  }
}

Eigen::Index SimScenario::source_size() const {
  return static_cast<Eigen::Index>(std::llround(ratio * n0));
}

void SimScenario::validate() const {
  if (n0 < 2) throw InvalidArgument("scenario: n0 must be at least 2");
  if (!(ratio >= 1.0) || !std::isfinite(ratio)) throw InvalidArgument("scenario: ratio must be at least 1");
  if (test_size < 1) throw InvalidArgument("scenario: test size must be positive");
}

ScenarioData generate_scenario(const SimScenario& scenario, RngStream& rng) {
  scenario.validate();
  const Eigen::Index nk = scenario.source_size();
  RngStream s0 = rng.child(0), s1 = rng.child(1), s2 = rng.child(2), so = rng.child(3), st = rng.child(4);
  DomainDataset target = draw_domain(0, scenario.n0, s0);
  std::vector<DomainDataset> sources{draw_domain(1, nk, s1), draw_domain(2, nk, s2)};
  DomainDataset oracle = draw_domain(0, scenario.n0 + 2 * nk, so);
  DomainDataset test = draw_domain(0, scenario.test_size, st);
  return ScenarioData{std::move(target), std::move(sources), std::move(oracle), std::move(test)};
}

std::string to_string(Regime regime) {
  switch (regime) {
    case Regime::target_only: return "target_only";
    case Regime::oracle: return "oracle";
    case Regime::tlcqm: return "tlcqm";
  }
  return "unknown";
}

void BenchOptions::validate() const {
  if (repetitions < 1) throw InvalidArgument("repetitions must be at least 1");
  if (scenarios.empty()) throw InvalidArgument("scenario grid is empty");
  if (learners.empty()) throw InvalidArgument("no learners selected");
  if (folds < 2) throw InvalidArgument("folds must be at least 2");
  if (mlp_epochs < 1) throw InvalidArgument("mlp epochs must be positive");
  for (const auto& s : scenarios) {
    s.validate();
    if (folds > s.n0) throw InvalidArgument("folds exceed the target sample size");
  }
  pipeline.validate();
}

const SummaryRow* BenchResult::find(LearnerKind learner, Regime regime, int n0, double ratio) const {
  for (const auto& row : summary) {
    if (row.learner == learner && row.regime == regime && row.n0 == n0 && row.ratio == ratio) return &row;
  }
  return nullptr;
}

void BenchResult::write_results_csv(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << "repetition,learner,regime,n0,ratio,mse\n";
  for (const auto& r : records) {
    out << r.repetition << ',' << to_string(r.learner) << ',' << to_string(r.regime) << ',' << r.n0 << ','
        << csv::format_number(r.ratio) << ',' << csv::format_number(r.mse) << '\n';
  }
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

void BenchResult::write_summary_csv(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << "learner,regime,n0,ratio,mean_mse,sd_mse,count\n";
  for (const auto& s : summary) {
    out << to_string(s.learner) << ',' << to_string(s.regime) << ',' << s.n0 << ','
        << csv::format_number(s.ratio) << ',' << csv::format_number(s.mean_mse) << ','
        << csv::format_number(s.sd_mse) << ',' << s.count << '\n';
  }
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

std::vector<SummaryRow> summarize(const std::vector<RepetitionRecord>& records) {
  using Key = std::tuple<int, double, int, int>;  // n0, ratio, learner, regime
  std::map<Key, std::vector<double>> groups;
  for (const auto& r : records) {
    groups[{r.n0, r.ratio, static_cast<int>(r.learner), static_cast<int>(r.regime)}].push_back(r.mse);
  }
  std::vector<SummaryRow> out;
  for (const auto& [key, values] : groups) {
    SummaryRow row;
    row.n0 = std::get<0>(key);
    row.ratio = std::get<1>(key);
    row.learner = static_cast<LearnerKind>(std::get<2>(key));
    row.regime = static_cast<Regime>(std::get<3>(key));
    row.count = static_cast<int>(values.size());
    double sum = 0.0;
    for (double v : values) sum += v;
    row.mean_mse = sum / row.count;
    if (row.count > 1) {
      double ss = 0.0;
      for (double v : values) ss += (v - row.mean_mse) * (v - row.mean_mse);
      row.sd_mse = std::sqrt(ss / (row.count - 1));
    }
    out.push_back(row);
  }
  return out;
}

BenchResult run_benchmark(const BenchOptions& options, const RngStream& rng) {
  options.validate();
  const std::size_t reps = static_cast<std::size_t>(options.repetitions);
  const std::size_t tasks = options.scenarios.size() * reps;

  std::vector<std::vector<RepetitionRecord>> per_task(tasks);
  std::vector<std::string> errors(tasks);
  parallel_for(tasks, [&](std::size_t task) {
    const std::size_t s = task / reps;
    const int rep = static_cast<int>(task % reps);
    const SimScenario& scenario = options.scenarios[s];
    RngStream stream = rng.child(s, static_cast<std::uint64_t>(rep));
    try {
      RngStream data_stream = stream.child(0);
      const ScenarioData data = generate_scenario(scenario, data_stream);
      PipelineConfig config = options.pipeline;
      config.seed = mix64(stream.child(1)());
      const AugmentationResult aug = run_augmentation(data.target, data.sources, config);

      const WeightedTrainingSet sets[] = {WeightedTrainingSet::unweighted(data.target),
                                          WeightedTrainingSet::unweighted(data.oracle),
                                          aug.data.training_set()};
      const Regime regimes[] = {Regime::target_only, Regime::oracle, Regime::tlcqm};
      std::vector<RepetitionRecord> recs;
      for (std::size_t l = 0; l < options.learners.size(); ++l) {
        for (std::size_t g = 0; g < 3; ++g) {
          RepetitionRecord r;
          r.repetition = rep;
          r.learner = options.learners[l];
          r.regime = regimes[g];
          r.n0 = scenario.n0;
          r.ratio = scenario.ratio;
          r.mse = fit_and_score(sets[g], data.test, r.learner, options, stream.child(2 + l, g));
          recs.push_back(r);
        }
      }
      per_task[task] = std::move(recs);
    } catch (const std::exception& e) {
      errors[task] = fmt::format("n0={} ratio={} repetition {}: {}", scenario.n0, scenario.ratio, rep, e.what());
    }
    if (options.progress) {
      options.progress(fmt::format("n0={} ratio={} repetition {}/{} {}", scenario.n0, scenario.ratio, rep + 1,
                                   reps, errors[task].empty() ? "done" : "FAILED"));
    }
  });

  BenchResult result;
  for (std::size_t t = 0; t < tasks; ++t) {
    if (!errors[t].empty()) result.failures.push_back(errors[t]);
    result.records.insert(result.records.end(), per_task[t].begin(), per_task[t].end());
  }
  if (result.failures.size() * 10 > tasks) {
    throw BenchmarkAborted(fmt::format("{} of {} repetitions failed; first: {}", result.failures.size(), tasks,
                                       result.failures.front()),
                           result.failures);
  }
  result.summary = summarize(result.records);
  return result;
}

}  // namespace tlcqm
