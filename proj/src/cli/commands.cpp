#include "tlcqm/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <filesystem>
#include <fmt/format.h>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>

#include "tlcqm/csv.hpp"
#include "tlcqm/errors.hpp"
#include "tlcqm/run_config.hpp"

namespace tlcqm {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

/// Flags shared by simulate and augment that override config values.
struct PipelineFlags {
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  std::optional<int> M, M_pred, epochs;
  std::optional<std::string> constraint, predict;
  bool no_density_ratio = false;
  bool no_standardize = false;
  std::vector<std::string> set;

  void attach(CLI::App& cmd) {
    cmd.add_option("--config", config, "JSON config file with flat dotted keys");
    cmd.add_option("--seed", seed, "Random seed (default: TLCQM_SEED or 1)");
    cmd.add_option("--M", M, "Generated draws per target row (default 3000)");
    cmd.add_option("--M-pred", M_pred, "Draws averaged per source row (default 512)");
    cmd.add_option("--epochs", epochs, "Engression training epochs (default 1000)");
    cmd.add_option("--constraint", constraint, "Quantile matching constraint: none|nonneg");
    cmd.add_option("--predict", predict, "Source relabelling: mean|single-draw");
    cmd.add_flag("--no-density-ratio", no_density_ratio, "Give source rows unit weight");
    cmd.add_flag("--no-standardize", no_standardize, "Use raw feature coordinates");
    cmd.add_option("--set", set, "Override a config key, KEY=VALUE (repeatable)");
  }

  RunConfig resolve() const {
    RunConfig c = config ? RunConfig::load(*config) : RunConfig::defaults();
    for (const auto& kv : set) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects KEY=VALUE, got '" + kv + "'");
      c.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (seed) c.seed = *seed;
    if (M) c.pipeline.M = *M;
    if (M_pred) c.pipeline.M_pred = *M_pred;
    if (epochs) c.pipeline.engression.epochs = *epochs;
    try {
      if (constraint) c.pipeline.constraint_mode = constraint_mode_from_string(*constraint);
      if (predict) c.pipeline.predict_mode = predict_mode_from_string(*predict);
    } catch (const InvalidArgument& e) {
      throw ConfigError(e.what());
    }
    if (no_density_ratio) c.pipeline.use_density_ratio = false;
    if (no_standardize) c.pipeline.standardize = false;
    c.pipeline.seed = c.seed;
    return c;
  }
};

Eigen::MatrixXd columns_as_matrix(const csv::Table& table, const std::vector<std::size_t>& cols,
                                  const std::string& path) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(table.rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    for (std::size_t j = 0; j < cols.size(); ++j) {
      const auto& cell = table.rows[r][cols[j]];
      const auto v = csv::parse_number(cell);
      if (!v) throw ParseError(r + 1, table.header[cols[j]] + "' in '" + path, cell);
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = *v;
    }
  }
  return m;
}

/// Reads a training file: augmented format (y_tilde, weight, origin) or a
/// plain file with `response` and unit weights.
std::pair<WeightedTrainingSet, std::vector<std::string>> read_training(const std::string& path,
                                                                       const std::string& response) {
  const csv::Table t = csv::read(path);
  const bool augmented = t.column("y_tilde").has_value();
  const std::string ycol = augmented ? "y_tilde" : response;
  const auto yi = t.column(ycol);
  if (!yi) throw SchemaError(ycol, "missing in '" + path + "'");
  const auto wi = t.column("weight");
  std::vector<std::size_t> feats;
  std::vector<std::string> names;
  for (std::size_t j = 0; j < t.header.size(); ++j) {
    const auto& h = t.header[j];
    if (j == *yi || (wi && j == *wi) || (augmented && h == "origin")) continue;
    feats.push_back(j);
    names.push_back(h);
  }
  if (feats.empty()) throw SchemaError(ycol, "no feature columns in '" + path + "'");
  Eigen::MatrixXd x = columns_as_matrix(t, feats, path);
  Eigen::VectorXd y = columns_as_matrix(t, {*yi}, path).col(0);
  Eigen::VectorXd w = wi ? Eigen::VectorXd(columns_as_matrix(t, {*wi}, path).col(0))
                         : Eigen::VectorXd::Ones(y.size());
  return {WeightedTrainingSet(std::move(x), std::move(y), std::move(w)), names};
}

/// Reads a test file whose features are looked up by name.
std::pair<Eigen::MatrixXd, Eigen::VectorXd> read_test(const std::string& path, const std::string& response,
                                                      const std::vector<std::string>& names) {
  const csv::Table t = csv::read(path);
  const auto yi = t.column(response);
  if (!yi) throw SchemaError(response, "missing in '" + path + "'");
  std::vector<std::size_t> feats;
  for (const auto& n : names) {
    const auto j = t.column(n);
    if (!j) throw SchemaError(n, "training feature missing in '" + path + "'");
    feats.push_back(*j);
  }
  return {columns_as_matrix(t, feats, path), columns_as_matrix(t, {*yi}, path).col(0)};
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << text << '\n';
}

int cmd_simulate(const PipelineFlags& flags, const std::optional<int>& n0, const std::optional<double>& ratio,
                 const std::optional<int>& reps, const std::optional<std::string>& learners,
                 const std::optional<std::string>& out_dir, bool verbose, std::ostream& out,
                 std::ostream& err) {
  RunConfig c = flags.resolve();
  if (n0) c.n0 = {*n0};
  if (ratio) c.ratio = {*ratio};
  if (reps) c.repetitions = *reps;
  if (learners) {
    c.learners.clear();
    std::stringstream ss(*learners);
    for (std::string item; std::getline(ss, item, ',');) c.learners.push_back(item);
  }
  if (out_dir) c.output_dir = *out_dir;
  c.validate();

  BenchOptions options = c.bench_options();
  if (verbose) options.progress = [&err](const std::string& msg) { err << msg << '\n'; };
  const BenchResult result = run_benchmark(options, RngStream(c.seed));

  fs::create_directories(c.output_dir);
  const fs::path dir(c.output_dir);
  result.write_results_csv((dir / "results.csv").string());
  result.write_summary_csv((dir / "summary.csv").string());
  for (const auto& f : result.failures) err << "skipped: " << f << '\n';
  for (const auto& s : result.summary) {
    out << fmt::format("{:<4} {:<12} n0={:<5} ratio={:<6g} mean_mse={:.6f} sd={:.6f} reps={}\n",
                       to_string(s.learner), to_string(s.regime), s.n0, s.ratio, s.mean_mse, s.sd_mse,
                       s.count);
  }
  return exit_ok;
}

int cmd_augment(const PipelineFlags& flags, const std::string& target_path,
                const std::vector<std::string>& source_paths, const std::string& out_path,
                const std::string& response, const std::optional<std::string>& diagnostics_path,
                const std::optional<std::string>& scaler_path, const std::optional<std::string>& weights_dir,
                std::ostream& out) {
  RunConfig c = flags.resolve();
  try {
    c.pipeline.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }

  auto load_one = [&](const std::string& path, int domain) {
    auto sets = load_csv(path, response);
    return DomainDataset(sets.front().features(), sets.front().responses(), domain, sets.front().feature_names());
  };
  const DomainDataset target = load_one(target_path, 0);
  std::vector<DomainDataset> sources;
  for (std::size_t k = 0; k < source_paths.size(); ++k) {
    sources.push_back(load_one(source_paths[k], static_cast<int>(k) + 1));
    if (sources.back().feature_names() != target.feature_names()) {
      throw SchemaError(response, "feature columns of '" + source_paths[k] + "' differ from '" + target_path + "'");
    }
  }

  const AugmentationResult result = run_augmentation(target, sources, c.pipeline);
  result.data.write_csv(out_path);
  const std::string diag = diagnostics_path.value_or(out_path + ".diagnostics.json");
  write_text(diag, result.diagnostics_json());
  const std::string scal = scaler_path.value_or(out_path + ".scaler.csv");
  result.diagnostics.scaler.save(scal);
  if (weights_dir) {
    fs::create_directories(*weights_dir);
    Eigen::Index offset = result.data.counts.front();
    for (std::size_t k = 0; k < sources.size(); ++k) {
      const Eigen::Index nk = result.data.counts[k + 1];
      DensityRatioWeights w;
      w.zeta = result.data.weight.segment(offset, nk);
      write_weights_csv((fs::path(*weights_dir) / fmt::format("weights_source{}.csv", k + 1)).string(), w);
      offset += nk;
    }
  }
  out << fmt::format("wrote {} rows to {}\n", result.data.size(), out_path);
  if (result.fit.beta.size() > 0) {
    out << "beta:";
    for (Eigen::Index j = 0; j < result.fit.beta.size(); ++j) out << ' ' << csv::format_number(result.fit.beta(j));
    out << '\n';
  }
  return exit_ok;
}

int cmd_fit_eval(const std::string& train_path, const std::string& test_path, const std::string& learner,
                 const std::string& response, int folds, int mlp_epochs, std::uint64_t seed,
                 const std::string& report_path, std::ostream& out) {
  LearnerKind kind;
  try {
    kind = learner_kind_from_string(learner);
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  auto [train, names] = read_training(train_path, response);
  const auto [x_test, y_test] = read_test(test_path, response, names);
  if (folds < 2 || folds > train.size()) {
    throw ConfigError(fmt::format("--folds must be between 2 and the number of training rows ({})", train.size()));
  }
  const LearnerGrid grid = kind == LearnerKind::krr ? LearnerGrid::krr(train.size()) : LearnerGrid::mlp(mlp_epochs);
  RngStream rng(seed);
  const TunedModel tuned = tune_and_fit(train, grid, folds, rng);
  const double mse = evaluate_mse(*tuned.model, x_test, y_test);

  const json report = {{"learner", to_string(kind)},
                       {"train", train_path},
                       {"test", test_path},
                       {"n_train", train.size()},
                       {"n_test", y_test.size()},
                       {"seed", seed},
                       {"test_mse", mse},
                       {"cross_validation", json::parse(tuned.report.to_json())}};
  write_text(report_path, report.dump(1));
  out << "selected " << tuned.report.selected().label() << '\n';
  out << "test_mse " << csv::format_number(mse) << '\n';
  return exit_ok;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Transfer learning by conditional quantile matching"};
  app.name("tlcqm");
  app.require_subcommand(1);
  app.footer("Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.\n"
             "TLCQM_SEED sets the default seed when --seed and the config file do not.");

  // simulate
  auto* sim = app.add_subcommand("simulate", "Monte Carlo benchmark: target-only, oracle and augmented training");
  PipelineFlags sim_flags;
  sim_flags.attach(*sim);
  std::optional<int> sim_n0, sim_reps;
  std::optional<double> sim_ratio;
  std::optional<std::string> sim_learners, sim_out;
  bool sim_verbose = false;
  sim->add_option("--n0", sim_n0, "Target sample size (default 50)");
  sim->add_option("--ratio", sim_ratio, "Source size divided by n0 (default 10)");
  sim->add_option("--reps", sim_reps, "Monte Carlo repetitions (default 50)");
  sim->add_option("--learner", sim_learners, "Comma-separated learners: krr,mlp (default krr)");
  sim->add_option("--out-dir", sim_out, "Directory for results.csv and summary.csv (default .)");
  sim->add_flag("--verbose,-v", sim_verbose, "Report progress on stderr");

  // augment
  auto* aug = app.add_subcommand("augment", "Build the augmented, weighted training set");
  PipelineFlags aug_flags;
  aug_flags.attach(*aug);
  std::string aug_target, aug_out, aug_response = "y";
  std::vector<std::string> aug_sources;
  std::optional<std::string> aug_diag, aug_scaler, aug_weights;
  aug->add_option("--target", aug_target, "Target domain CSV")->required();
  aug->add_option("--source", aug_sources, "Source domain CSV (repeatable)");
  aug->add_option("--out", aug_out, "Augmented CSV to write")->required();
  aug->add_option("--response", aug_response, "Response column name (default y)");
  aug->add_option("--diagnostics", aug_diag, "Diagnostics JSON (default OUT.diagnostics.json)");
  aug->add_option("--scaler", aug_scaler, "Feature scaler CSV (default OUT.scaler.csv)");
  aug->add_option("--dump-weights", aug_weights, "Directory for per-source weight CSVs");

  // fit-eval
  auto* fit = app.add_subcommand("fit-eval", "Cross-validate a learner, refit and report test MSE");
  std::string fit_train, fit_test, fit_learner = "krr", fit_response = "y", fit_report = "fit_eval_report.json";
  int fit_folds = 5, fit_epochs = 1000;
  std::optional<std::uint64_t> fit_seed;
  fit->add_option("--train", fit_train, "Training CSV (augmented format or plain)")->required();
  fit->add_option("--test", fit_test, "Test CSV")->required();
  fit->add_option("--learner", fit_learner, "krr or mlp (default krr)");
  fit->add_option("--response", fit_response, "Response column of plain files (default y)");
  fit->add_option("--folds", fit_folds, "Cross-validation folds (default 5)");
  fit->add_option("--mlp-epochs", fit_epochs, "Epochs per MLP fit (default 1000)");
  fit->add_option("--seed", fit_seed, "Random seed (default: TLCQM_SEED or 1)");
  fit->add_option("--report", fit_report, "Report JSON (default fit_eval_report.json)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    if (code == 0) return exit_ok;
    for (auto* sub : {sim, aug, fit}) {
      if (sub->parsed()) err << sub->help();
    }
    if (!sim->parsed() && !aug->parsed() && !fit->parsed()) err << app.help();
    return exit_usage;
  }

  try {
    if (sim->parsed()) {
      return cmd_simulate(sim_flags, sim_n0, sim_ratio, sim_reps, sim_learners, sim_out, sim_verbose, out, err);
    }
    if (aug->parsed()) {
      return cmd_augment(aug_flags, aug_target, aug_sources, aug_out, aug_response, aug_diag, aug_scaler,
                         aug_weights, out);
    }
    const std::uint64_t seed = fit_seed ? *fit_seed : RunConfig::defaults().seed;
    return cmd_fit_eval(fit_train, fit_test, fit_learner, fit_response, fit_folds, fit_epochs, seed, fit_report,
                        out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return exit_usage;
  } catch (const SchemaError& e) {
    err << "error: " << e.what() << '\n';
    return exit_usage;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return exit_usage;
  } catch (const EmptyInputError& e) {
    err << "error: " << e.what() << '\n';
    return exit_usage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_runtime;
  }
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace tlcqm
