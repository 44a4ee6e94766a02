#include "tlcqm/pipeline.hpp"

#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <optional>

#include "tlcqm/csv.hpp"
#include "tlcqm/errors.hpp"
#include "tlcqm/parallel.hpp"

namespace tlcqm {

namespace {

using json = nlohmann::json;

template <class F>
auto labelled(const std::string& step, F&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const PipelineError&) {
    throw;
  } catch (const std::exception& e) {
    throw PipelineError(step, e.what());
  }
}

void check_features(const std::vector<EngressionModel>& models, Eigen::Index dim, int draws) {
  if (models.empty()) throw InvalidArgument("at least one generator is required");
  if (draws < 1) throw InvalidArgument("number of generated draws must be positive");
  for (const auto& m : models) {
    if (m.feature_dim() != dim) {
      throw InvalidArgument("generator expects " + std::to_string(m.feature_dim()) +
                            " features, data has " + std::to_string(dim));
    }
  }
}

}  // namespace

std::string to_string(PredictMode mode) { return mode == PredictMode::mean ? "mean" : "single-draw"; }

PredictMode predict_mode_from_string(const std::string& name) {
  if (name == "mean") return PredictMode::mean;
  if (name == "single-draw" || name == "single_draw") return PredictMode::single_draw;
  throw InvalidArgument("unknown predict mode '" + name + "'");
}

void PipelineConfig::validate() const {
  engression.validate();
  kmm.validate();
  if (M < 1) throw InvalidArgument("M must be positive");
  if (M_pred < 1) throw InvalidArgument("M_pred must be positive");
  if (!(qm_tol > 0.0)) throw InvalidArgument("quantile matching tol must be positive");
  if (qm_max_iter < 1) throw InvalidArgument("quantile matching max_iter must be positive");
  if (!(qm_ridge >= 0.0)) throw InvalidArgument("quantile matching ridge must be nonnegative");
}

QuantileMatchOptions PipelineConfig::quantile_options() const {
  QuantileMatchOptions o;
  o.mode = constraint_mode;
  o.tol = qm_tol;
  o.max_iter = qm_max_iter;
  o.ridge = qm_ridge;
  return o;
}

WeightedTrainingSet AugmentedDataset::training_set() const {
  return WeightedTrainingSet(features, y_tilde, weight);
}

void AugmentedDataset::write_csv(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  const auto names = feature_names.empty() ? default_feature_names(features.cols()) : feature_names;
  for (const auto& name : names) out << name << ',';
  out << "y_tilde,weight,origin\n";
  for (Eigen::Index i = 0; i < size(); ++i) {
    for (Eigen::Index j = 0; j < features.cols(); ++j) out << csv::format_number(features(i, j)) << ',';
    out << csv::format_number(y_tilde(i)) << ',' << csv::format_number(weight(i)) << ','
        << origin[static_cast<std::size_t>(i)] << '\n';
  }
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

std::string AugmentationResult::diagnostics_json() const {
  json sources = json::array();
  for (const auto& s : diagnostics.sources) {
    sources.push_back({{"domain", s.domain_id},
                       {"engression_final_loss", s.engression_final_loss},
                       {"engression_loss_trace", s.engression_loss_trace},
                       {"density_ratio_used", s.density_ratio_used},
                       {"kmm_feasible", s.kmm_feasible},
                       {"kmm_converged", s.kmm_converged},
                       {"kmm_iterations", s.kmm_iterations},
                       {"kmm_bandwidth", s.kmm_bandwidth},
                       {"kmm_xi", s.kmm_xi},
                       {"kmm_objective", s.kmm_objective}});
  }
  std::vector<double> means(diagnostics.scaler.means().data(),
                            diagnostics.scaler.means().data() + diagnostics.scaler.means().size());
  std::vector<double> scales(diagnostics.scaler.scales().data(),
                             diagnostics.scaler.scales().data() + diagnostics.scaler.scales().size());
  std::vector<Eigen::Index> counts = data.counts;
  const json doc = {{"rows", data.size()},
                    {"counts", counts},
                    {"quantile_match", json::parse(fit.to_json())},
                    {"sources", sources},
                    {"scaler", {{"names", diagnostics.scaler.names()}, {"means", means}, {"scales", scales}}},
                    {"generator_abs_max", diagnostics.generator_abs_max},
                    {"synthetic_bound", diagnostics.synthetic_bound},
                    {"max_abs_y_tilde", diagnostics.max_abs_y_tilde}};
  return doc.dump(1);
}

SyntheticDesign build_synthetic_design(const DomainDataset& target,
                                       const std::vector<EngressionModel>& models, int M,
                                       RngStream& rng) {
  check_features(models, target.dim(), M);
  const Eigen::Index n0 = target.size();
  const auto k = static_cast<Eigen::Index>(models.size());
  Eigen::MatrixXd v(n0 * M, k + 1);
  v.col(0).setOnes();
  for (Eigen::Index j = 0; j < k; ++j) {
    RngStream stream = rng.child(static_cast<std::uint64_t>(j));
    const Eigen::MatrixXd draws = models[static_cast<std::size_t>(j)].sample_rows(target.features(), M, stream);
    for (Eigen::Index i = 0; i < n0; ++i) v.col(j + 1).segment(i * M, M) = draws.row(i).transpose();
  }
  return SyntheticDesign(std::move(v), n0, M);
}

Eigen::MatrixXd predict_source_features(const std::vector<EngressionModel>& models,
                                        const DomainDataset& source, int M_pred, RngStream& rng) {
  check_features(models, source.dim(), M_pred);
  const auto k = static_cast<Eigen::Index>(models.size());
  Eigen::MatrixXd v(source.size(), k + 1);
  v.col(0).setOnes();
  for (Eigen::Index j = 0; j < k; ++j) {
    RngStream stream = rng.child(static_cast<std::uint64_t>(j));
    v.col(j + 1) = models[static_cast<std::size_t>(j)].sample_rows(source.features(), M_pred, stream).rowwise().mean();
  }
  return v;
}

AugmentationResult run_augmentation(const DomainDataset& target,
                                    const std::vector<DomainDataset>& sources,
                                    const PipelineConfig& config) {
  config.validate();
  if (target.size() < 2) throw InvalidArgument("target domain needs at least 2 rows");
  for (std::size_t k = 0; k < sources.size(); ++k) {
    if (sources[k].dim() != target.dim()) {
      throw InvalidArgument("source " + std::to_string(k + 1) + " has " + std::to_string(sources[k].dim()) +
                            " features, target has " + std::to_string(target.dim()));
    }
    if (sources[k].size() < 2) {
      throw InvalidArgument("source " + std::to_string(k + 1) + " needs at least 2 rows");
    }
  }

  AugmentationResult result;
  AugmentedDataset& aug = result.data;
  const std::size_t num_sources = sources.size();
  const Eigen::Index n0 = target.size();
  Eigen::Index total = n0;
  for (const auto& s : sources) total += s.size();

  aug.features.resize(total, target.dim());
  aug.y_tilde.resize(total);
  aug.weight = Eigen::VectorXd::Ones(total);
  aug.origin.assign(static_cast<std::size_t>(n0), 0);
  aug.counts = {n0};
  aug.feature_names = target.feature_names();
  aug.features.topRows(n0) = target.features();
  aug.y_tilde.head(n0) = target.responses();

  if (num_sources == 0) {
    result.fit.converged = true;
    result.fit.constraint_mode = config.constraint_mode;
    result.diagnostics.scaler = Scaler::identity(target.dim(), target.feature_names());
    return result;
  }

  // Working coordinates for the generators and the density ratio.
  std::vector<DomainDataset> all{target};
  all.insert(all.end(), sources.begin(), sources.end());
  if (config.standardize) {
    auto [scaled, scaler] = standardize(all);
    all = std::move(scaled);
    result.diagnostics.scaler = std::move(scaler);
  } else {
    result.diagnostics.scaler = Scaler::identity(target.dim(), target.feature_names());
  }
  const DomainDataset& work_target = all[0];

  const RngStream root(config.seed);

  // Step 1: one generator per source.
  std::vector<std::optional<EngressionModel>> trained(num_sources);
  labelled("step 1 (engression)", [&] {
    parallel_for(num_sources, [&](std::size_t k) {
      RngStream stream = root.child(1, k);
      trained[k].emplace(train_engression(all[k + 1], config.engression, stream));
    });
  });
  std::vector<EngressionModel> models;
  for (auto& m : trained) models.push_back(std::move(*m));

  // Step 2: synthetic responses at the target covariates.
  const SyntheticDesign design = labelled("step 2 (synthetic design)", [&] {
    RngStream stream = root.child(2);
    return build_synthetic_design(work_target, models, config.M, stream);
  });

  // Step 3: calibrate by quantile matching.
  result.fit = labelled("step 3 (quantile matching)", [&] {
    return fit_quantile_match(target.responses(), design, config.quantile_options());
  });
  const Eigen::VectorXd& beta = result.fit.beta;

  // Step 4: relabel every source row.
  std::vector<double> abs_max(num_sources, 0.0);
  for (std::size_t j = 0; j < num_sources; ++j) {
    abs_max[j] = design.matrix().col(static_cast<Eigen::Index>(j) + 1).cwiseAbs().maxCoeff();
  }
  result.diagnostics.sources.resize(num_sources);
  const int draws = config.predict_mode == PredictMode::mean ? config.M_pred : 1;
  Eigen::Index offset = n0;
  labelled("step 4 (augmentation)", [&] {
    for (std::size_t k = 0; k < num_sources; ++k) {
      const DomainDataset& src = all[k + 1];
      RngStream stream = root.child(4, k);
      Eigen::MatrixXd v = predict_source_features(models, src, draws, stream);
      for (std::size_t j = 0; j < num_sources; ++j) {
        abs_max[j] = std::max(abs_max[j], v.col(static_cast<Eigen::Index>(j) + 1).cwiseAbs().maxCoeff());
      }
      const Eigen::Index nk = src.size();
      aug.features.middleRows(offset, nk) = sources[k].features();
      aug.y_tilde.segment(offset, nk) = v * beta;
      aug.origin.insert(aug.origin.end(), static_cast<std::size_t>(nk), static_cast<int>(k) + 1);
      aug.counts.push_back(nk);

      auto& diag = result.diagnostics.sources[k];
      diag.domain_id = sources[k].domain_id();
      diag.engression_final_loss = models[k].final_loss();
      diag.engression_loss_trace = models[k].loss_trace();
      diag.v_hat = std::move(v);
      offset += nk;
    }
  });

  // Step 5: covariate-shift weights.
  if (config.use_density_ratio) {
    std::vector<DensityRatioWeights> weights(num_sources);
    labelled("step 5 (density ratio)", [&] {
      parallel_for(num_sources, [&](std::size_t k) {
        weights[k] = estimate_weights(all[k + 1], work_target, config.kmm);
      });
    });
    offset = n0;
    for (std::size_t k = 0; k < num_sources; ++k) {
      const Eigen::Index nk = sources[k].size();
      aug.weight.segment(offset, nk) = weights[k].zeta;
      auto& diag = result.diagnostics.sources[k];
      diag.density_ratio_used = true;
      diag.kmm_feasible = weights[k].feasible;
      diag.kmm_converged = weights[k].converged;
      diag.kmm_iterations = weights[k].iterations;
      diag.kmm_bandwidth = weights[k].bandwidth;
      diag.kmm_xi = weights[k].xi;
      diag.kmm_objective = weights[k].objective_value;
      offset += nk;
    }
  }

  double bound = std::abs(beta(0));
  for (std::size_t j = 0; j < num_sources; ++j) {
    bound += std::abs(beta(static_cast<Eigen::Index>(j) + 1)) * abs_max[j];
  }
  result.diagnostics.generator_abs_max = std::move(abs_max);
  result.diagnostics.synthetic_bound = bound;
  result.diagnostics.max_abs_y_tilde =
      total > n0 ? aug.y_tilde.tail(total - n0).cwiseAbs().maxCoeff() : 0.0;
  return result;
}

}  // namespace tlcqm
