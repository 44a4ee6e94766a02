#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "tlcqm/dataset.hpp"
#include "tlcqm/density_ratio.hpp"
#include "tlcqm/engression.hpp"
#include "tlcqm/learners.hpp"
#include "tlcqm/quantile_match.hpp"
#include "tlcqm/rng.hpp"

namespace tlcqm {

/// How a source row's predicted responses are formed from each generator.
enum class PredictMode { mean, single_draw };

std::string to_string(PredictMode mode);
PredictMode predict_mode_from_string(const std::string& name);

struct PipelineConfig {
  EngressionConfig engression;
  /// Generated draws per target covariate in the synthetic design.
  int M = 3000;
  /// Draws averaged per source covariate when predicting.
  int M_pred = 512;
  ConstraintMode constraint_mode = ConstraintMode::unconstrained;
  bool use_density_ratio = true;
  KmmConfig kmm;
  std::uint64_t seed = 0;
  /// Train generators and density ratios on pooled standardized features.
  bool standardize = true;
  PredictMode predict_mode = PredictMode::mean;
  double qm_tol = 1e-8;
  int qm_max_iter = 200;
  double qm_ridge = 0.0;

  void validate() const;
  QuantileMatchOptions quantile_options() const;
};

/// Target rows followed by each source's rows, in original feature
/// coordinates. origin is 0 for target rows and k for source k.
struct AugmentedDataset {
  Eigen::MatrixXd features;
  Eigen::VectorXd y_tilde;
  Eigen::VectorXd weight;
  std::vector<int> origin;
  /// n_0, n_1, ..., n_K.
  std::vector<Eigen::Index> counts;
  std::vector<std::string> feature_names;

  Eigen::Index size() const noexcept { return y_tilde.size(); }
  WeightedTrainingSet training_set() const;
  /// Columns: feature names, y_tilde, weight, origin.
  void write_csv(const std::string& path) const;
};

struct SourceDiagnostics {
  int domain_id = 0;
  double engression_final_loss = 0.0;
  std::vector<double> engression_loss_trace;
  bool density_ratio_used = false;
  bool kmm_feasible = true;
  bool kmm_converged = true;
  int kmm_iterations = 0;
  double kmm_bandwidth = 0.0;
  double kmm_xi = 0.0;
  double kmm_objective = 0.0;
  /// (n_k x (K+1)) predicted source features, intercept first.
  Eigen::MatrixXd v_hat;
};

struct PipelineDiagnostics {
  std::vector<SourceDiagnostics> sources;
  Scaler scaler;
  /// max_j |g^(j)| over every generated value (design and predictions).
  std::vector<double> generator_abs_max;
  /// |beta_0| + sum_j |beta_j| * generator_abs_max[j].
  double synthetic_bound = 0.0;
  double max_abs_y_tilde = 0.0;
};

struct AugmentationResult {
  AugmentedDataset data;
  QuantileMatchFit fit;
  PipelineDiagnostics diagnostics;

  std::string diagnostics_json() const;
};

/// (n0*M) x (K+1) design; row i*M + j is (1, g^(1)(x_i, eta), ...,
/// g^(K)(x_i, eta)) with independent noise per model and draw.
SyntheticDesign build_synthetic_design(const DomainDataset& target,
                                       const std::vector<EngressionModel>& models, int M,
                                       RngStream& rng);

/// Row i is (1, mean of M_pred draws of g^(j)(x_i) for each j).
Eigen::MatrixXd predict_source_features(const std::vector<EngressionModel>& models,
                                        const DomainDataset& source, int M_pred, RngStream& rng);

/// Trains one generator per source, calibrates them on the target by
/// quantile matching, relabels the source rows and attaches density-ratio
/// weights. Deterministic given config.seed. With no sources the target is
/// returned unchanged with unit weights.
AugmentationResult run_augmentation(const DomainDataset& target,
                                    const std::vector<DomainDataset>& sources,
                                    const PipelineConfig& config);

}  // namespace tlcqm
