#pragma once

#include <Eigen/Dense>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "tlcqm/dataset.hpp"
#include "tlcqm/network.hpp"
#include "tlcqm/rng.hpp"

namespace tlcqm {

/// Rows with nonnegative loss weights for weighted empirical risk
/// minimization.
class WeightedTrainingSet {
 public:
  WeightedTrainingSet(Eigen::MatrixXd features, Eigen::VectorXd responses, Eigen::VectorXd weights);
  /// Unit weights.
  static WeightedTrainingSet unweighted(const DomainDataset& data);

  const Eigen::MatrixXd& features() const noexcept { return features_; }
  const Eigen::VectorXd& responses() const noexcept { return responses_; }
  const Eigen::VectorXd& weights() const noexcept { return weights_; }
  Eigen::Index size() const noexcept { return responses_.size(); }

  WeightedTrainingSet subset(std::span<const Eigen::Index> rows) const;

 private:
  Eigen::MatrixXd features_;
  Eigen::VectorXd responses_;
  Eigen::VectorXd weights_;
};

class Regressor {
 public:
  virtual ~Regressor() = default;
  /// One prediction per row of `features`.
  virtual Eigen::VectorXd predict(const Eigen::MatrixXd& features) const = 0;
};

/// f(x) = sum_i alpha_i k(x, x_i) with a Gaussian RBF kernel, no intercept.
class KrrModel final : public Regressor {
 public:
  KrrModel(Eigen::MatrixXd support, Eigen::VectorXd alpha, double bandwidth, double lambda);

  Eigen::VectorXd predict(const Eigen::MatrixXd& features) const override;

  const Eigen::MatrixXd& support() const noexcept { return support_; }
  const Eigen::VectorXd& alpha() const noexcept { return alpha_; }
  double bandwidth() const noexcept { return bandwidth_; }
  double lambda() const noexcept { return lambda_; }

 private:
  Eigen::MatrixXd support_;
  Eigen::VectorXd alpha_;
  double bandwidth_;
  double lambda_;
};

/// Exact minimizer of sum_i w_i (y_i - f(x_i))^2 + N * lambda * ||f||^2 over
/// the RBF reproducing kernel Hilbert space.
KrrModel fit_weighted_krr(const WeightedTrainingSet& data, double lambda, double bandwidth);

class MlpRegressor final : public Regressor {
 public:
  MlpRegressor(nn::Mlp net, double response_center, double response_scale,
               std::vector<double> loss_trace);

  Eigen::VectorXd predict(const Eigen::MatrixXd& features) const override;

  const nn::Mlp& network() const noexcept { return net_; }
  /// Weighted mean squared training loss per epoch.
  const std::vector<double>& loss_trace() const noexcept { return loss_trace_; }

 private:
  nn::Mlp net_;
  double center_;
  double scale_;
  std::vector<double> loss_trace_;
};

/// ReLU network trained by Adam on (1/sum w) sum_i w_i (y_i - f(x_i))^2.
/// Deterministic given `rng`.
MlpRegressor fit_weighted_mlp(const WeightedTrainingSet& data, const std::vector<int>& hidden,
                              double learning_rate, int epochs, RngStream& rng,
                              int batch_size = 0);

double evaluate_mse(const Regressor& model, const Eigen::MatrixXd& features,
                    const Eigen::VectorXd& responses);
double evaluate_mse(const Regressor& model, const DomainDataset& test);

// ---------------------------------------------------------------------------
// Hyperparameter selection

enum class LearnerKind { krr, mlp };

std::string to_string(LearnerKind kind);
LearnerKind learner_kind_from_string(const std::string& name);

struct Candidate {
  LearnerKind kind = LearnerKind::krr;
  double lambda = 0.0;       // krr
  std::vector<int> hidden;   // mlp
  double learning_rate = 0;  // mlp
  int epochs = 0;            // mlp

  std::string label() const;
};

/// True when `a` regularizes more strongly than `b`: larger penalty for KRR;
/// fewer hidden units, then smaller learning rate, for the MLP.
bool more_regularized(const Candidate& a, const Candidate& b);

/// Penalty grid {3^-2, ..., 3^6} * 0.1 / n.
std::vector<double> krr_penalty_grid(Eigen::Index n);

struct LearnerGrid {
  LearnerKind kind = LearnerKind::krr;
  std::vector<Candidate> candidates;

  static LearnerGrid krr(Eigen::Index n);
  static LearnerGrid krr(const std::vector<double>& lambdas);
  /// Hidden layers {(10), (50), (100)} x learning rates {1e-4, 1e-3, 1e-2}.
  static LearnerGrid mlp(int epochs = 1000);
  static LearnerGrid mlp(const std::vector<std::vector<int>>& hidden,
                         const std::vector<double>& learning_rates, int epochs);
};

struct CvReport {
  LearnerKind kind = LearnerKind::krr;
  std::vector<Candidate> candidates;
  std::vector<double> mean_mse;
  std::size_t chosen = 0;
  int folds = 0;
  /// Kernel bandwidth shared by every KRR fit (0 for the MLP).
  double bandwidth = 0.0;

  const Candidate& selected() const { return candidates.at(chosen); }
  std::string to_json() const;
};

/// K-fold cross-validation over a grid. Folds come from a seeded row
/// shuffle; training uses the weights, validation MSE is unweighted.
CvReport cross_validate(const WeightedTrainingSet& data, const LearnerGrid& grid, int folds,
                        RngStream& rng);

/// Fits one candidate on all of `data`. `bandwidth` is used by KRR only.
std::unique_ptr<Regressor> fit_candidate(const WeightedTrainingSet& data, const Candidate& candidate,
                                         double bandwidth, RngStream& rng);

/// KRR bandwidth rule: median heuristic on the training features.
double krr_bandwidth(const Eigen::MatrixXd& features);

struct TunedModel {
  CvReport report;
  std::unique_ptr<Regressor> model;
};

/// Cross-validate, then refit the selected candidate on all rows.
TunedModel tune_and_fit(const WeightedTrainingSet& data, const LearnerGrid& grid, int folds,
                        RngStream& rng);

}  // namespace tlcqm
