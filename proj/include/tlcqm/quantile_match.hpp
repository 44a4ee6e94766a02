#pragma once

#include <Eigen/Dense>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "tlcqm/rng.hpp"

namespace tlcqm {

enum class ConstraintMode { unconstrained, nonneg_slopes };

std::string to_string(ConstraintMode mode);
ConstraintMode constraint_mode_from_string(const std::string& name);

/// Synthetic design for quantile matching: (n0*M) x (K+1) with an intercept
/// column. Row i*M + j holds (1, Y_ij^(1), ..., Y_ij^(K)) generated at the
/// i-th target covariate.
class SyntheticDesign {
 public:
  SyntheticDesign(Eigen::MatrixXd v_hat, Eigen::Index n0, Eigen::Index draws_per_target);

  const Eigen::MatrixXd& matrix() const noexcept { return v_hat_; }
  Eigen::Index n0() const noexcept { return n0_; }
  Eigen::Index draws_per_target() const noexcept { return m_; }
  Eigen::Index num_sources() const noexcept { return v_hat_.cols() - 1; }

 private:
  Eigen::MatrixXd v_hat_;
  Eigen::Index n0_;
  Eigen::Index m_;
};

struct QuantileMatchOptions {
  ConstraintMode mode = ConstraintMode::unconstrained;
  double tol = 1e-8;
  int max_iter = 200;
  /// Optional penalty ridge * ||beta_{1..K}||^2 added to the objective.
  double ridge = 0.0;
};

struct QuantileMatchFit {
  Eigen::VectorXd beta;
  /// Objective at the initial estimate, then after each iteration.
  std::vector<double> objective_trace;
  int iterations = 0;
  bool converged = false;
  ConstraintMode constraint_mode = ConstraintMode::unconstrained;
  /// A least-squares step fell back to the minimum-norm pseudo-inverse.
  bool rank_deficient = false;

  std::string to_json() const;
  static QuantileMatchFit from_json(const std::string& text);
};

/// Mean squared gap between sorted predictions and the target order
/// statistics, prediction rank r (1-based) paired with target rank
/// ceil(r / M) where M = predictions.size() / target.size().
double empirical_objective(std::span<const double> target_y, std::span<const double> predictions);

/// Block descent on the empirical quantile-matching objective, started from
/// (nonnegative) least squares of the replicated targets on the design.
QuantileMatchFit fit_quantile_match(const Eigen::VectorXd& target_y, const SyntheticDesign& design,
                                    const QuantileMatchOptions& options = {});

using ScalarSampler = std::function<double(RngStream&)>;
using VectorSampler = std::function<Eigen::VectorXd(RngStream&)>;

/// Monte Carlo estimate of the population objective: n_mc draws of the
/// target and of beta'V, compared by empirical_objective with M = 1. The
/// stream is taken by value so repeated calls share random numbers.
double estimate_population_objective(const Eigen::VectorXd& beta, const ScalarSampler& target_sampler,
                                     const VectorSampler& v_sampler, int n_mc, RngStream rng);

/// Monte Carlo gradient of the population objective through the quantile
/// derivative identity grad Q_{beta'V}(a) = E[V | beta'V = Q_{beta'V}(a)]:
/// -2/n sum_r (Y_(r) - (beta'V)_(r)) V_[r], where V_[r] is the draw whose
/// projection has rank r.
Eigen::VectorXd estimate_population_gradient(const Eigen::VectorXd& beta,
                                             const ScalarSampler& target_sampler,
                                             const VectorSampler& v_sampler, int n_mc,
                                             RngStream rng);

}  // namespace tlcqm
