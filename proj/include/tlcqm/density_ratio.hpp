#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>

#include "tlcqm/dataset.hpp"

namespace tlcqm {

/// Kernel mean matching settings.
struct KmmConfig {
  /// Fixed RBF bandwidth; median heuristic on pooled points when empty.
  std::optional<double> bandwidth;
  double B_zeta = 1000.0;
  /// Slab half-width; 0.05 * B_zeta / sqrt(n_k) when empty.
  std::optional<double> xi;
  int max_iter = 5000;
  double tol = 1e-7;
  int dykstra_iters = 50;
  int power_iters = 100;

  void validate() const;
  double resolved_xi(Eigen::Index n_source) const;
};

struct DensityRatioWeights {
  Eigen::VectorXd zeta;
  double objective_value = 0.0;
  /// Box and slab constraints hold within 1e-6 at exit.
  bool feasible = false;
  bool converged = false;
  int iterations = 0;
  double bandwidth = 0.0;
  double xi = 0.0;
};

/// The feasible set {0 <= z_i <= upper} intersected with
/// {lower_sum <= sum z <= upper_sum}.
struct BoxSlab {
  double upper;
  double lower_sum;
  double upper_sum;

  bool contains(const Eigen::VectorXd& z, double tol) const;
};

/// Dykstra's alternating projection onto a BoxSlab. The box projection is
/// applied last, so the result always lies in the box.
Eigen::VectorXd project_box_slab(const Eigen::VectorXd& v, const BoxSlab& set, int iterations);

/// Exact Euclidean projection onto a BoxSlab, clip(v - tau, 0, upper) with
/// tau from the piecewise-linear sum. Used when Dykstra stops outside the set.
Eigen::VectorXd project_box_slab_exact(const Eigen::VectorXd& v, const BoxSlab& set);

/// KMM quadratic objective (1/n^2) z'Gz - (2/n^2) z'kappa.
double kmm_objective(const Eigen::MatrixXd& gram, const Eigen::VectorXd& kappa,
                     const Eigen::VectorXd& zeta);

/// Importance weights dP_target/dP_source on the source rows, by projected
/// gradient descent (step 1/L) on the KMM quadratic program starting from
/// the projected all-ones vector. Each projection runs `dykstra_iters`
/// Dykstra steps and switches to the exact projection if the result still
/// violates the constraints by more than 1e-9.
DensityRatioWeights estimate_weights(const Eigen::MatrixXd& source, const Eigen::MatrixXd& target,
                                     const KmmConfig& config = {});
DensityRatioWeights estimate_weights(const DomainDataset& source, const DomainDataset& target,
                                     const KmmConfig& config = {});

/// CSV with header `row,zeta`.
void write_weights_csv(const std::string& path, const DensityRatioWeights& weights);

}  // namespace tlcqm
