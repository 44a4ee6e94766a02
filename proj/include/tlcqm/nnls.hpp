#pragma once

#include <Eigen/Dense>
#include <vector>

namespace tlcqm {

struct NormalSolve {
  Eigen::VectorXd x;
  bool rank_deficient = false;
  int iterations = 0;
};

/// Minimum-norm minimizer of 1/2 x'Ax - b'x for symmetric PSD A (the normal
/// equations of a least-squares problem). Rank deficiency is reported, not
/// thrown.
NormalSolve solve_normal_min_norm(const Eigen::MatrixXd& gram, const Eigen::VectorXd& rhs);

/// Lawson-Hanson active set for min 1/2 x'Ax - b'x subject to x_j >= 0
/// wherever `nonneg[j]` is set; other coordinates are free.
NormalSolve solve_normal_nonneg(const Eigen::MatrixXd& gram, const Eigen::VectorXd& rhs,
                                const std::vector<bool>& nonneg);

}  // namespace tlcqm
