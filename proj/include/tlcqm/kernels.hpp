#pragma once

#include <Eigen/Dense>

namespace tlcqm {

/// Gaussian RBF Gram matrix, entry (i, j) = exp(-|a_i - b_j|^2 / (2 h^2)).
Eigen::MatrixXd rbf_gram(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double bandwidth);

/// Median of the Euclidean distances over all unordered pairs of rows
/// (mean of the two middle values for an even count). With more than
/// `max_rows` rows an evenly spaced subset of rows is used.
double median_pairwise_distance(const Eigen::MatrixXd& points, Eigen::Index max_rows = 4000);

/// Median heuristic bandwidth on the pooled rows of `a` and `b`; falls back to
/// 1 when every pooled point coincides.
double median_heuristic(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

}  // namespace tlcqm
