#include "tlcqm/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "tlcqm/errors.hpp"

namespace tlcqm {

Eigen::MatrixXd rbf_gram(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double bandwidth) {
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) {
    throw InvalidArgument("rbf_gram: bandwidth must be positive and finite");
  }
  if (a.cols() != b.cols()) throw InvalidArgument("rbf_gram: dimension mismatch");
  const Eigen::VectorXd an = a.rowwise().squaredNorm();
  const Eigen::VectorXd bn = b.rowwise().squaredNorm();
  Eigen::MatrixXd d2 = -2.0 * (a * b.transpose());
  d2.colwise() += an;
  d2.rowwise() += bn.transpose();
  const double scale = -1.0 / (2.0 * bandwidth * bandwidth);
  return (d2.cwiseMax(0.0) * scale).array().exp();
}

double median_pairwise_distance(const Eigen::MatrixXd& points, Eigen::Index max_rows) {
  Eigen::Index n = points.rows();
  if (n < 2) throw InvalidArgument("median distance: need at least 2 points");
  std::vector<Eigen::Index> rows;
  if (n > max_rows) {
    for (Eigen::Index k = 0; k < max_rows; ++k) rows.push_back(k * n / max_rows);
  } else {
    for (Eigen::Index k = 0; k < n; ++k) rows.push_back(k);
  }
  n = static_cast<Eigen::Index>(rows.size());
  std::vector<double> dist;
  dist.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      dist.push_back((points.row(rows[static_cast<std::size_t>(i)]) - points.row(rows[static_cast<std::size_t>(j)])).norm());
    }
  }
  const std::size_t mid = dist.size() / 2;
  std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(mid), dist.end());
  const double upper = dist[mid];
  if (dist.size() % 2 == 1) return upper;
  const double lower = *std::max_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

double median_heuristic(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.cols() != b.cols()) throw InvalidArgument("median heuristic: dimension mismatch");
  Eigen::MatrixXd pooled(a.rows() + b.rows(), a.cols());
  pooled << a, b;
  const double h = median_pairwise_distance(pooled);
  return h > 0.0 ? h : 1.0;
}

}  // namespace tlcqm
