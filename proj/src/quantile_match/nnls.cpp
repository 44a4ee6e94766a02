#include "tlcqm/nnls.hpp"

#include <cmath>

#include "tlcqm/errors.hpp"

namespace tlcqm {

namespace {

// Minimum-norm solve restricted to the coordinates in `active`; others are 0.
Eigen::VectorXd solve_restricted(const Eigen::MatrixXd& gram, const Eigen::VectorXd& rhs,
                                 const std::vector<bool>& active, bool& rank_deficient) {
  const Eigen::Index n = rhs.size();
  std::vector<Eigen::Index> idx;
  for (Eigen::Index j = 0; j < n; ++j) {
    if (active[static_cast<std::size_t>(j)]) idx.push_back(j);
  }
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  if (idx.empty()) return x;
  const auto k = static_cast<Eigen::Index>(idx.size());
  Eigen::MatrixXd a(k, k);
  Eigen::VectorXd b(k);
  for (Eigen::Index r = 0; r < k; ++r) {
    b(r) = rhs(idx[static_cast<std::size_t>(r)]);
    for (Eigen::Index c = 0; c < k; ++c) a(r, c) = gram(idx[static_cast<std::size_t>(r)], idx[static_cast<std::size_t>(c)]);
  }
  const auto sol = solve_normal_min_norm(a, b);
  rank_deficient = rank_deficient || sol.rank_deficient;
  for (Eigen::Index r = 0; r < k; ++r) x(idx[static_cast<std::size_t>(r)]) = sol.x(r);
  return x;
}

}  // namespace

NormalSolve solve_normal_min_norm(const Eigen::MatrixXd& gram, const Eigen::VectorXd& rhs) {
  if (gram.rows() != gram.cols() || gram.rows() != rhs.size()) {
    throw InvalidArgument("normal solve: shape mismatch");
  }
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod;
  // The Gram matrix squares the condition number of the design.
  cod.setThreshold(1e-13);
  cod.compute(gram);
  NormalSolve out;
  out.x = cod.solve(rhs);
  out.rank_deficient = cod.rank() < gram.rows();
  out.iterations = 1;
  return out;
}

NormalSolve solve_normal_nonneg(const Eigen::MatrixXd& gram, const Eigen::VectorXd& rhs,
                                const std::vector<bool>& nonneg) {
  const Eigen::Index n = rhs.size();
  if (gram.rows() != n || gram.cols() != n || static_cast<Eigen::Index>(nonneg.size()) != n) {
    throw InvalidArgument("nnls: shape mismatch");
  }
  const double tol = 1e-12 * std::max(1.0, rhs.cwiseAbs().maxCoeff());

  NormalSolve out;
  // Passive set: free coordinates always, constrained ones once released.
  std::vector<bool> passive(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < n; ++j) passive[static_cast<std::size_t>(j)] = !nonneg[static_cast<std::size_t>(j)];
  Eigen::VectorXd x = solve_restricted(gram, rhs, passive, out.rank_deficient);

  const int max_outer = 3 * static_cast<int>(n) + 10;
  for (int outer = 0; outer < max_outer; ++outer) {
    ++out.iterations;
    const Eigen::VectorXd w = rhs - gram * x;
    Eigen::Index enter = -1;
    double best = tol;
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto sj = static_cast<std::size_t>(j);
      if (nonneg[sj] && !passive[sj] && w(j) > best) {
        best = w(j);
        enter = j;
      }
    }
    if (enter < 0) break;
    passive[static_cast<std::size_t>(enter)] = true;

    for (int inner = 0; inner <= static_cast<int>(n); ++inner) {
      const Eigen::VectorXd s = solve_restricted(gram, rhs, passive, out.rank_deficient);
      double alpha = 1.0;
      bool feasible = true;
      for (Eigen::Index j = 0; j < n; ++j) {
        const auto sj = static_cast<std::size_t>(j);
        if (nonneg[sj] && passive[sj] && s(j) <= 0.0) {
          feasible = false;
          const double denom = x(j) - s(j);
          if (denom > 0.0) alpha = std::min(alpha, x(j) / denom);
        }
      }
      if (feasible) {
        x = s;
        break;
      }
      x += alpha * (s - x);
      for (Eigen::Index j = 0; j < n; ++j) {
        const auto sj = static_cast<std::size_t>(j);
        if (nonneg[sj] && passive[sj] && x(j) <= tol) {
          passive[sj] = false;
          x(j) = 0.0;
        }
      }
    }
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    if (nonneg[static_cast<std::size_t>(j)] && x(j) < 0.0) x(j) = 0.0;
  }
  out.x = std::move(x);
  return out;
}

}  // namespace tlcqm
