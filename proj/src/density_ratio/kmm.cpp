#include "tlcqm/density_ratio.hpp"

#include <algorithm>
#include <cmath>
#include <vector>
#include <fstream>

#include "tlcqm/csv.hpp"
#include "tlcqm/errors.hpp"
#include "tlcqm/kernels.hpp"

namespace tlcqm {

namespace {

constexpr double kFeasibilityTol = 1e-6;

Eigen::VectorXd project_slab(const Eigen::VectorXd& v, const BoxSlab& set) {
  const double s = v.sum();
  const double n = static_cast<double>(v.size());
  if (s > set.upper_sum) return v.array() - (s - set.upper_sum) / n;
  if (s < set.lower_sum) return v.array() + (set.lower_sum - s) / n;
  return v;
}

Eigen::VectorXd project_box(const Eigen::VectorXd& v, double upper) {
  return v.cwiseMax(0.0).cwiseMin(upper);
}

// Largest eigenvalue of a symmetric PSD matrix by power iteration.
double power_iteration(const Eigen::MatrixXd& a, int iterations) {
  Eigen::VectorXd x = Eigen::VectorXd::Ones(a.rows()).normalized();
  double lambda = 0.0;
  for (int k = 0; k < iterations; ++k) {
    Eigen::VectorXd y = a * x;
    const double norm = y.norm();
    if (norm == 0.0) return 0.0;
    lambda = x.dot(y);
    x = y / norm;
  }
  return std::max(lambda, (a * x).norm());
}

}  // namespace

void KmmConfig::validate() const {
  if (!(B_zeta > 0.0)) throw InvalidArgument("kmm: B_zeta must be positive");
  if (xi && !(*xi >= 0.0)) throw InvalidArgument("kmm: xi must be nonnegative");
  if (bandwidth && !(*bandwidth > 0.0)) throw InvalidArgument("kmm: bandwidth must be positive");
  if (max_iter < 1 || dykstra_iters < 1 || power_iters < 1) {
    throw InvalidArgument("kmm: iteration counts must be positive");
  }
  if (!(tol > 0.0)) throw InvalidArgument("kmm: tol must be positive");
}

double KmmConfig::resolved_xi(Eigen::Index n_source) const {
  return xi ? *xi : 0.05 * B_zeta / std::sqrt(static_cast<double>(n_source));
}

bool BoxSlab::contains(const Eigen::VectorXd& z, double tol) const {
  if (z.size() == 0) return true;
  if (z.minCoeff() < -tol || z.maxCoeff() > upper + tol) return false;
  const double s = z.sum();
  return s >= lower_sum - tol && s <= upper_sum + tol;
}

Eigen::VectorXd project_box_slab_exact(const Eigen::VectorXd& v, const BoxSlab& set) {
  const double upper = set.upper;
  const auto clipped = [&](double tau) { return (v.array() - tau).max(0.0).min(upper).matrix().eval(); };
  const double s0 = clipped(0.0).sum();
  if (s0 >= set.lower_sum && s0 <= set.upper_sum) return clipped(0.0);
  const double n = static_cast<double>(v.size());
  const double goal = std::clamp(s0 > set.upper_sum ? set.upper_sum : set.lower_sum, 0.0, n * upper);

  // The clipped sum is piecewise linear and non-increasing in tau, with kinks
  // at v_i and v_i - upper.
  std::vector<double> knots;
  knots.reserve(static_cast<std::size_t>(2 * v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    knots.push_back(v(i));
    knots.push_back(v(i) - upper);
  }
  std::sort(knots.begin(), knots.end());
  std::size_t lo = 0, hi = knots.size() - 1;
  if (clipped(knots[lo]).sum() <= goal) return clipped(knots[lo]);
  if (clipped(knots[hi]).sum() >= goal) return clipped(knots[hi]);
  while (hi - lo > 1) {
    const std::size_t mid = (lo + hi) / 2;
    (clipped(knots[mid]).sum() >= goal ? lo : hi) = mid;
  }
  const double t0 = knots[lo], t1 = knots[hi];
  const double f0 = clipped(t0).sum(), f1 = clipped(t1).sum();
  const double tau = f0 == f1 ? t0 : t0 + (f0 - goal) * (t1 - t0) / (f0 - f1);
  return clipped(tau);
}

Eigen::VectorXd project_box_slab(const Eigen::VectorXd& v, const BoxSlab& set, int iterations) {
  Eigen::VectorXd x = v;
  Eigen::VectorXd p = Eigen::VectorXd::Zero(v.size());
  Eigen::VectorXd q = Eigen::VectorXd::Zero(v.size());
  for (int k = 0; k < iterations; ++k) {
    const Eigen::VectorXd y = project_slab(x + p, set);
    p = x + p - y;
    Eigen::VectorXd next = project_box(y + q, set.upper);
    q = y + q - next;
    const double change = (next - x).cwiseAbs().maxCoeff();
    x = std::move(next);
    if (change <= 1e-14 * std::max(1.0, x.cwiseAbs().maxCoeff()) && set.contains(x, 1e-12)) break;
  }
  return x;
}

double kmm_objective(const Eigen::MatrixXd& gram, const Eigen::VectorXd& kappa,
                     const Eigen::VectorXd& zeta) {
  const double n = static_cast<double>(zeta.size());
  return (zeta.dot(gram * zeta) - 2.0 * zeta.dot(kappa)) / (n * n);
}

DensityRatioWeights estimate_weights(const Eigen::MatrixXd& source, const Eigen::MatrixXd& target,
                                     const KmmConfig& config) {
  config.validate();
  const Eigen::Index n = source.rows();
  const Eigen::Index n0 = target.rows();
  if (source.cols() != target.cols()) {
    throw InvalidArgument("kmm: source has " + std::to_string(source.cols()) +
                          " features, target has " + std::to_string(target.cols()));
  }
  if (n < 2) throw InvalidArgument("kmm: need at least 2 source points");
  if (n0 < 1) throw InvalidArgument("kmm: need at least 1 target point");

  DensityRatioWeights out;
  out.bandwidth = config.bandwidth ? *config.bandwidth : median_heuristic(source, target);
  out.xi = config.resolved_xi(n);

  const Eigen::MatrixXd gram = rbf_gram(source, source, out.bandwidth);
  const Eigen::VectorXd kappa =
      (static_cast<double>(n) / static_cast<double>(n0)) * rbf_gram(source, target, out.bandwidth).rowwise().sum();

  const double nd = static_cast<double>(n);
  const BoxSlab set{config.B_zeta, nd - nd * out.xi, nd + nd * out.xi};
  const double lipschitz = power_iteration((2.0 / (nd * nd)) * gram, config.power_iters);
  const double step = lipschitz > 0.0 ? 1.0 / lipschitz : 1.0;

  Eigen::VectorXd zeta = project_box_slab(Eigen::VectorXd::Ones(n), set, config.dykstra_iters);
  if (!set.contains(zeta, 1e-9)) zeta = project_box_slab_exact(Eigen::VectorXd::Ones(n), set);
  for (int it = 0; it < config.max_iter; ++it) {
    const Eigen::VectorXd grad = (2.0 / (nd * nd)) * (gram * zeta - kappa);
    const Eigen::VectorXd moved = zeta - step * grad;
    Eigen::VectorXd next = project_box_slab(moved, set, config.dykstra_iters);
    if (!set.contains(next, 1e-9)) next = project_box_slab_exact(moved, set);
    const double change = (next - zeta).cwiseAbs().maxCoeff();
    zeta = std::move(next);
    out.iterations = it + 1;
    if (change < config.tol) {
      out.converged = true;
      break;
    }
  }
  out.objective_value = kmm_objective(gram, kappa, zeta);
  out.feasible = set.contains(zeta, kFeasibilityTol);
  out.zeta = std::move(zeta);
  return out;
}

DensityRatioWeights estimate_weights(const DomainDataset& source, const DomainDataset& target,
                                     const KmmConfig& config) {
  return estimate_weights(source.features(), target.features(), config);
}

void write_weights_csv(const std::string& path, const DensityRatioWeights& weights) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "row,zeta\n";
  for (Eigen::Index i = 0; i < weights.zeta.size(); ++i) {
    out << i << ',' << csv::format_number(weights.zeta(i)) << '\n';
  }
}

}  // namespace tlcqm
