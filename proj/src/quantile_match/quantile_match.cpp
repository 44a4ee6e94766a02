#include "tlcqm/quantile_match.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <utility>

#include "tlcqm/errors.hpp"
#include "tlcqm/nnls.hpp"

namespace tlcqm {

namespace {

using json = nlohmann::json;

// (value, row) pairs sorted by value with ties broken by row index.
std::vector<std::pair<double, Eigen::Index>> ranked(const Eigen::VectorXd& values) {
  std::vector<std::pair<double, Eigen::Index>> order(static_cast<std::size_t>(values.size()));
  for (Eigen::Index r = 0; r < values.size(); ++r) order[static_cast<std::size_t>(r)] = {values(r), r};
  std::sort(order.begin(), order.end());
  return order;
}

double sorted_gap(const std::vector<double>& target_sorted,
                  const std::vector<std::pair<double, Eigen::Index>>& pred_sorted, Eigen::Index m) {
  double sum = 0.0;
  for (std::size_t r = 0; r < pred_sorted.size(); ++r) {
    const double diff = target_sorted[r / static_cast<std::size_t>(m)] - pred_sorted[r].first;
    sum += diff * diff;
  }
  return sum / static_cast<double>(pred_sorted.size());
}

}  // namespace

std::string to_string(ConstraintMode mode) {
  return mode == ConstraintMode::unconstrained ? "unconstrained" : "nonneg_slopes";
}

ConstraintMode constraint_mode_from_string(const std::string& name) {
  if (name == "unconstrained" || name == "none") return ConstraintMode::unconstrained;
  if (name == "nonneg_slopes" || name == "nonneg") return ConstraintMode::nonneg_slopes;
  throw InvalidArgument("unknown constraint mode '" + name + "'");
}

SyntheticDesign::SyntheticDesign(Eigen::MatrixXd v_hat, Eigen::Index n0, Eigen::Index draws_per_target)
    : v_hat_(std::move(v_hat)), n0_(n0), m_(draws_per_target) {
  if (n0_ < 1 || m_ < 1) throw InvalidArgument("synthetic design: n0 and M must be positive");
  if (v_hat_.rows() != n0_ * m_) {
    throw InvalidArgument("synthetic design: expected " + std::to_string(n0_ * m_) + " rows, got " +
                          std::to_string(v_hat_.rows()));
  }
  if (v_hat_.cols() < 2) throw InvalidArgument("synthetic design: need at least one source column");
  if (!v_hat_.allFinite()) throw InvalidArgument("synthetic design: non-finite entry");
  if ((v_hat_.col(0).array() != 1.0).any()) {
    throw InvalidArgument("synthetic design: column 0 must be the intercept (all ones)");
  }
}

std::string QuantileMatchFit::to_json() const {
  const json doc = {{"beta", std::vector<double>(beta.data(), beta.data() + beta.size())},
                    {"objective_trace", objective_trace},
                    {"iterations", iterations},
                    {"converged", converged},
                    {"constraint_mode", to_string(constraint_mode)},
                    {"rank_deficient", rank_deficient}};
  return doc.dump(1);
}

QuantileMatchFit QuantileMatchFit::from_json(const std::string& text) {
  const auto doc = json::parse(text);
  QuantileMatchFit fit;
  const auto b = doc.at("beta").get<std::vector<double>>();
  fit.beta = Eigen::Map<const Eigen::VectorXd>(b.data(), static_cast<Eigen::Index>(b.size()));
  fit.objective_trace = doc.at("objective_trace").get<std::vector<double>>();
  fit.iterations = doc.at("iterations").get<int>();
  fit.converged = doc.at("converged").get<bool>();
  fit.constraint_mode = constraint_mode_from_string(doc.at("constraint_mode").get<std::string>());
  fit.rank_deficient = doc.at("rank_deficient").get<bool>();
  return fit;
}

double empirical_objective(std::span<const double> target_y, std::span<const double> predictions) {
  const std::size_t n0 = target_y.size();
  if (n0 == 0 || predictions.empty() || predictions.size() % n0 != 0) {
    throw InvalidArgument("empirical_objective: prediction count must be a positive multiple of n0");
  }
  std::vector<double> t(target_y.begin(), target_y.end());
  std::vector<double> p(predictions.begin(), predictions.end());
  std::sort(t.begin(), t.end());
  std::sort(p.begin(), p.end());
  const std::size_t m = p.size() / n0;
  double sum = 0.0;
  for (std::size_t r = 0; r < p.size(); ++r) {
    const double diff = t[r / m] - p[r];
    sum += diff * diff;
  }
  return sum / static_cast<double>(p.size());
}

QuantileMatchFit fit_quantile_match(const Eigen::VectorXd& target_y, const SyntheticDesign& design,
                                    const QuantileMatchOptions& options) {
  const Eigen::Index n0 = design.n0();
  const Eigen::Index m = design.draws_per_target();
  const Eigen::MatrixXd& v = design.matrix();
  const Eigen::Index p = v.cols();
  const Eigen::Index rows = v.rows();
  if (target_y.size() != n0) throw InvalidArgument("quantile match: target size does not match design n0");
  if (n0 < 2) throw InvalidArgument("quantile match: need at least 2 target observations");
  if (!target_y.allFinite()) throw InvalidArgument("quantile match: non-finite target response");
  if (options.tol < 0.0 || options.max_iter < 0 || options.ridge < 0.0) {
    throw InvalidArgument("quantile match: invalid options");
  }
  bool any_varying = false;
  for (Eigen::Index k = 1; k < p; ++k) {
    if (v.col(k).maxCoeff() > v.col(k).minCoeff()) any_varying = true;
  }
  if (!any_varying) throw InvalidArgument("quantile match: every slope column is constant");

  const double inv_rows = 1.0 / static_cast<double>(rows);
  Eigen::MatrixXd gram = (v.transpose() * v) * inv_rows;
  for (Eigen::Index k = 1; k < p; ++k) gram(k, k) += options.ridge;

  std::vector<bool> nonneg(static_cast<std::size_t>(p), false);
  if (options.mode == ConstraintMode::nonneg_slopes) {
    for (Eigen::Index k = 1; k < p; ++k) nonneg[static_cast<std::size_t>(k)] = true;
  }

  QuantileMatchFit fit;
  fit.constraint_mode = options.mode;
  auto solve = [&](const Eigen::VectorXd& z) {
    const Eigen::VectorXd rhs = (v.transpose() * z) * inv_rows;
    const auto sol = options.mode == ConstraintMode::nonneg_slopes
                         ? solve_normal_nonneg(gram, rhs, nonneg)
                         : solve_normal_min_norm(gram, rhs);
    fit.rank_deficient = fit.rank_deficient || sol.rank_deficient;
    return sol.x;
  };
  auto penalty = [&](const Eigen::VectorXd& beta) {
    return options.ridge * beta.tail(p - 1).squaredNorm();
  };

  std::vector<double> y_sorted(target_y.data(), target_y.data() + n0);
  std::sort(y_sorted.begin(), y_sorted.end());

  // Least-squares start on the row-aligned replicated targets.
  Eigen::VectorXd z(rows);
  for (Eigen::Index i = 0; i < n0; ++i) z.segment(i * m, m).setConstant(target_y(i));
  Eigen::VectorXd beta = solve(z);

  auto order = ranked(v * beta);
  double objective = sorted_gap(y_sorted, order, m) + penalty(beta);
  fit.objective_trace.push_back(objective);

  for (int it = 0; it < options.max_iter; ++it) {
    // Pseudo-targets: the order statistic paired with each row's rank.
    for (std::size_t r = 0; r < order.size(); ++r) {
      z(order[r].second) = y_sorted[r / static_cast<std::size_t>(m)];
    }
    Eigen::VectorXd next = solve(z);
    auto next_order = ranked(v * next);
    const double next_objective = sorted_gap(y_sorted, next_order, m) + penalty(next);
    fit.objective_trace.push_back(next_objective);
    ++fit.iterations;
    const bool done = std::abs(next_objective - objective) < options.tol;
    beta = std::move(next);
    order = std::move(next_order);
    objective = next_objective;
    if (done) {
      fit.converged = true;
      break;
    }
  }
  fit.beta = std::move(beta);
  return fit;
}

namespace {

struct PopulationDraws {
  std::vector<double> target;
  Eigen::MatrixXd v;  // (K+1) x n_mc
};

PopulationDraws draw_population(Eigen::Index dim, const ScalarSampler& target_sampler,
                                const VectorSampler& v_sampler, int n_mc, RngStream& rng) {
  if (n_mc < 100) throw InvalidArgument("population objective: n_mc must be at least 100");
  PopulationDraws draws;
  draws.target.resize(static_cast<std::size_t>(n_mc));
  for (auto& t : draws.target) t = target_sampler(rng);
  draws.v.resize(dim, n_mc);
  for (int i = 0; i < n_mc; ++i) {
    Eigen::VectorXd vi = v_sampler(rng);
    if (vi.size() != dim) throw InvalidArgument("population objective: sampler dimension mismatch");
    draws.v.col(i) = vi;
  }
  return draws;
}

}  // namespace

double estimate_population_objective(const Eigen::VectorXd& beta, const ScalarSampler& target_sampler,
                                     const VectorSampler& v_sampler, int n_mc, RngStream rng) {
  const auto draws = draw_population(beta.size(), target_sampler, v_sampler, n_mc, rng);
  const Eigen::VectorXd pred = draws.v.transpose() * beta;
  return empirical_objective(draws.target, std::span<const double>(pred.data(), static_cast<std::size_t>(pred.size())));
}

Eigen::VectorXd estimate_population_gradient(const Eigen::VectorXd& beta,
                                             const ScalarSampler& target_sampler,
                                             const VectorSampler& v_sampler, int n_mc,
                                             RngStream rng) {
  auto draws = draw_population(beta.size(), target_sampler, v_sampler, n_mc, rng);
  std::sort(draws.target.begin(), draws.target.end());
  const auto order = ranked(draws.v.transpose() * beta);
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(beta.size());
  for (std::size_t r = 0; r < order.size(); ++r) {
    grad -= 2.0 * (draws.target[r] - order[r].first) * draws.v.col(order[r].second);
  }
  return grad / static_cast<double>(n_mc);
}

}  // namespace tlcqm
