#include <doctest.h>

#include "support.hpp"
#include "tlcqm/errors.hpp"
#include "tlcqm/nnls.hpp"
#include "tlcqm/quantile_match.hpp"

using namespace tlcqm;

namespace {

std::vector<double> as_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

double objective_at(const Eigen::VectorXd& target, const SyntheticDesign& d, const Eigen::VectorXd& beta) {
  return empirical_objective(as_vec(target), as_vec(d.matrix() * beta));
}

// Design with one column per source sample vector, intercept first.
SyntheticDesign design_of(const std::vector<Eigen::VectorXd>& cols, Eigen::Index n0) {
  const Eigen::Index rows = cols.front().size();
  Eigen::MatrixXd v(rows, static_cast<Eigen::Index>(cols.size()) + 1);
  v.col(0).setOnes();
  for (std::size_t k = 0; k < cols.size(); ++k) v.col(static_cast<Eigen::Index>(k) + 1) = cols[k];
  return SyntheticDesign(v, n0, rows / n0);
}

// Same design with its blocks reordered so that block means of the first
// slope column follow the target ranks, as when generators track the target.
SyntheticDesign aligned_design_of(const Eigen::VectorXd& target, const std::vector<Eigen::VectorXd>& cols) {
  const Eigen::Index n0 = target.size();
  const SyntheticDesign plain = design_of(cols, n0);
  const Eigen::Index m = plain.draws_per_target();
  std::vector<Eigen::Index> by_mean(static_cast<std::size_t>(n0)), by_target(static_cast<std::size_t>(n0));
  std::iota(by_mean.begin(), by_mean.end(), Eigen::Index{0});
  std::iota(by_target.begin(), by_target.end(), Eigen::Index{0});
  const auto block_mean = [&](Eigen::Index b) { return plain.matrix().col(1).segment(b * m, m).mean(); };
  std::sort(by_mean.begin(), by_mean.end(), [&](auto a, auto b) { return block_mean(a) < block_mean(b); });
  std::sort(by_target.begin(), by_target.end(), [&](auto a, auto b) { return target(a) < target(b); });
  Eigen::MatrixXd v(plain.matrix().rows(), plain.matrix().cols());
  for (std::size_t r = 0; r < by_mean.size(); ++r) {
    v.middleRows(by_target[r] * m, m) = plain.matrix().middleRows(by_mean[r] * m, m);
  }
  return SyntheticDesign(v, n0, m);
}

// Exhaustive search over active sets for the nonnegative normal-equation
// problem; returns the feasible KKT point with the lowest objective.
Eigen::VectorXd nnls_by_enumeration(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                                    const std::vector<bool>& nonneg) {
  const int n = static_cast<int>(b.size());
  double best = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_x = Eigen::VectorXd::Zero(n);
  for (int mask = 0; mask < (1 << n); ++mask) {
    std::vector<int> free;
    bool ok = true;
    for (int j = 0; j < n; ++j) {
      if (mask & (1 << j)) {
        free.push_back(j);
      } else if (!nonneg[static_cast<std::size_t>(j)]) {
        ok = false;
      }
    }
    if (!ok) continue;
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    if (!free.empty()) {
      const auto k = static_cast<Eigen::Index>(free.size());
      Eigen::MatrixXd sub(k, k);
      Eigen::VectorXd rhs(k);
      for (Eigen::Index i = 0; i < k; ++i) {
        rhs(i) = b(free[i]);
        for (Eigen::Index j = 0; j < k; ++j) sub(i, j) = a(free[i], free[j]);
      }
      const Eigen::VectorXd s = sub.ldlt().solve(rhs);
      for (Eigen::Index i = 0; i < k; ++i) x(free[i]) = s(i);
    }
    bool feasible = true;
    for (int j = 0; j < n; ++j) feasible = feasible && (!nonneg[static_cast<std::size_t>(j)] || x(j) >= -1e-12);
    if (!feasible) continue;
    const double f = 0.5 * x.dot(a * x) - b.dot(x);
    if (f < best) {
      best = f;
      best_x = x;
    }
  }
  return best_x;
}

}  // namespace

TEST_CASE("empirical_objective examples") {
  CHECK(empirical_objective(std::vector<double>{0, 2}, std::vector<double>{2, 0}) == 0.0);
  CHECK(empirical_objective(std::vector<double>{0, 2}, std::vector<double>{1, 3}) == 1.0);
  CHECK(empirical_objective(std::vector<double>{0}, std::vector<double>{5, 5, 5}) == 25.0);
  CHECK_THROWS_AS(empirical_objective(std::vector<double>{0, 1}, std::vector<double>{1, 2, 3}), InvalidArgument);
  CHECK_THROWS_AS(empirical_objective(std::vector<double>{}, std::vector<double>{1}), InvalidArgument);
}

TEST_CASE("empirical_objective agrees with explicit ceil(r/M) pairing") {
  RngStream rng(3);
  for (int t = 0; t < 30; ++t) {
    const Eigen::Index n0 = 1 + t % 9, m = 1 + t % 5;
    const auto target = as_vec(testing::normal_vector(n0, rng));
    const auto preds = as_vec(testing::normal_vector(n0 * m, rng));
    CHECK(empirical_objective(target, preds) == doctest::Approx(testing::paired_gap(target, preds)).epsilon(1e-12));
  }
}

TEST_CASE("rearrangement inequalities hold exactly") {
  RngStream rng(99);
  for (int t = 0; t < 1000; ++t) {
    const auto len = static_cast<std::size_t>(1 + rng.uniform_index(50));
    std::vector<double> a(len), b(len);
    for (std::size_t i = 0; i < len; ++i) {
      a[i] = static_cast<double>(static_cast<int>(rng.uniform_index(2001)) - 1000);
      b[i] = static_cast<double>(static_cast<int>(rng.uniform_index(2001)) - 1000);
    }
    double l1 = 0, l2 = 0;
    for (std::size_t i = 0; i < len; ++i) {
      l1 += std::abs(a[i] - b[i]);
      l2 += (a[i] - b[i]) * (a[i] - b[i]);
    }
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double s1 = 0, s2 = 0;
    for (std::size_t i = 0; i < len; ++i) {
      s1 += std::abs(a[i] - b[i]);
      s2 += (a[i] - b[i]) * (a[i] - b[i]);
    }
    REQUIRE(s1 <= l1);
    REQUIRE(s2 <= l2);
  }
}

TEST_CASE("SyntheticDesign validation") {
  Eigen::MatrixXd v = Eigen::MatrixXd::Ones(6, 2);
  CHECK_NOTHROW(SyntheticDesign(v, 2, 3));
  CHECK_THROWS_AS(SyntheticDesign(v, 2, 2), InvalidArgument);
  CHECK_THROWS_AS(SyntheticDesign(Eigen::MatrixXd::Ones(6, 1), 2, 3), InvalidArgument);
  v(3, 0) = 0.5;
  CHECK_THROWS_AS(SyntheticDesign(v, 2, 3), InvalidArgument);
  v(3, 0) = 1.0;
  v(2, 1) = std::nan("");
  CHECK_THROWS_AS(SyntheticDesign(v, 2, 3), InvalidArgument);
}

TEST_CASE("location-scale recovery with a skewed law") {
  // Target 3 + 2E on the exponential quantile grid; predictions Exp(1).
  const Eigen::Index n0 = 400, m = 300;
  Eigen::VectorXd target(n0);
  for (Eigen::Index i = 0; i < n0; ++i) target(i) = 3.0 - 2.0 * std::log1p(-(i + 0.5) / n0);
  RngStream rng(17);
  const SyntheticDesign d = aligned_design_of(target, {testing::exponential_vector(n0 * m, rng)});
  const QuantileMatchFit fit = fit_quantile_match(target, d);
  CHECK(fit.converged);
  CHECK(fit.beta(0) == doctest::Approx(3.0).epsilon(0.05 / 3.0));
  CHECK(std::abs(fit.beta(1) - 2.0) < 0.05);
  CHECK(fit.constraint_mode == ConstraintMode::unconstrained);
}

TEST_CASE("two sources: target shares the law of source 1") {
  // Both exponential samples sit on stratified quantile grids.
  const Eigen::Index n0 = 1000, m = 20;
  RngStream rng(23);
  Eigen::VectorXd target(n0), source(n0 * m);
  for (Eigen::Index i = 0; i < n0; ++i) target(i) = -std::log1p(-(i + 0.5) / n0);
  for (Eigen::Index r = 0; r < n0 * m; ++r) source(r) = -std::log1p(-(r + 0.5) / (n0 * m));
  std::shuffle(source.begin(), source.end(), rng);
  const SyntheticDesign d = aligned_design_of(target, {source, testing::normal_vector(n0 * m, rng)});
  const QuantileMatchFit fit = fit_quantile_match(target, d);
  const double fitted = objective_at(target, d, fit.beta);
  CHECK(fitted < 0.01);

  // Grid-search oracle on a coarse lattice.
  double best = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_beta(3);
  for (int a = -2; a <= 2; ++a) {
    for (int b = 6; b <= 14; ++b) {
      for (int c = -2; c <= 2; ++c) {
        Eigen::VectorXd beta(3);
        beta << 0.1 * a, 0.1 * b, 0.1 * c;
        const double s = objective_at(target, d, beta);
        if (s < best) {
          best = s;
          best_beta = beta;
        }
      }
    }
  }
  CHECK(fitted <= best + 1e-12);
  CHECK((fit.beta - best_beta).cwiseAbs().maxCoeff() <= 0.1 + 1e-9);
  Eigen::VectorXd truth(3);
  truth << 0, 1, 0;
  CHECK((fit.beta - truth).cwiseAbs().maxCoeff() < 0.1);
}

TEST_CASE("nonnegative slopes agree with a constrained grid oracle") {
  const Eigen::Index n0 = 200, m = 30;
  RngStream rng(41);
  const Eigen::VectorXd source = testing::exponential_vector(n0 * m, rng);
  const Eigen::VectorXd target = -testing::exponential_vector(n0, rng);
  const SyntheticDesign d = aligned_design_of(target, {source});

  QuantileMatchOptions free_opts;
  const Eigen::VectorXd flipped = -target;
  const QuantileMatchFit unconstrained = fit_quantile_match(target, aligned_design_of(flipped, {source}), free_opts);
  CHECK(unconstrained.beta(1) < -0.8);

  QuantileMatchOptions opts;
  opts.mode = ConstraintMode::nonneg_slopes;
  const QuantileMatchFit fit = fit_quantile_match(target, d, opts);
  CHECK(fit.beta(1) >= 0.0);
  CHECK(fit.constraint_mode == ConstraintMode::nonneg_slopes);

  // For fixed slope the best intercept is the mean gap; scan slopes on [0, 2].
  double best = std::numeric_limits<double>::infinity();
  double best_slope = 0.0;
  for (int s = 0; s <= 2000; ++s) {
    Eigen::VectorXd beta(2);
    beta << 0.0, 0.001 * s;
    const Eigen::VectorXd preds = d.matrix() * beta;
    beta(0) = target.mean() - preds.mean();
    const double val = objective_at(target, d, beta);
    if (val < best) {
      best = val;
      best_slope = beta(1);
    }
  }
  CHECK(objective_at(target, d, fit.beta) <= best + 1e-6);
  CHECK(std::abs(fit.beta(1) - best_slope) < 0.01);

  // Symmetric source negated: the laws coincide, so the slope stays positive.
  const Eigen::VectorXd z = testing::normal_vector(n0 * m, rng);
  Eigen::VectorXd neg(n0);
  for (Eigen::Index i = 0; i < n0; ++i) neg(i) = -z(i * m);
  const QuantileMatchFit sym = fit_quantile_match(neg, design_of({z}, n0), opts);
  CHECK(sym.beta(1) >= 0.0);
  CHECK(std::abs(sym.beta(0)) < 0.2);
}

TEST_CASE("objective trace never increases") {
  RngStream rng(5);
  for (int t = 0; t < 40; ++t) {
    const Eigen::Index n0 = 5 + t, m = 1 + t % 7;
    const int k = 1 + t % 3;
    const Eigen::VectorXd target = testing::exponential_vector(n0, rng) * (1.0 + t % 4);
    std::vector<Eigen::VectorXd> cols;
    for (int j = 0; j < k; ++j) {
      cols.push_back(j % 2 ? testing::normal_vector(n0 * m, rng) : testing::exponential_vector(n0 * m, rng));
    }
    QuantileMatchOptions opts;
    opts.mode = t % 2 ? ConstraintMode::nonneg_slopes : ConstraintMode::unconstrained;
    const QuantileMatchFit fit = fit_quantile_match(target, design_of(cols, n0), opts);
    REQUIRE(fit.objective_trace.size() == static_cast<std::size_t>(fit.iterations) + 1);
    for (std::size_t i = 1; i < fit.objective_trace.size(); ++i) {
      REQUIRE(fit.objective_trace[i] <= fit.objective_trace[i - 1] + 1e-12);
    }
    if (opts.mode == ConstraintMode::nonneg_slopes) CHECK((fit.beta.tail(k).array() >= 0.0).all());
  }
}

TEST_CASE("permuting targets together with their design blocks leaves beta unchanged") {
  const Eigen::Index n0 = 60, m = 20;
  RngStream rng(8);
  const Eigen::VectorXd target = testing::exponential_vector(n0, rng);
  const Eigen::VectorXd c1 = testing::exponential_vector(n0 * m, rng);
  const Eigen::VectorXd c2 = testing::normal_vector(n0 * m, rng);
  const SyntheticDesign d = design_of({c1, c2}, n0);

  std::vector<Eigen::Index> perm(static_cast<std::size_t>(n0));
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  Eigen::VectorXd pt(n0);
  Eigen::MatrixXd pv(n0 * m, 3);
  for (Eigen::Index i = 0; i < n0; ++i) {
    const Eigen::Index src = perm[static_cast<std::size_t>(i)];
    pt(i) = target(src);
    // Also reverse the draw order inside each block.
    for (Eigen::Index j = 0; j < m; ++j) pv.row(i * m + j) = d.matrix().row(src * m + (m - 1 - j));
  }
  const QuantileMatchFit a = fit_quantile_match(target, d);
  const QuantileMatchFit b = fit_quantile_match(pt, SyntheticDesign(pv, n0, m));
  CHECK((a.beta - b.beta).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(a.iterations == b.iterations);
}

TEST_CASE("affine equivariance in unconstrained mode") {
  RngStream rng(12);
  for (int t = 0; t < 10; ++t) {
    const Eigen::Index n0 = 50, m = 10;
    const Eigen::VectorXd target = testing::exponential_vector(n0, rng);
    const SyntheticDesign d =
        design_of({testing::exponential_vector(n0 * m, rng), testing::normal_vector(n0 * m, rng)}, n0);
    const double a = 0.5 + 3.0 * rng.uniform();
    const double b = 10.0 * rng.normal();
    const QuantileMatchFit base = fit_quantile_match(target, d);
    const QuantileMatchFit moved = fit_quantile_match((a * target.array() + b).matrix(), d);
    Eigen::VectorXd expected = a * base.beta;
    expected(0) += b;
    CHECK((moved.beta - expected).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("degenerate designs") {
  const Eigen::Index n0 = 20, m = 5;
  RngStream rng(2);
  const Eigen::VectorXd target = testing::normal_vector(n0, rng);
  const Eigen::VectorXd c = testing::exponential_vector(n0 * m, rng);

  const QuantileMatchFit dup = fit_quantile_match(target, design_of({c, c}, n0));
  CHECK(dup.rank_deficient);
  CHECK(dup.beta.allFinite());
  CHECK(dup.beta(1) == doctest::Approx(dup.beta(2)));

  CHECK_THROWS_AS(fit_quantile_match(target, design_of({Eigen::VectorXd::Constant(n0 * m, 2.0)}, n0)),
                  InvalidArgument);
  Eigen::VectorXd bad = target;
  bad(3) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(fit_quantile_match(bad, design_of({c}, n0)), InvalidArgument);
  CHECK_THROWS_AS(fit_quantile_match(target.head(5), design_of({c}, n0)), InvalidArgument);
}

TEST_CASE("ridge option shrinks slopes") {
  const Eigen::Index n0 = 80, m = 10;
  RngStream rng(4);
  const Eigen::VectorXd target = 3.0 * testing::exponential_vector(n0, rng);
  const SyntheticDesign d = aligned_design_of(target, {testing::exponential_vector(n0 * m, rng)});
  QuantileMatchOptions opts;
  opts.ridge = 1.0;
  CHECK(fit_quantile_match(target, d, opts).beta(1) < fit_quantile_match(target, d).beta(1));
}

TEST_CASE("fit JSON round trip") {
  RngStream rng(4);
  const Eigen::Index n0 = 30, m = 4;
  const QuantileMatchFit fit =
      fit_quantile_match(testing::exponential_vector(n0, rng), design_of({testing::exponential_vector(n0 * m, rng)}, n0));
  const QuantileMatchFit back = QuantileMatchFit::from_json(fit.to_json());
  CHECK(back.beta == fit.beta);
  CHECK(back.objective_trace == fit.objective_trace);
  CHECK(back.iterations == fit.iterations);
  CHECK(back.converged == fit.converged);
}

TEST_CASE("nonnegative normal-equation solve matches subset enumeration") {
  RngStream rng(77);
  for (int t = 0; t < 200; ++t) {
    const int n = 2 + t % 4;
    Eigen::MatrixXd x(3 * n, n);
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = rng.normal();
    const Eigen::MatrixXd a = x.transpose() * x;
    const Eigen::VectorXd b = x.transpose() * testing::normal_vector(3 * n, rng);
    std::vector<bool> nonneg(static_cast<std::size_t>(n), true);
    nonneg[0] = t % 2 == 0;
    const NormalSolve got = solve_normal_nonneg(a, b, nonneg);
    const Eigen::VectorXd want = nnls_by_enumeration(a, b, nonneg);
    REQUIRE((got.x - want).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("minimum-norm solve on a singular system") {
  Eigen::MatrixXd a(2, 2);
  a << 1, 1, 1, 1;
  Eigen::VectorXd b(2);
  b << 2, 2;
  const NormalSolve s = solve_normal_min_norm(a, b);
  CHECK(s.rank_deficient);
  CHECK(s.x(0) == doctest::Approx(1.0));
  CHECK(s.x(1) == doctest::Approx(1.0));
}

TEST_CASE("population objective estimates") {
  const ScalarSampler std_normal = [](RngStream& r) { return r.normal(); };
  const VectorSampler v = [](RngStream& r) {
    Eigen::VectorXd out(2);
    out << 1.0, r.normal();
    return out;
  };
  Eigen::VectorXd beta(2);
  beta << 0.0, 1.0;
  CHECK(estimate_population_objective(beta, std_normal, v, 100000, RngStream(1)) < 0.05);

  const ScalarSampler shifted = [](RngStream& r) { return 3.0 + 2.0 * r.normal(); };
  CHECK(estimate_population_objective(beta, shifted, v, 100000, RngStream(2)) == doctest::Approx(10.0).epsilon(0.05));

  const double c = 2.5;
  const ScalarSampler scaled_t = [&](RngStream& r) { return c * (3.0 + 2.0 * r.normal()); };
  const VectorSampler scaled_v = [&](RngStream& r) { return Eigen::VectorXd(c * v(r)); };
  const double base = estimate_population_objective(beta, shifted, v, 20000, RngStream(3));
  const double scaled = estimate_population_objective(beta, scaled_t, scaled_v, 20000, RngStream(3));
  CHECK(scaled == doctest::Approx(c * c * base).epsilon(1e-9));

  CHECK_THROWS_AS(estimate_population_objective(beta, shifted, v, 99, RngStream(3)), InvalidArgument);
}

TEST_CASE("population gradient identity agrees with finite differences") {
  const ScalarSampler target = [](RngStream& r) { return 1.0 + 2.0 * r.normal(); };
  const VectorSampler v = [](RngStream& r) {
    Eigen::VectorXd out(2);
    out << 1.0, r.normal();
    return out;
  };
  Eigen::VectorXd beta(2);
  beta << 0.3, 1.2;
  const int n_mc = 200000;
  const Eigen::VectorXd g = estimate_population_gradient(beta, target, v, n_mc, RngStream(6));
  Eigen::VectorXd fd(2);
  for (int j = 0; j < 2; ++j) {
    Eigen::VectorXd up = beta, down = beta;
    up(j) += 1e-2;
    down(j) -= 1e-2;
    fd(j) = (estimate_population_objective(up, target, v, n_mc, RngStream(6)) -
             estimate_population_objective(down, target, v, n_mc, RngStream(6))) /
            2e-2;
  }
  CHECK((g - fd).norm() / fd.norm() < 5e-2);
}
