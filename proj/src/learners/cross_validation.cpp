#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <numeric>

#include "tlcqm/errors.hpp"
#include "tlcqm/kernels.hpp"
#include "tlcqm/learners.hpp"
#include "tlcqm/parallel.hpp"

namespace tlcqm {

namespace {

int total_units(const Candidate& c) { return std::accumulate(c.hidden.begin(), c.hidden.end(), 0); }

// Weighted KRR dual solve given a precomputed training Gram matrix.
Eigen::VectorXd krr_alpha(const Eigen::MatrixXd& gram, const WeightedTrainingSet& data, double lambda) {
  const Eigen::VectorXd sw = data.weights().cwiseSqrt();
  Eigen::MatrixXd a = sw.asDiagonal() * gram * sw.asDiagonal();
  a.diagonal().array() += static_cast<double>(data.size()) * lambda;
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("krr: Cholesky factorization failed in cross-validation");
  }
  return sw.cwiseProduct(llt.solve(sw.cwiseProduct(data.responses())));
}

}  // namespace

std::string to_string(LearnerKind kind) { return kind == LearnerKind::krr ? "krr" : "mlp"; }

LearnerKind learner_kind_from_string(const std::string& name) {
  if (name == "krr") return LearnerKind::krr;
  if (name == "mlp" || name == "nn") return LearnerKind::mlp;
  throw InvalidArgument("unknown learner '" + name + "'");
}

std::string Candidate::label() const {
  if (kind == LearnerKind::krr) return fmt::format("krr(lambda={:.6g})", lambda);
  return fmt::format("mlp(hidden=({}),lr={:g},epochs={})", fmt::join(hidden, ","), learning_rate, epochs);
}

bool more_regularized(const Candidate& a, const Candidate& b) {
  if (a.kind == LearnerKind::krr) return a.lambda > b.lambda;
  const int ua = total_units(a);
  const int ub = total_units(b);
  if (ua != ub) return ua < ub;
  return a.learning_rate < b.learning_rate;
}

std::vector<double> krr_penalty_grid(Eigen::Index n) {
  if (n < 1) throw InvalidArgument("krr grid: n must be positive");
  std::vector<double> grid;
  for (int e = -2; e <= 6; ++e) grid.push_back(std::pow(3.0, e) * 0.1 / static_cast<double>(n));
  return grid;
}

LearnerGrid LearnerGrid::krr(Eigen::Index n) { return krr(krr_penalty_grid(n)); }

LearnerGrid LearnerGrid::krr(const std::vector<double>& lambdas) {
  LearnerGrid grid;
  grid.kind = LearnerKind::krr;
  for (double l : lambdas) {
    Candidate c;
    c.kind = LearnerKind::krr;
    c.lambda = l;
    grid.candidates.push_back(c);
  }
  return grid;
}

LearnerGrid LearnerGrid::mlp(int epochs) { return mlp({{10}, {50}, {100}}, {1e-4, 1e-3, 1e-2}, epochs); }

LearnerGrid LearnerGrid::mlp(const std::vector<std::vector<int>>& hidden,
                             const std::vector<double>& learning_rates, int epochs) {
  LearnerGrid grid;
  grid.kind = LearnerKind::mlp;
  for (const auto& h : hidden) {
    for (double lr : learning_rates) {
      Candidate c;
      c.kind = LearnerKind::mlp;
      c.hidden = h;
      c.learning_rate = lr;
      c.epochs = epochs;
      grid.candidates.push_back(c);
    }
  }
  return grid;
}

std::string CvReport::to_json() const {
  nlohmann::json cands = nlohmann::json::array();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    nlohmann::json c = {{"label", candidates[i].label()}, {"mean_validation_mse", mean_mse[i]}};
    if (kind == LearnerKind::krr) {
      c["lambda"] = candidates[i].lambda;
    } else {
      c["hidden"] = candidates[i].hidden;
      c["learning_rate"] = candidates[i].learning_rate;
      c["epochs"] = candidates[i].epochs;
    }
    cands.push_back(std::move(c));
  }
  const nlohmann::json doc = {{"learner", to_string(kind)},
                              {"folds", folds},
                              {"bandwidth", bandwidth},
                              {"candidates", cands},
                              {"chosen", chosen},
                              {"chosen_label", candidates.empty() ? "" : candidates[chosen].label()}};
  return doc.dump(1);
}

std::unique_ptr<Regressor> fit_candidate(const WeightedTrainingSet& data, const Candidate& candidate,
                                         double bandwidth, RngStream& rng) {
  if (candidate.kind == LearnerKind::krr) {
    return std::make_unique<KrrModel>(fit_weighted_krr(data, candidate.lambda, bandwidth));
  }
  return std::make_unique<MlpRegressor>(
      fit_weighted_mlp(data, candidate.hidden, candidate.learning_rate, candidate.epochs, rng));
}

CvReport cross_validate(const WeightedTrainingSet& data, const LearnerGrid& grid, int folds,
                        RngStream& rng) {
  const Eigen::Index n = data.size();
  if (folds < 2) throw InvalidArgument("cross_validate: need at least 2 folds");
  if (folds > n) {
    throw InvalidArgument(fmt::format("cross_validate: {} folds but only {} rows", folds, n));
  }
  if (grid.candidates.empty()) throw InvalidArgument("cross_validate: empty grid");
  for (const auto& c : grid.candidates) {
    if (c.kind != grid.kind) throw InvalidArgument("cross_validate: mixed learner kinds in grid");
  }

  std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  const RngStream fit_streams = rng.child(0x6376);

  CvReport report;
  report.kind = grid.kind;
  report.candidates = grid.candidates;
  report.folds = folds;
  report.bandwidth = grid.kind == LearnerKind::krr ? krr_bandwidth(data.features()) : 0.0;

  struct Fold {
    std::vector<Eigen::Index> train, valid;
  };
  std::vector<Fold> split(static_cast<std::size_t>(folds));
  for (int f = 0; f < folds; ++f) {
    const Eigen::Index lo = f * n / folds;
    const Eigen::Index hi = (f + 1) * n / folds;
    for (Eigen::Index p = 0; p < n; ++p) {
      (p >= lo && p < hi ? split[f].valid : split[f].train).push_back(perm[static_cast<std::size_t>(p)]);
    }
  }

  const std::size_t nc = grid.candidates.size();
  // sse[c][f]: validation sum of squared errors.
  std::vector<std::vector<double>> sse(nc, std::vector<double>(static_cast<std::size_t>(folds), 0.0));

  if (grid.kind == LearnerKind::krr) {
    parallel_for(static_cast<std::size_t>(folds), [&](std::size_t f) {
      const auto train = data.subset(split[f].train);
      const auto valid = data.subset(split[f].valid);
      const Eigen::MatrixXd gram = rbf_gram(train.features(), train.features(), report.bandwidth);
      const Eigen::MatrixXd cross = rbf_gram(valid.features(), train.features(), report.bandwidth);
      for (std::size_t c = 0; c < nc; ++c) {
        const Eigen::VectorXd alpha = krr_alpha(gram, train, grid.candidates[c].lambda);
        sse[c][f] = (valid.responses() - cross * alpha).squaredNorm();
      }
    });
  } else {
    parallel_for(nc * static_cast<std::size_t>(folds), [&](std::size_t task) {
      const std::size_t c = task / static_cast<std::size_t>(folds);
      const std::size_t f = task % static_cast<std::size_t>(folds);
      const auto train = data.subset(split[f].train);
      const auto valid = data.subset(split[f].valid);
      RngStream stream = fit_streams.child(c, f);
      const auto model = fit_candidate(train, grid.candidates[c], report.bandwidth, stream);
      sse[c][f] = (valid.responses() - model->predict(valid.features())).squaredNorm();
    });
  }

  report.mean_mse.resize(nc);
  for (std::size_t c = 0; c < nc; ++c) {
    double mean = 0.0;
    for (int f = 0; f < folds; ++f) {
      mean += sse[c][f] / static_cast<double>(split[f].valid.size());
    }
    report.mean_mse[c] = mean / folds;
  }

  const double best = *std::min_element(report.mean_mse.begin(), report.mean_mse.end());
  const double slack = 1e-12 * std::max(1.0, std::abs(best));
  bool have = false;
  for (std::size_t c = 0; c < nc; ++c) {
    if (report.mean_mse[c] > best + slack) continue;
    if (!have || more_regularized(grid.candidates[c], grid.candidates[report.chosen])) {
      report.chosen = c;
      have = true;
    }
  }
  return report;
}

TunedModel tune_and_fit(const WeightedTrainingSet& data, const LearnerGrid& grid, int folds,
                        RngStream& rng) {
  TunedModel out;
  out.report = cross_validate(data, grid, folds, rng);
  RngStream final_stream = rng.child(0x66696e);
  out.model = fit_candidate(data, out.report.selected(), out.report.bandwidth, final_stream);
  return out;
}

}  // namespace tlcqm
