#include <cmath>

#include "tlcqm/errors.hpp"
#include "tlcqm/kernels.hpp"
#include "tlcqm/learners.hpp"

namespace tlcqm {

WeightedTrainingSet::WeightedTrainingSet(Eigen::MatrixXd features, Eigen::VectorXd responses,
                                         Eigen::VectorXd weights)
    : features_(std::move(features)), responses_(std::move(responses)), weights_(std::move(weights)) {
  if (features_.rows() != responses_.size() || weights_.size() != responses_.size()) {
    throw InvalidArgument("weighted training set: row counts disagree");
  }
  if (responses_.size() == 0) throw InvalidArgument("weighted training set: no rows");
  if (!features_.allFinite() || !responses_.allFinite() || !weights_.allFinite()) {
    throw InvalidArgument("weighted training set: non-finite entry");
  }
  if ((weights_.array() < 0.0).any()) throw InvalidArgument("weighted training set: negative weight");
  if (!(weights_.maxCoeff() > 0.0)) throw InvalidArgument("weighted training set: all weights are zero");
}

WeightedTrainingSet WeightedTrainingSet::unweighted(const DomainDataset& data) {
  return WeightedTrainingSet(data.features(), data.responses(), Eigen::VectorXd::Ones(data.size()));
}

WeightedTrainingSet WeightedTrainingSet::subset(std::span<const Eigen::Index> rows) const {
  const auto n = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd x(n, features_.cols());
  Eigen::VectorXd y(n), w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto r = rows[static_cast<std::size_t>(i)];
    x.row(i) = features_.row(r);
    y(i) = responses_(r);
    w(i) = weights_(r);
  }
  return WeightedTrainingSet(std::move(x), std::move(y), std::move(w));
}

KrrModel::KrrModel(Eigen::MatrixXd support, Eigen::VectorXd alpha, double bandwidth, double lambda)
    : support_(std::move(support)), alpha_(std::move(alpha)), bandwidth_(bandwidth), lambda_(lambda) {
  if (support_.rows() != alpha_.size()) throw InvalidArgument("krr model: support/alpha mismatch");
}

Eigen::VectorXd KrrModel::predict(const Eigen::MatrixXd& features) const {
  if (features.cols() != support_.cols()) throw InvalidArgument("krr predict: dimension mismatch");
  Eigen::VectorXd out(features.rows());
  // Blocked to bound the cross-Gram memory.
  constexpr Eigen::Index kBlock = 2048;
  for (Eigen::Index start = 0; start < features.rows(); start += kBlock) {
    const Eigen::Index rows = std::min(kBlock, features.rows() - start);
    out.segment(start, rows) = rbf_gram(features.middleRows(start, rows), support_, bandwidth_) * alpha_;
  }
  return out;
}

KrrModel fit_weighted_krr(const WeightedTrainingSet& data, double lambda, double bandwidth) {
  if (!(lambda > 0.0)) throw InvalidArgument("krr: lambda must be positive");
  const Eigen::Index n = data.size();
  const Eigen::VectorXd sw = data.weights().cwiseSqrt();
  Eigen::MatrixXd a = rbf_gram(data.features(), data.features(), bandwidth);
  a = sw.asDiagonal() * a * sw.asDiagonal();
  a.diagonal().array() += static_cast<double>(n) * lambda;
  const Eigen::VectorXd rhs = sw.cwiseProduct(data.responses());

  Eigen::VectorXd gamma;
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() == Eigen::Success) {
    gamma = llt.solve(rhs);
  } else {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
    if (ldlt.info() != Eigen::Success) {
      throw NumericalError("krr: linear solve failed (reciprocal condition estimate " +
                           std::to_string(ldlt.rcond()) + ")");
    }
    gamma = ldlt.solve(rhs);
  }
  if (!gamma.allFinite()) throw NumericalError("krr: non-finite solution");
  return KrrModel(data.features(), sw.cwiseProduct(gamma), bandwidth, lambda);
}

double krr_bandwidth(const Eigen::MatrixXd& features) {
  if (features.rows() < 2) return 1.0;
  const double h = median_pairwise_distance(features);
  return h > 0.0 ? h : 1.0;
}

double evaluate_mse(const Regressor& model, const Eigen::MatrixXd& features,
                    const Eigen::VectorXd& responses) {
  if (responses.size() == 0) throw InvalidArgument("evaluate_mse: empty test set");
  if (features.rows() != responses.size()) throw InvalidArgument("evaluate_mse: row mismatch");
  return (responses - model.predict(features)).squaredNorm() / static_cast<double>(responses.size());
}

double evaluate_mse(const Regressor& model, const DomainDataset& test) {
  return evaluate_mse(model, test.features(), test.responses());
}

}  // namespace tlcqm
