#include <algorithm>
#include <cmath>
#include <numeric>

#include "tlcqm/errors.hpp"
#include "tlcqm/learners.hpp"

namespace tlcqm {

MlpRegressor::MlpRegressor(nn::Mlp net, double response_center, double response_scale,
                           std::vector<double> loss_trace)
    : net_(std::move(net)),
      center_(response_center),
      scale_(response_scale),
      loss_trace_(std::move(loss_trace)) {}

Eigen::VectorXd MlpRegressor::predict(const Eigen::MatrixXd& features) const {
  if (features.cols() != net_.input_dim()) throw InvalidArgument("mlp predict: dimension mismatch");
  return (center_ + scale_ * net_.forward(features.transpose()).array()).matrix().transpose();
}

MlpRegressor fit_weighted_mlp(const WeightedTrainingSet& data, const std::vector<int>& hidden,
                              double learning_rate, int epochs, RngStream& rng, int batch_size) {
  const Eigen::Index n = data.size();
  if (n < 2) throw InvalidArgument("mlp: need at least 2 rows");
  if (epochs < 1) throw InvalidArgument("mlp: epochs must be positive");
  const Eigen::VectorXd& w = data.weights();
  const double w_total = w.sum();

  // Weighted centering and scaling of the response; zero-weight rows are inert.
  const double center = w.dot(data.responses()) / w_total;
  const double var = w.dot((data.responses().array() - center).square().matrix()) / w_total;
  const double scale = std::sqrt(var) > 1e-12 * (1.0 + std::abs(center)) ? std::sqrt(var) : 1.0;
  const Eigen::VectorXd y = (data.responses().array() - center) / scale;

  nn::Mlp net(data.features().cols(), hidden, rng);
  nn::Adam adam(net, learning_rate);
  const Eigen::Index batch = nn::batch_size_for(n, batch_size);
  const Eigen::MatrixXd xt = data.features().transpose();

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::vector<double> trace;
  trace.reserve(static_cast<std::size_t>(epochs));

  nn::Mlp::Tape tape;
  nn::LayerParams grads;
  Eigen::MatrixXd xb;
  Eigen::VectorXd yb, wb;
  for (int epoch = 1; epoch <= epochs; ++epoch) {
    if (batch < n) std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (Eigen::Index start = 0; start < n; start += batch) {
      const Eigen::Index b = std::min(batch, n - start);
      if (b == n) {
        xb = xt;
        yb = y;
        wb = w;
      } else {
        xb.resize(xt.rows(), b);
        yb.resize(b);
        wb.resize(b);
        for (Eigen::Index i = 0; i < b; ++i) {
          const auto src = order[static_cast<std::size_t>(start + i)];
          xb.col(i) = xt.col(src);
          yb(i) = y(src);
          wb(i) = w(src);
        }
      }
      const double wb_total = wb.sum();
      if (wb_total <= 0.0) continue;
      const Eigen::RowVectorXd f = net.forward(xb, tape);
      const Eigen::VectorXd resid = yb - f.transpose();
      const double weighted_sq = wb.dot(resid.cwiseProduct(resid));
      if (!std::isfinite(weighted_sq)) throw TrainingDivergence(epoch, learning_rate);
      loss_sum += weighted_sq;
      const Eigen::RowVectorXd grad_out = (-2.0 / wb_total) * wb.cwiseProduct(resid).transpose();
      net.backward(tape, grad_out, grads);
      adam.step(net, grads);
    }
    trace.push_back(scale * scale * loss_sum / w_total);
  }
  if (!net.all_finite()) throw TrainingDivergence(epochs, learning_rate);
  return MlpRegressor(std::move(net), center, scale, std::move(trace));
}

}  // namespace tlcqm
