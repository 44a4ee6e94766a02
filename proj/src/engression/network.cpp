#include "tlcqm/network.hpp"

#include <cmath>

#include "tlcqm/errors.hpp"

namespace tlcqm::nn {

Mlp::Mlp(Eigen::Index input_dim, std::span<const int> hidden, RngStream& rng) {
  if (input_dim < 1) throw InvalidArgument("mlp: input dimension must be positive");
  Eigen::Index fan_in = input_dim;
  auto add_layer = [&](Eigen::Index fan_out) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    DenseLayer layer{Eigen::MatrixXd(fan_out, fan_in), Eigen::VectorXd::Zero(fan_out)};
    for (Eigen::Index j = 0; j < fan_in; ++j) {
      for (Eigen::Index i = 0; i < fan_out; ++i) {
        layer.weight(i, j) = limit * (2.0 * rng.uniform() - 1.0);
      }
    }
    layers_.push_back(std::move(layer));
    fan_in = fan_out;
  };
  for (int width : hidden) {
    if (width < 1) throw InvalidArgument("mlp: hidden widths must be positive");
    add_layer(width);
  }
  add_layer(1);
}

Mlp::Mlp(LayerParams layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw InvalidArgument("mlp: no layers");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    if (layers_[l].bias.size() != layers_[l].weight.rows()) {
      throw InvalidArgument("mlp: bias length does not match layer width");
    }
    if (l > 0 && layers_[l].weight.cols() != layers_[l - 1].weight.rows()) {
      throw InvalidArgument("mlp: consecutive layer shapes do not chain");
    }
  }
  if (layers_.back().weight.rows() != 1) throw InvalidArgument("mlp: output must be scalar");
}

Eigen::Index Mlp::input_dim() const { return layers_.empty() ? 0 : layers_.front().weight.cols(); }

Eigen::RowVectorXd Mlp::forward(const Eigen::MatrixXd& inputs) const {
  Eigen::MatrixXd a = inputs;
  for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
    a = ((layers_[l].weight * a).colwise() + layers_[l].bias).cwiseMax(0.0);
  }
  const auto& out = layers_.back();
  return (out.weight * a).array() + out.bias(0);
}

Eigen::RowVectorXd Mlp::forward(const Eigen::MatrixXd& inputs, Tape& tape) const {
  tape.activations.resize(layers_.size());
  tape.activations[0] = inputs;
  for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
    auto& a = tape.activations[l + 1];
    a.resize(layers_[l].weight.rows(), inputs.cols());
    a.noalias() = layers_[l].weight * tape.activations[l];
    a.colwise() += layers_[l].bias;
    a = a.cwiseMax(0.0);
  }
  const auto& out = layers_.back();
  return (out.weight * tape.activations.back()).array() + out.bias(0);
}

LayerParams Mlp::backward(const Tape& tape, const Eigen::RowVectorXd& output_grad) const {
  Tape scratch{tape.activations, {}};
  LayerParams grads;
  backward(scratch, output_grad, grads);
  return grads;
}

void Mlp::backward(Tape& tape, const Eigen::RowVectorXd& output_grad, LayerParams& grads) const {
  grads.resize(layers_.size());
  tape.deltas.resize(layers_.size());
  tape.deltas.back() = output_grad;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const auto& a_prev = tape.activations[l];
    const auto& delta = tape.deltas[l];
    grads[l].weight.resize(layers_[l].weight.rows(), layers_[l].weight.cols());
    grads[l].weight.noalias() = delta * a_prev.transpose();
    grads[l].bias = delta.rowwise().sum();
    if (l == 0) break;
    auto& next = tape.deltas[l - 1];
    next.resize(a_prev.rows(), a_prev.cols());
    next.noalias() = layers_[l].weight.transpose() * delta;
    next = (a_prev.array() > 0.0).select(next, 0.0);
  }
}

bool Mlp::all_finite() const {
  for (const auto& layer : layers_) {
    if (!layer.weight.allFinite() || !layer.bias.allFinite()) return false;
  }
  return true;
}

LayerParams zeros_like(const LayerParams& params) {
  LayerParams out;
  out.reserve(params.size());
  for (const auto& p : params) {
    out.push_back({Eigen::MatrixXd::Zero(p.weight.rows(), p.weight.cols()),
                   Eigen::VectorXd::Zero(p.bias.size())});
  }
  return out;
}

Adam::Adam(const Mlp& net, double learning_rate, double beta1, double beta2, double eps)
    : lr_(learning_rate),
      beta1_(beta1),
      beta2_(beta2),
      eps_(eps),
      m_(zeros_like(net.layers())),
      v_(zeros_like(net.layers())) {
  if (!(learning_rate > 0.0)) throw InvalidArgument("adam: learning rate must be positive");
}

void Adam::step(Mlp& net, const LayerParams& grads) {
  ++step_count_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(step_count_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(step_count_));
  auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
    m = beta1_ * m + (1.0 - beta1_) * g;
    v = beta2_ * v + (1.0 - beta2_) * g.cwiseProduct(g);
    param.array() -= lr_ * (m.array() / c1) / ((v.array() / c2).sqrt() + eps_);
  };
  auto& layers = net.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    update(layers[l].weight, m_[l].weight, v_[l].weight, grads[l].weight);
    update(layers[l].bias, m_[l].bias, v_[l].bias, grads[l].bias);
  }
}

Eigen::Index batch_size_for(Eigen::Index n, Eigen::Index requested) {
  if (requested > 0) return std::min(requested, n);
  return n <= 512 ? n : 256;
}

}  // namespace tlcqm::nn
