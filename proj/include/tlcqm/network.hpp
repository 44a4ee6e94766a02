#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <span>
#include <vector>

#include "tlcqm/rng.hpp"

namespace tlcqm::nn {

/// Affine layer y = W x + b with W of shape (out x in).
struct DenseLayer {
  Eigen::MatrixXd weight;
  Eigen::VectorXd bias;
};

/// Parameter-shaped container; used for gradients and optimizer moments.
using LayerParams = std::vector<DenseLayer>;

/// Fully connected ReLU network with a scalar linear output.
///
/// Batches are column-major: a batch of B inputs is an (input_dim x B)
/// matrix and the output is a 1 x B row.
class Mlp {
 public:
  /// Stored activations of one forward pass, consumed by backward().
  struct Tape {
    std::vector<Eigen::MatrixXd> activations;  // [0] = input, then one per hidden layer
    std::vector<Eigen::MatrixXd> deltas;       // backward scratch, one per layer
  };

  Mlp() = default;
  /// Weights uniform in +-sqrt(6 / (fan_in + fan_out)), biases zero.
  Mlp(Eigen::Index input_dim, std::span<const int> hidden, RngStream& rng);
  explicit Mlp(LayerParams layers);

  Eigen::Index input_dim() const;
  std::size_t depth() const noexcept { return layers_.size(); }
  const LayerParams& layers() const noexcept { return layers_; }
  LayerParams& layers() noexcept { return layers_; }

  Eigen::RowVectorXd forward(const Eigen::MatrixXd& inputs) const;
  Eigen::RowVectorXd forward(const Eigen::MatrixXd& inputs, Tape& tape) const;

  /// Gradient of sum_b output_grad(b) * f(input_b) with respect to every
  /// parameter. ReLU'(0) is taken as 0.
  LayerParams backward(const Tape& tape, const Eigen::RowVectorXd& output_grad) const;
  /// Same, writing into `grads` and reusing the tape's scratch buffers.
  void backward(Tape& tape, const Eigen::RowVectorXd& output_grad, LayerParams& grads) const;

  bool all_finite() const;

 private:
  LayerParams layers_;
};

LayerParams zeros_like(const LayerParams& params);

/// Adam without weight decay.
class Adam {
 public:
  Adam(const Mlp& net, double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8);

  void step(Mlp& net, const LayerParams& grads);
  double learning_rate() const noexcept { return lr_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long step_count_ = 0;
  LayerParams m_, v_;
};

/// Mini-batch size rule shared by the network trainers: the full data when
/// n <= 512, otherwise 256, unless `requested` is positive.
Eigen::Index batch_size_for(Eigen::Index n, Eigen::Index requested);

}  // namespace tlcqm::nn
