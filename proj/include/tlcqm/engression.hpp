#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <vector>

#include "tlcqm/dataset.hpp"
#include "tlcqm/network.hpp"
#include "tlcqm/rng.hpp"

namespace tlcqm {

enum class NoiseLaw { standard_normal, uniform01 };

std::string to_string(NoiseLaw law);
NoiseLaw noise_law_from_string(const std::string& name);

struct EngressionConfig {
  std::vector<int> hidden_sizes{100, 100};
  int noise_dim = 5;
  double learning_rate = 1e-3;
  int epochs = 1000;
  /// Noise draws per observation in each loss evaluation.
  int m_train = 2;
  /// 0 selects the default rule (full batch for n <= 512, else 256).
  int batch_size = 0;
  NoiseLaw noise_law = NoiseLaw::standard_normal;
  /// Train on centered/scaled responses and map samples back.
  bool standardize_response = true;

  void validate() const;
};

/// Empirical energy score of one observation y against m >= 2 generated
/// samples: mean |y - g_j| minus half the mean pairwise |g_j - g_j'|.
double energy_loss(double y, std::span<const double> samples);

/// Mean energy loss over a batch for a noise-injecting network, and
/// optionally its parameter gradient.
///
/// `features` is (n x d), `noise` is (noise_dim x n*m) with column i*m + j
/// holding the j-th draw for observation i. `workspace` lets repeated calls
/// reuse activation buffers.
double energy_objective(const nn::Mlp& net, const Eigen::MatrixXd& features,
                        const Eigen::VectorXd& responses, const Eigen::MatrixXd& noise, int m,
                        nn::LayerParams* grads = nullptr, nn::Mlp::Tape* workspace = nullptr);

/// Trained conditional sampler g(x, eta).
class EngressionModel {
 public:
  EngressionModel(nn::Mlp net, Eigen::Index feature_dim, EngressionConfig config,
                  double response_center = 0.0, double response_scale = 1.0,
                  std::vector<double> loss_trace = {});

  Eigen::Index feature_dim() const noexcept { return feature_dim_; }
  int noise_dim() const noexcept { return config_.noise_dim; }
  NoiseLaw noise_law() const noexcept { return config_.noise_law; }
  const EngressionConfig& config() const noexcept { return config_; }
  const nn::Mlp& network() const noexcept { return net_; }
  /// Mean training energy loss per epoch, in response units.
  const std::vector<double>& loss_trace() const noexcept { return loss_trace_; }
  double final_loss() const;
  double response_center() const noexcept { return center_; }
  double response_scale() const noexcept { return scale_; }

  /// Deterministic evaluation g(x, eta).
  double evaluate(const Eigen::VectorXd& x, const Eigen::VectorXd& eta) const;

  /// `count` i.i.d. draws g(x, eta_j).
  Eigen::VectorXd sample(const Eigen::VectorXd& x, int count, RngStream& rng) const;

  /// Row i holds `count` draws at features.row(i); (n x count).
  Eigen::MatrixXd sample_rows(const Eigen::MatrixXd& features, int count, RngStream& rng) const;

  void save(const std::string& path) const;
  static EngressionModel load(const std::string& path);

 private:
  nn::Mlp net_;
  Eigen::Index feature_dim_;
  EngressionConfig config_;
  double center_;
  double scale_;
  std::vector<double> loss_trace_;
};

/// Draws a (noise_dim x count) matrix from the configured noise law.
Eigen::MatrixXd draw_noise(NoiseLaw law, int noise_dim, Eigen::Index count, RngStream& rng);

/// Fits the sampler by Adam on mini-batch energy loss, redrawing noise each
/// step. Deterministic given `rng`.
EngressionModel train_engression(const DomainDataset& data, const EngressionConfig& config,
                                 RngStream& rng);

}  // namespace tlcqm
