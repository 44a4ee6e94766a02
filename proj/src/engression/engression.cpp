#include "tlcqm/engression.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <nlohmann/json.hpp>

#include "tlcqm/errors.hpp"

namespace tlcqm {

namespace {

using json = nlohmann::json;

inline double sgn(double v) { return static_cast<double>((v > 0.0) - (v < 0.0)); }

// Input matrix with column i*m + j = [x_i ; noise(:, i*m + j)].
Eigen::MatrixXd stack_inputs(const Eigen::MatrixXd& features, const Eigen::MatrixXd& noise, int m) {
  const Eigen::Index n = features.rows();
  const Eigen::Index d = features.cols();
  Eigen::MatrixXd in(d + noise.rows(), n * m);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) {
      const Eigen::Index c = i * m + j;
      in.col(c).head(d) = features.row(i).transpose();
      in.col(c).tail(noise.rows()) = noise.col(c);
    }
  }
  return in;
}

}  // namespace

std::string to_string(NoiseLaw law) {
  return law == NoiseLaw::standard_normal ? "standard_normal" : "uniform";
}

NoiseLaw noise_law_from_string(const std::string& name) {
  if (name == "standard_normal" || name == "normal") return NoiseLaw::standard_normal;
  if (name == "uniform" || name == "uniform01") return NoiseLaw::uniform01;
  throw InvalidArgument("unknown noise law '" + name + "'");
}

void EngressionConfig::validate() const {
  if (hidden_sizes.empty()) throw InvalidArgument("engression: need at least one hidden layer");
  for (int h : hidden_sizes) {
    if (h < 1) throw InvalidArgument("engression: hidden sizes must be positive");
  }
  if (noise_dim < 1) throw InvalidArgument("engression: noise_dim must be positive");
  if (!(learning_rate > 0.0)) throw InvalidArgument("engression: learning_rate must be positive");
  if (epochs < 1) throw InvalidArgument("engression: epochs must be positive");
  if (m_train < 2) throw InvalidArgument("engression: m_train must be at least 2");
  if (batch_size < 0) throw InvalidArgument("engression: batch_size must be nonnegative");
}

double energy_loss(double y, std::span<const double> samples) {
  const std::size_t m = samples.size();
  if (m < 2) throw InvalidArgument("energy_loss: need at least 2 samples");
  double fit = 0.0;
  double spread = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    fit += std::abs(y - samples[j]);
    for (std::size_t k = 0; k < m; ++k) spread += std::abs(samples[j] - samples[k]);
  }
  const double md = static_cast<double>(m);
  return fit / md - spread / (2.0 * md * (md - 1.0));
}

double energy_objective(const nn::Mlp& net, const Eigen::MatrixXd& features,
                        const Eigen::VectorXd& responses, const Eigen::MatrixXd& noise, int m,
                        nn::LayerParams* grads, nn::Mlp::Tape* workspace) {
  const Eigen::Index n = features.rows();
  if (m < 2) throw InvalidArgument("energy_objective: m must be at least 2");
  if (responses.size() != n || noise.cols() != n * m) {
    throw InvalidArgument("energy_objective: shape mismatch");
  }
  const Eigen::MatrixXd inputs = stack_inputs(features, noise, m);
  nn::Mlp::Tape local;
  nn::Mlp::Tape& tape = workspace ? *workspace : local;
  const Eigen::RowVectorXd g = grads ? net.forward(inputs, tape) : net.forward(inputs);

  const double md = m;
  const double nd = static_cast<double>(n);
  const double w_fit = 1.0 / md;
  const double w_pair = 1.0 / (2.0 * md * (md - 1.0));
  double total = 0.0;
  Eigen::RowVectorXd dg(grads ? n * m : 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double y = responses(i);
    const Eigen::Index base = i * m;
    double fit = 0.0;
    double spread = 0.0;
    for (int j = 0; j < m; ++j) {
      const double gj = g(base + j);
      fit += std::abs(y - gj);
      double pair_sign = 0.0;
      for (int k = 0; k < m; ++k) {
        const double diff = gj - g(base + k);
        spread += std::abs(diff);
        pair_sign += sgn(diff);
      }
      if (grads) dg(base + j) = (w_fit * sgn(gj - y) - 2.0 * w_pair * pair_sign) / nd;
    }
    total += w_fit * fit - w_pair * spread;
  }
  if (grads) net.backward(tape, dg, *grads);
  return total / nd;
}

Eigen::MatrixXd draw_noise(NoiseLaw law, int noise_dim, Eigen::Index count, RngStream& rng) {
  Eigen::MatrixXd eta(noise_dim, count);
  for (Eigen::Index c = 0; c < count; ++c) {
    for (int q = 0; q < noise_dim; ++q) {
      eta(q, c) = law == NoiseLaw::standard_normal ? rng.normal() : rng.uniform();
    }
  }
  return eta;
}

EngressionModel::EngressionModel(nn::Mlp net, Eigen::Index feature_dim, EngressionConfig config,
                                 double response_center, double response_scale,
                                 std::vector<double> loss_trace)
    : net_(std::move(net)),
      feature_dim_(feature_dim),
      config_(std::move(config)),
      center_(response_center),
      scale_(response_scale),
      loss_trace_(std::move(loss_trace)) {
  if (net_.input_dim() != feature_dim_ + config_.noise_dim) {
    throw InvalidArgument("engression model: network input does not match feature + noise dim");
  }
  if (!(scale_ > 0.0) || !std::isfinite(center_)) {
    throw InvalidArgument("engression model: invalid response scaling");
  }
}

double EngressionModel::final_loss() const {
  return loss_trace_.empty() ? std::numeric_limits<double>::quiet_NaN() : loss_trace_.back();
}

double EngressionModel::evaluate(const Eigen::VectorXd& x, const Eigen::VectorXd& eta) const {
  if (x.size() != feature_dim_ || eta.size() != config_.noise_dim) {
    throw InvalidArgument("engression evaluate: dimension mismatch");
  }
  Eigen::MatrixXd in(feature_dim_ + config_.noise_dim, 1);
  in.col(0) << x, eta;
  return center_ + scale_ * net_.forward(in)(0);
}

Eigen::VectorXd EngressionModel::sample(const Eigen::VectorXd& x, int count, RngStream& rng) const {
  if (x.size() != feature_dim_) {
    throw InvalidArgument("engression sample: expected " + std::to_string(feature_dim_) +
                          " features, got " + std::to_string(x.size()));
  }
  return sample_rows(x.transpose(), count, rng).row(0).transpose();
}

Eigen::MatrixXd EngressionModel::sample_rows(const Eigen::MatrixXd& features, int count,
                                             RngStream& rng) const {
  if (features.cols() != feature_dim_) {
    throw InvalidArgument("engression sample: expected " + std::to_string(feature_dim_) +
                          " features, got " + std::to_string(features.cols()));
  }
  if (count < 1) throw InvalidArgument("engression sample: count must be positive");
  const Eigen::Index n = features.rows();
  Eigen::MatrixXd out(n, count);
  constexpr Eigen::Index kMaxColumns = 8192;
  const Eigen::Index chunk = std::max<Eigen::Index>(1, kMaxColumns / count);
  for (Eigen::Index start = 0; start < n; start += chunk) {
    const Eigen::Index rows = std::min(chunk, n - start);
    const Eigen::MatrixXd eta = draw_noise(config_.noise_law, config_.noise_dim, rows * count, rng);
    const Eigen::MatrixXd in = stack_inputs(features.middleRows(start, rows), eta, count);
    const Eigen::RowVectorXd g = net_.forward(in);
    for (Eigen::Index i = 0; i < rows; ++i) {
      out.row(start + i) = (center_ + scale_ * g.segment(i * count, count).array()).matrix();
    }
  }
  return out;
}

void EngressionModel::save(const std::string& path) const {
  json layers = json::array();
  for (const auto& layer : net_.layers()) {
    std::vector<double> w;
    w.reserve(static_cast<std::size_t>(layer.weight.size()));
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) w.push_back(layer.weight(r, c));
    }
    layers.push_back({{"rows", layer.weight.rows()},
                      {"cols", layer.weight.cols()},
                      {"weight", w},
                      {"bias", std::vector<double>(layer.bias.data(), layer.bias.data() + layer.bias.size())}});
  }
  const json doc = {
      {"format", "tlcqm-engression"},
      {"version", 1},
      {"feature_dim", feature_dim_},
      {"response_center", center_},
      {"response_scale", scale_},
      {"config",
       {{"hidden_sizes", config_.hidden_sizes},
        {"noise_dim", config_.noise_dim},
        {"learning_rate", config_.learning_rate},
        {"epochs", config_.epochs},
        {"m_train", config_.m_train},
        {"batch_size", config_.batch_size},
        {"noise_law", to_string(config_.noise_law)},
        {"standardize_response", config_.standardize_response}}},
      {"loss_trace", loss_trace_},
      {"layers", layers}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << doc.dump(1) << '\n';
}

EngressionModel EngressionModel::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("engression model file: ") + e.what());
  }
  if (doc.value("format", "") != "tlcqm-engression") {
    throw InvalidArgument("engression model file: unrecognized format");
  }
  EngressionConfig cfg;
  const auto& c = doc.at("config");
  cfg.hidden_sizes = c.at("hidden_sizes").get<std::vector<int>>();
  cfg.noise_dim = c.at("noise_dim").get<int>();
  cfg.learning_rate = c.at("learning_rate").get<double>();
  cfg.epochs = c.at("epochs").get<int>();
  cfg.m_train = c.at("m_train").get<int>();
  cfg.batch_size = c.at("batch_size").get<int>();
  cfg.noise_law = noise_law_from_string(c.at("noise_law").get<std::string>());
  cfg.standardize_response = c.at("standardize_response").get<bool>();

  nn::LayerParams layers;
  for (const auto& l : doc.at("layers")) {
    const auto rows = l.at("rows").get<Eigen::Index>();
    const auto cols = l.at("cols").get<Eigen::Index>();
    const auto w = l.at("weight").get<std::vector<double>>();
    const auto b = l.at("bias").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(w.size()) != rows * cols || static_cast<Eigen::Index>(b.size()) != rows) {
      throw InvalidArgument("engression model file: layer array sizes disagree with shape");
    }
    nn::DenseLayer layer{Eigen::MatrixXd(rows, cols), Eigen::VectorXd(rows)};
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index cc = 0; cc < cols; ++cc) layer.weight(r, cc) = w[static_cast<std::size_t>(r * cols + cc)];
      layer.bias(r) = b[static_cast<std::size_t>(r)];
    }
    layers.push_back(std::move(layer));
  }
  return EngressionModel(nn::Mlp(std::move(layers)), doc.at("feature_dim").get<Eigen::Index>(), cfg,
                         doc.at("response_center").get<double>(),
                         doc.at("response_scale").get<double>(),
                         doc.at("loss_trace").get<std::vector<double>>());
}

EngressionModel train_engression(const DomainDataset& data, const EngressionConfig& config,
                                 RngStream& rng) {
  config.validate();
  const Eigen::Index n = data.size();
  const Eigen::Index d = data.dim();
  if (n < 2) throw InvalidArgument("train_engression: need at least 2 observations");

  double center = 0.0;
  double scale = 1.0;
  if (config.standardize_response) {
    const auto& y = data.responses();
    center = y.mean();
    const double sd = std::sqrt((y.array() - center).square().mean());
    if (sd > 1e-12 * (1.0 + std::abs(center))) scale = sd;
  }
  const Eigen::VectorXd y_train = (data.responses().array() - center) / scale;

  nn::Mlp net(d + config.noise_dim, config.hidden_sizes, rng);
  nn::Adam adam(net, config.learning_rate);
  const Eigen::Index batch = nn::batch_size_for(n, config.batch_size);
  const int m = config.m_train;

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::vector<double> trace;
  trace.reserve(static_cast<std::size_t>(config.epochs));

  Eigen::MatrixXd xb;
  Eigen::VectorXd yb;
  nn::LayerParams grads;
  nn::Mlp::Tape tape;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    if (batch < n) std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (Eigen::Index start = 0; start < n; start += batch) {
      const Eigen::Index b = std::min(batch, n - start);
      if (b == n) {
        xb = data.features();
        yb = y_train;
      } else {
        xb.resize(b, d);
        yb.resize(b);
        for (Eigen::Index i = 0; i < b; ++i) {
          const auto src = order[static_cast<std::size_t>(start + i)];
          xb.row(i) = data.features().row(src);
          yb(i) = y_train(src);
        }
      }
      const Eigen::MatrixXd eta = draw_noise(config.noise_law, config.noise_dim, b * m, rng);
      const double loss = energy_objective(net, xb, yb, eta, m, &grads, &tape);
      if (!std::isfinite(loss)) throw TrainingDivergence(epoch, config.learning_rate);
      adam.step(net, grads);
      epoch_loss += loss * static_cast<double>(b);
    }
    trace.push_back(scale * epoch_loss / static_cast<double>(n));
  }
  if (!net.all_finite()) throw TrainingDivergence(config.epochs, config.learning_rate);
  return EngressionModel(std::move(net), d, config, center, scale, std::move(trace));
}

}  // namespace tlcqm
