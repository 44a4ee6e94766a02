#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace tlcqm {

/// One domain's observations. Domain 0 is the target, 1..K are sources.
/// Immutable after construction; the constructor enforces shape and
/// finiteness.
class DomainDataset {
 public:
  DomainDataset(Eigen::MatrixXd features, Eigen::VectorXd responses, int domain_id,
                std::vector<std::string> feature_names = {});

  const Eigen::MatrixXd& features() const noexcept { return features_; }
  const Eigen::VectorXd& responses() const noexcept { return responses_; }
  int domain_id() const noexcept { return domain_id_; }
  const std::vector<std::string>& feature_names() const noexcept { return feature_names_; }

  Eigen::Index size() const noexcept { return responses_.size(); }
  Eigen::Index dim() const noexcept { return features_.cols(); }

  /// Same rows with replaced features (used after standardization).
  DomainDataset with_features(Eigen::MatrixXd features) const;
  /// Row subset in the given order.
  DomainDataset subset(std::span<const Eigen::Index> rows) const;

 private:
  Eigen::MatrixXd features_;
  Eigen::VectorXd responses_;
  int domain_id_;
  std::vector<std::string> feature_names_;
};

/// Per-feature affine map x -> (x - mean) / scale.
class Scaler {
 public:
  Scaler() = default;
  Scaler(Eigen::VectorXd means, Eigen::VectorXd scales, std::vector<std::string> names);

  /// Pass-through scaler for `dim` features.
  static Scaler identity(Eigen::Index dim, std::vector<std::string> names = {});

  Eigen::MatrixXd transform(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd inverse_transform(const Eigen::MatrixXd& z) const;

  const Eigen::VectorXd& means() const noexcept { return means_; }
  const Eigen::VectorXd& scales() const noexcept { return scales_; }
  const std::vector<std::string>& names() const noexcept { return names_; }

  /// Sidecar format: header `feature,mean,scale`, one row per feature.
  void save(const std::string& path) const;
  static Scaler load(const std::string& path);

 private:
  Eigen::VectorXd means_;
  Eigen::VectorXd scales_;
  std::vector<std::string> names_;
};

/// Center and scale features with statistics pooled over every dataset
/// (population standard deviation). Features with zero pooled variance are
/// passed through unchanged (mean 0, scale 1). Responses are not touched.
std::pair<std::vector<DomainDataset>, Scaler> standardize(
    const std::vector<DomainDataset>& datasets);

/// Reads a comma-separated file with a header row. Every column other than
/// the response and the optional domain column becomes a feature. Returns one
/// dataset per distinct domain value in ascending order, or a single dataset
/// with domain id 0 when `domain_column` is empty.
std::vector<DomainDataset> load_csv(const std::string& path, const std::string& response_column,
                                    const std::string& domain_column = {});

/// Inverse of load_csv. Features keep the dataset's feature names
/// (x1..xd when unnamed). With a non-empty `domain_column`, rows of all
/// datasets are written in order with their domain id.
void write_csv(const std::string& path, const std::vector<DomainDataset>& datasets,
               const std::string& response_column, const std::string& domain_column = {});

std::vector<std::string> default_feature_names(Eigen::Index dim);

}  // namespace tlcqm
