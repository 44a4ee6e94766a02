#include "tlcqm/dataset.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>

#include "tlcqm/csv.hpp"
#include "tlcqm/errors.hpp"

namespace tlcqm {

std::vector<std::string> default_feature_names(Eigen::Index dim) {
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(dim));
  for (Eigen::Index j = 0; j < dim; ++j) names.push_back("x" + std::to_string(j + 1));
  return names;
}

DomainDataset::DomainDataset(Eigen::MatrixXd features, Eigen::VectorXd responses, int domain_id,
                             std::vector<std::string> feature_names)
    : features_(std::move(features)),
      responses_(std::move(responses)),
      domain_id_(domain_id),
      feature_names_(std::move(feature_names)) {
  if (features_.rows() != responses_.size()) {
    throw InvalidArgument("dataset: " + std::to_string(features_.rows()) + " feature rows but " +
                          std::to_string(responses_.size()) + " responses");
  }
  if (!features_.allFinite() || !responses_.allFinite()) {
    throw InvalidArgument("dataset: non-finite entry");
  }
  if (domain_id_ < 0) throw InvalidArgument("dataset: negative domain id");
  if (feature_names_.empty()) {
    feature_names_ = default_feature_names(features_.cols());
  } else if (static_cast<Eigen::Index>(feature_names_.size()) != features_.cols()) {
    throw InvalidArgument("dataset: feature name count does not match feature columns");
  }
}

DomainDataset DomainDataset::with_features(Eigen::MatrixXd features) const {
  return DomainDataset(std::move(features), responses_, domain_id_, feature_names_);
}

DomainDataset DomainDataset::subset(std::span<const Eigen::Index> rows) const {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), features_.cols());
  Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    x.row(static_cast<Eigen::Index>(i)) = features_.row(rows[i]);
    y(static_cast<Eigen::Index>(i)) = responses_(rows[i]);
  }
  return DomainDataset(std::move(x), std::move(y), domain_id_, feature_names_);
}

Scaler::Scaler(Eigen::VectorXd means, Eigen::VectorXd scales, std::vector<std::string> names)
    : means_(std::move(means)), scales_(std::move(scales)), names_(std::move(names)) {
  if (means_.size() != scales_.size()) throw InvalidArgument("scaler: size mismatch");
  if ((scales_.array() <= 0.0).any()) throw InvalidArgument("scaler: non-positive scale");
  if (names_.empty()) names_ = default_feature_names(means_.size());
}

Scaler Scaler::identity(Eigen::Index dim, std::vector<std::string> names) {
  return Scaler(Eigen::VectorXd::Zero(dim), Eigen::VectorXd::Ones(dim), std::move(names));
}

Eigen::MatrixXd Scaler::transform(const Eigen::MatrixXd& x) const {
  if (x.cols() != means_.size()) throw InvalidArgument("scaler: dimension mismatch");
  return (x.rowwise() - means_.transpose()).array().rowwise() / scales_.transpose().array();
}

Eigen::MatrixXd Scaler::inverse_transform(const Eigen::MatrixXd& z) const {
  if (z.cols() != means_.size()) throw InvalidArgument("scaler: dimension mismatch");
  Eigen::MatrixXd x = z.array().rowwise() * scales_.transpose().array();
  return x.rowwise() + means_.transpose();
}

void Scaler::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "feature,mean,scale\n";
  for (Eigen::Index j = 0; j < means_.size(); ++j) {
    out << names_[static_cast<std::size_t>(j)] << ',' << csv::format_number(means_(j)) << ','
        << csv::format_number(scales_(j)) << '\n';
  }
}

Scaler Scaler::load(const std::string& path) {
  const auto table = csv::read(path);
  const auto name_col = table.column("feature");
  const auto mean_col = table.column("mean");
  const auto scale_col = table.column("scale");
  if (!name_col) throw SchemaError("feature");
  if (!mean_col) throw SchemaError("mean");
  if (!scale_col) throw SchemaError("scale");
  const auto n = static_cast<Eigen::Index>(table.rows.size());
  Eigen::VectorXd means(n), scales(n);
  std::vector<std::string> names;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = table.rows[static_cast<std::size_t>(i)];
    const auto m = csv::parse_number(row[*mean_col]);
    const auto s = csv::parse_number(row[*scale_col]);
    if (!m) throw ParseError(static_cast<std::size_t>(i + 1), "mean", row[*mean_col]);
    if (!s) throw ParseError(static_cast<std::size_t>(i + 1), "scale", row[*scale_col]);
    means(i) = *m;
    scales(i) = *s;
    names.push_back(row[*name_col]);
  }
  return Scaler(std::move(means), std::move(scales), std::move(names));
}

std::pair<std::vector<DomainDataset>, Scaler> standardize(
    const std::vector<DomainDataset>& datasets) {
  if (datasets.empty()) throw EmptyInputError("standardize: empty dataset list");
  const Eigen::Index d = datasets.front().dim();
  Eigen::Index total = 0;
  for (const auto& ds : datasets) {
    if (ds.dim() != d) throw InvalidArgument("standardize: datasets disagree on dimension");
    total += ds.size();
  }
  if (total == 0) throw EmptyInputError("standardize: no rows");

  Eigen::VectorXd sum = Eigen::VectorXd::Zero(d);
  for (const auto& ds : datasets) sum += ds.features().colwise().sum().transpose();
  const Eigen::VectorXd mean = sum / static_cast<double>(total);
  Eigen::VectorXd sq = Eigen::VectorXd::Zero(d);
  for (const auto& ds : datasets) {
    sq += (ds.features().rowwise() - mean.transpose()).colwise().squaredNorm().transpose();
  }
  const Eigen::VectorXd sd = (sq / static_cast<double>(total)).cwiseSqrt();

  Eigen::VectorXd means(d), scales(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    if (sd(j) <= 1e-12 * (1.0 + std::abs(mean(j)))) {
      means(j) = 0.0;
      scales(j) = 1.0;
    } else {
      means(j) = mean(j);
      scales(j) = sd(j);
    }
  }
  Scaler scaler(std::move(means), std::move(scales), datasets.front().feature_names());

  std::vector<DomainDataset> out;
  out.reserve(datasets.size());
  for (const auto& ds : datasets) out.push_back(ds.with_features(scaler.transform(ds.features())));
  return {std::move(out), std::move(scaler)};
}

std::vector<DomainDataset> load_csv(const std::string& path, const std::string& response_column,
                                    const std::string& domain_column) {
  const auto table = csv::read(path);
  const auto y_col = table.column(response_column);
  if (!y_col) throw SchemaError(response_column);
  std::optional<std::size_t> dom_col;
  if (!domain_column.empty()) {
    dom_col = table.column(domain_column);
    if (!dom_col) throw SchemaError(domain_column);
  }

  std::vector<std::size_t> feature_cols;
  std::vector<std::string> names;
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    if (c == *y_col || (dom_col && c == *dom_col)) continue;
    feature_cols.push_back(c);
    names.push_back(table.header[c]);
  }

  const auto n = table.rows.size();
  const auto d = static_cast<Eigen::Index>(feature_cols.size());
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), d);
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  std::vector<int> domain(n, 0);

  auto number = [&](std::size_t row, std::size_t col) {
    const auto& cell = table.rows[row][col];
    const auto v = csv::parse_number(cell);
    if (!v) throw ParseError(row + 1, table.header[col], cell);
    return *v;
  };

  for (std::size_t r = 0; r < n; ++r) {
    const auto ri = static_cast<Eigen::Index>(r);
    for (Eigen::Index j = 0; j < d; ++j) x(ri, j) = number(r, feature_cols[static_cast<std::size_t>(j)]);
    y(ri) = number(r, *y_col);
    if (dom_col) {
      const double v = number(r, *dom_col);
      if (v < 0 || v != std::floor(v) || v > 1'000'000) {
        throw ParseError(r + 1, domain_column, table.rows[r][*dom_col]);
      }
      domain[r] = static_cast<int>(v);
    }
  }

  if (!dom_col) return {DomainDataset(std::move(x), std::move(y), 0, std::move(names))};

  std::map<int, std::vector<Eigen::Index>> groups;
  for (std::size_t r = 0; r < n; ++r) groups[domain[r]].push_back(static_cast<Eigen::Index>(r));

  const DomainDataset all(std::move(x), std::move(y), 0, names);
  std::vector<DomainDataset> out;
  for (const auto& [id, rows] : groups) {
    auto part = all.subset(rows);
    out.emplace_back(part.features(), part.responses(), id, names);
  }
  return out;
}

void write_csv(const std::string& path, const std::vector<DomainDataset>& datasets,
               const std::string& response_column, const std::string& domain_column) {
  if (datasets.empty()) throw EmptyInputError("write_csv: no datasets");
  if (domain_column.empty() && datasets.size() != 1) {
    throw InvalidArgument("write_csv: several datasets need a domain column");
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");

  const auto& names = datasets.front().feature_names();
  for (const auto& name : names) out << name << ',';
  out << response_column;
  if (!domain_column.empty()) out << ',' << domain_column;
  out << '\n';

  for (const auto& ds : datasets) {
    if (ds.feature_names() != names) throw SchemaError(response_column, "feature names differ");
    for (Eigen::Index i = 0; i < ds.size(); ++i) {
      for (Eigen::Index j = 0; j < ds.dim(); ++j) out << csv::format_number(ds.features()(i, j)) << ',';
      out << csv::format_number(ds.responses()(i));
      if (!domain_column.empty()) out << ',' << ds.domain_id();
      out << '\n';
    }
  }
}

}  // namespace tlcqm
