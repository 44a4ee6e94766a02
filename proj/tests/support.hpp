#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "tlcqm/rng.hpp"

namespace testing {

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("tlcqm_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline std::size_t count_lines(const std::string& text) {
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

/// Standard normal quantile by bisection on erfc.
inline double normal_quantile(double p) {
  double lo = -40.0, hi = 40.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (0.5 * std::erfc(-mid / std::sqrt(2.0)) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

inline Eigen::VectorXd normal_vector(Eigen::Index n, tlcqm::RngStream& rng) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = rng.normal();
  return v;
}

inline Eigen::VectorXd exponential_vector(Eigen::Index n, tlcqm::RngStream& rng) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = -std::log1p(-rng.uniform());
  return v;
}

/// Empirical Wasserstein-1 distance between two equal-size samples.
inline double wasserstein1(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

/// Brute-force quantile-matching objective with explicit ceil(r/M) pairing.
inline double paired_gap(std::vector<double> target, std::vector<double> preds) {
  std::sort(target.begin(), target.end());
  std::sort(preds.begin(), preds.end());
  const std::size_t m = preds.size() / target.size();
  double s = 0.0;
  for (std::size_t r = 1; r <= preds.size(); ++r) {
    const double gap = target[(r + m - 1) / m - 1] - preds[r - 1];
    s += gap * gap;
  }
  return s / static_cast<double>(preds.size());
}

}  // namespace testing
