#pragma once

#include "difcast/datasets.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

namespace testing {

using difcast::Index;

// Exact AR(1) transition of dx = -x dt + sqrt(2) dW sampled every tau.
inline difcast::TimeSeries ou_series(Index n, double tau, std::uint64_t seed, double x0 = 0.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  const double a = std::exp(-tau);
  const double s = std::sqrt(1.0 - a * a);
  difcast::TimeSeries out;
  out.samples.resize(n, 1);
  out.tau = tau;
  double x = x0;
  for (Index i = 0; i < n; ++i) {
    out.samples(i, 0) = x;
    x = a * x + s * normal(rng);
  }
  return out;
}

// Uniform random cloud in [-1, 1]^dim.
inline difcast::TimeSeries random_cloud(Index n, Index dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  difcast::TimeSeries out;
  out.samples.resize(n, dim);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < dim; ++j) out.samples(i, j) = u(rng);
  out.tau = 0.1;
  return out;
}

// Largest principal angle (radians) of span(b) from span(a); sine form keeps
// precision for nearly identical subspaces.
inline double max_principal_angle(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const Eigen::MatrixXd qa = Eigen::HouseholderQR<Eigen::MatrixXd>(a).householderQ() *
                             Eigen::MatrixXd::Identity(a.rows(), a.cols());
  const Eigen::MatrixXd qb = Eigen::HouseholderQR<Eigen::MatrixXd>(b).householderQ() *
                             Eigen::MatrixXd::Identity(b.rows(), b.cols());
  const Eigen::MatrixXd resid = qb - qa * (qa.transpose() * qb);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(resid);
  return std::asin(std::min(1.0, svd.singularValues()(0)));
}

inline std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j);
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  const auto rx = ranks(x), ry = ranks(y);
  const Eigen::Map<const Eigen::VectorXd> a(rx.data(), static_cast<Index>(rx.size()));
  const Eigen::Map<const Eigen::VectorXd> b(ry.data(), static_cast<Index>(ry.size()));
  const Eigen::VectorXd ca = a.array() - a.mean(), cb = b.array() - b.mean();
  return ca.dot(cb) / (ca.norm() * cb.norm());
}

// Mean and batch-means standard error of a correlated series.
inline std::pair<double, double> batch_mean_se(const std::vector<double>& x, std::size_t batches = 50) {
  const std::size_t len = x.size() / batches;
  std::vector<double> means(batches);
  for (std::size_t b = 0; b < batches; ++b)
    means[b] = std::accumulate(x.begin() + b * len, x.begin() + (b + 1) * len, 0.0) / static_cast<double>(len);
  const double m = std::accumulate(means.begin(), means.end(), 0.0) / static_cast<double>(batches);
  double v = 0.0;
  for (double bm : means) v += (bm - m) * (bm - m);
  v /= static_cast<double>(batches - 1);
  return {m, std::sqrt(v / static_cast<double>(batches))};
}

}  // namespace testing
