#include "difcast/kernel.hpp"

#include "difcast/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace difcast {

namespace {

// Largest kernel exponent before exp() is treated as having left the support.
constexpr double kSupportExponent = 700.0;
constexpr double kMinDensity = 1e-300;

double squared_distance(const StateMatrix& x, Index i, Index j) {
  double s = 0.0;
  for (Index c = 0; c < x.cols(); ++c) {
    const double diff = x(i, c) - x(j, c);
    s += diff * diff;
  }
  return s;
}

double squared_distance(const StateMatrix& x, Index i, const Eigen::Ref<const Eigen::VectorXd>& y) {
  double s = 0.0;
  for (Index c = 0; c < x.cols(); ++c) {
    const double diff = x(i, c) - y[c];
    s += diff * diff;
  }
  return s;
}

// The dense and the kNN builds share these so that knn(N) reproduces dense bit for bit.
inline double normalized_kernel(double k, double q_i, double q_j) { return k / (std::sqrt(q_i) * std::sqrt(q_j)); }
inline double symmetric_entry(double k_hat, double n, double sqrt_d_i, double sqrt_d_j) {
  return k_hat / (n * sqrt_d_i * sqrt_d_j);
}

std::vector<Index> strided_subsample(Index n, Index max_points) {
  std::vector<Index> idx;
  if (n <= max_points) {
    idx.resize(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), Index{0});
    return idx;
  }
  idx.reserve(static_cast<std::size_t>(max_points));
  for (Index s = 0; s < max_points; ++s) idx.push_back(s * n / max_points);
  return idx;
}

}  // namespace

std::string Sparsity::describe() const { return is_dense() ? "dense" : "knn:" + std::to_string(k); }

Sparsity Sparsity::parse(const std::string& text) {
  if (text == "dense") return dense();
  if (text.rfind("knn:", 0) == 0) {
    const Index k = std::stoll(text.substr(4));
    if (k < 1) throw ParameterError("knn sparsity needs k >= 1");
    return knn(k);
  }
  throw ParameterError("unknown sparsity '" + text + "'");
}

std::vector<double> default_bandwidth_grid(const TimeSeries& series, Index max_points) {
  const auto idx = strided_subsample(series.length(), max_points);
  std::vector<double> d2;
  d2.reserve(idx.size() * (idx.size() - 1) / 2);
  for (std::size_t a = 0; a < idx.size(); ++a)
    for (std::size_t b = a + 1; b < idx.size(); ++b) d2.push_back(squared_distance(series.samples, idx[a], idx[b]));
  if (d2.empty()) throw TuningFailed("bandwidth tuning needs at least two points");
  auto mid = d2.begin() + static_cast<std::ptrdiff_t>(d2.size() / 2);
  std::nth_element(d2.begin(), mid, d2.end());
  double scale = *mid;
  if (!(scale > 0.0)) scale = std::accumulate(d2.begin(), d2.end(), 0.0) / static_cast<double>(d2.size());
  if (!(scale > 0.0)) throw TuningFailed("all training points coincide; bandwidth cannot be tuned");
  std::vector<double> grid;
  for (int l = -30; l <= 30; ++l) grid.push_back(std::ldexp(scale, l));
  return grid;
}

BandwidthTuning tune_bandwidth(const TimeSeries& series, std::span<const double> grid, Index max_points) {
  if (grid.size() < 8) throw ParameterError("bandwidth grid needs at least 8 points");
  if (!std::is_sorted(grid.begin(), grid.end()) || !(grid.front() > 0.0))
    throw ParameterError("bandwidth grid must be positive and ascending");
  if (std::log10(grid.back() / grid.front()) < 6.0) throw ParameterError("bandwidth grid must span >= 6 decades");

  const auto idx = strided_subsample(series.length(), max_points);
  const auto n = static_cast<double>(idx.size());
  const std::size_t g = grid.size();
  std::vector<double> inv4eps(g);
  for (std::size_t l = 0; l < g; ++l) inv4eps[l] = 1.0 / (4.0 * grid[l]);

  std::vector<double> off_diag(g, 0.0);
  for (std::size_t a = 0; a < idx.size(); ++a) {
    for (std::size_t b = a + 1; b < idx.size(); ++b) {
      const double d2 = squared_distance(series.samples, idx[a], idx[b]);
      // exponents shrink as eps grows; skip the underflowing head of the grid
      std::size_t l = 0;
      while (l < g && d2 * inv4eps[l] > 745.0) ++l;
      for (; l < g; ++l) off_diag[l] += std::exp(-d2 * inv4eps[l]);
    }
  }

  BandwidthTuning out;
  out.grid.assign(grid.begin(), grid.end());
  out.log_sums.resize(g);
  for (std::size_t l = 0; l < g; ++l) out.log_sums[l] = std::log((n + 2.0 * off_diag[l]) / (n * n));
  out.slopes.assign(g, std::numeric_limits<double>::quiet_NaN());
  std::size_t best = 0;
  double best_slope = -std::numeric_limits<double>::infinity();
  for (std::size_t l = 1; l + 1 < g; ++l) {
    const double slope = (out.log_sums[l + 1] - out.log_sums[l - 1]) / std::log(grid[l + 1] / grid[l - 1]);
    out.slopes[l] = slope;
    if (slope > best_slope) {  // strict: ties keep the smaller bandwidth
      best_slope = slope;
      best = l;
    }
  }
  if (!(best_slope > 0.01)) throw TuningFailed("kernel-sum slope never exceeds 0.01 (degenerate data)");
  out.epsilon = grid[best];
  out.slope = best_slope;
  return out;
}

BandwidthTuning tune_bandwidth(const TimeSeries& series) {
  const auto grid = default_bandwidth_grid(series);
  return tune_bandwidth(series, grid);
}

DiffusionOperator::DiffusionOperator(std::shared_ptr<const TimeSeries> training, double epsilon, Sparsity sparsity)
    : training_(std::move(training)), epsilon_(epsilon), sparsity_(sparsity) {
  if (!training_) throw ParameterError("diffusion operator needs training data");
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw ParameterError("epsilon must be positive");
  const StateMatrix& x = training_->samples;
  const Index n = x.rows();
  if (n < 3) throw ParameterError("diffusion operator needs N >= 3");
  if (!sparsity.is_dense() && sparsity.k < 16) throw ParameterError("knn sparsity needs k >= 16");
  const double inv4eps = 1.0 / (4.0 * epsilon);
  const auto nd = static_cast<double>(n);

  q_.resize(n);
  d_.resize(n);
  if (sparsity_.is_dense() || sparsity_.k >= n) {
    if (!sparsity_.is_dense()) sparsity_.k = n;
  }

  if (sparsity_.is_dense()) {
    dense_.resize(n, n);
    for (Index j = 0; j < n; ++j) {
      dense_(j, j) = 1.0;
      for (Index i = 0; i < j; ++i) {
        const double k = std::exp(-squared_distance(x, i, j) * inv4eps);
        dense_(i, j) = k;
        dense_(j, i) = k;
      }
    }
    for (Index j = 0; j < n; ++j) {
      double s = 0.0;
      for (Index i = 0; i < n; ++i) s += dense_(i, j);
      q_[j] = s / nd;
    }
    if (q_.minCoeff() < kMinDensity) throw BandwidthTooSmall("kernel density underflowed; increase epsilon");
    for (Index j = 0; j < n; ++j)
      for (Index i = 0; i < n; ++i) dense_(i, j) = normalized_kernel(dense_(i, j), q_[i], q_[j]);
    for (Index j = 0; j < n; ++j) {
      double s = 0.0;
      for (Index i = 0; i < n; ++i) s += dense_(i, j);
      d_[j] = s / nd;
    }
    sqrt_d_ = d_.cwiseSqrt();
    for (Index j = 0; j < n; ++j)
      for (Index i = 0; i < n; ++i) dense_(i, j) = symmetric_entry(dense_(i, j), nd, sqrt_d_[i], sqrt_d_[j]);
    return;
  }

  // kNN lists, then symmetrise by taking the union of (i, j) and (j, i).
  const Index k = std::min(sparsity_.k, n);
  std::vector<std::pair<Index, Index>> pairs;
  pairs.reserve(static_cast<std::size_t>(2 * n * k));
  std::vector<std::pair<double, Index>> row(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) row[static_cast<std::size_t>(j)] = {squared_distance(x, i, j), j};
    if (k < n) std::nth_element(row.begin(), row.begin() + (k - 1), row.end());
    for (Index r = 0; r < k; ++r) {
      const Index j = row[static_cast<std::size_t>(r)].second;
      pairs.emplace_back(j, i);
      pairs.emplace_back(i, j);
    }
  }
  // column-major order: sort by (column, row)
  std::sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second < b.second : a.first < b.first;
  });
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());

  sparse_.resize(n, n);
  sparse_.reserve(static_cast<Index>(pairs.size()));
  {
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(pairs.size());
    for (const auto& [i, j] : pairs)
      triplets.emplace_back(i, j, i == j ? 1.0 : std::exp(-squared_distance(x, i, j) * inv4eps));
    sparse_.setFromTriplets(triplets.begin(), triplets.end());
  }
  sparse_.makeCompressed();
  auto column_sums = [&](Eigen::VectorXd& out) {
    for (Index j = 0; j < n; ++j) {
      double s = 0.0;
      for (Eigen::SparseMatrix<double>::InnerIterator it(sparse_, j); it; ++it) s += it.value();
      out[j] = s / nd;
    }
  };
  column_sums(q_);
  if (q_.minCoeff() < kMinDensity) throw BandwidthTooSmall("kernel density underflowed; increase epsilon");
  for (Index j = 0; j < n; ++j)
    for (Eigen::SparseMatrix<double>::InnerIterator it(sparse_, j); it; ++it)
      it.valueRef() = normalized_kernel(it.value(), q_[it.row()], q_[j]);
  column_sums(d_);
  sqrt_d_ = d_.cwiseSqrt();
  for (Index j = 0; j < n; ++j)
    for (Eigen::SparseMatrix<double>::InnerIterator it(sparse_, j); it; ++it)
      it.valueRef() = symmetric_entry(it.value(), nd, sqrt_d_[it.row()], sqrt_d_[j]);
}

namespace {

void check_parts(const std::shared_ptr<const TimeSeries>& training, Index rows, Index cols, const Eigen::VectorXd& q,
                 const Eigen::VectorXd& d) {
  const Index n = rows;
  if (!training || training->length() != n || cols != n || q.size() != n || d.size() != n)
    throw ShapeError("persisted operator pieces have inconsistent sizes");
  if ((d.array() <= 0.0).any() || (q.array() <= 0.0).any())
    throw ParameterError("persisted operator has non-positive densities");
}

}  // namespace

DiffusionOperator DiffusionOperator::from_parts(std::shared_ptr<const TimeSeries> training, double epsilon,
                                                const Eigen::MatrixXd& t_hat, Eigen::VectorXd q_values,
                                                Eigen::VectorXd d_values) {
  check_parts(training, t_hat.rows(), t_hat.cols(), q_values, d_values);
  DiffusionOperator op;
  op.training_ = std::move(training);
  op.epsilon_ = epsilon;
  op.sparsity_ = Sparsity::dense();
  op.q_ = std::move(q_values);
  op.d_ = std::move(d_values);
  op.sqrt_d_ = op.d_.cwiseSqrt();
  op.dense_ = t_hat;
  return op;
}

DiffusionOperator DiffusionOperator::from_parts(std::shared_ptr<const TimeSeries> training, double epsilon,
                                                Sparsity sparsity, Eigen::SparseMatrix<double> t_hat,
                                                Eigen::VectorXd q_values, Eigen::VectorXd d_values) {
  if (sparsity.is_dense()) throw ParameterError("sparse operator parts need a knn sparsity");
  check_parts(training, t_hat.rows(), t_hat.cols(), q_values, d_values);
  DiffusionOperator op;
  op.training_ = std::move(training);
  op.epsilon_ = epsilon;
  op.sparsity_ = sparsity;
  op.q_ = std::move(q_values);
  op.d_ = std::move(d_values);
  op.sqrt_d_ = op.d_.cwiseSqrt();
  op.sparse_ = std::move(t_hat);
  op.sparse_.makeCompressed();
  return op;
}

Eigen::VectorXd DiffusionOperator::apply_t_hat(const Eigen::VectorXd& v) const {
  if (v.size() != size()) throw ShapeError("vector length does not match operator size");
  if (is_dense()) return dense_.selfadjointView<Eigen::Lower>() * v;
  return sparse_ * v;
}

Eigen::VectorXd DiffusionOperator::apply_t(const Eigen::VectorXd& v) const {
  const Eigen::VectorXd w = sqrt_d_.cwiseProduct(v);
  return apply_t_hat(w).cwiseQuotient(sqrt_d_);
}

double DiffusionOperator::t_hat(Index i, Index j) const {
  return is_dense() ? dense_(i, j) : sparse_.coeff(i, j);
}

Eigen::MatrixXd DiffusionOperator::t_columns(std::span<const Index> columns) const {
  const Index n = size();
  Eigen::MatrixXd out(n, static_cast<Index>(columns.size()));
  for (Index c = 0; c < out.cols(); ++c) {
    const Index j = columns[static_cast<std::size_t>(c)];
    if (j < 0 || j >= n) throw ParameterError("column index out of range");
    if (is_dense()) {
      out.col(c) = dense_.col(j).cwiseQuotient(sqrt_d_) * sqrt_d_[j];
    } else {
      out.col(c).setZero();
      for (Eigen::SparseMatrix<double>::InnerIterator it(sparse_, j); it; ++it)
        out(it.row(), c) = it.value() / sqrt_d_[it.row()] * sqrt_d_[j];
    }
  }
  return out;
}

Eigen::MatrixXd DiffusionOperator::dense_t_hat() const {
  return is_dense() ? dense_ : Eigen::MatrixXd(sparse_);
}

Eigen::MatrixXd DiffusionOperator::dense_t() const {
  return sqrt_d_.cwiseInverse().asDiagonal() * dense_t_hat() * sqrt_d_.asDiagonal();
}

Index DiffusionOperator::nonzeros() const { return is_dense() ? size() * size() : sparse_.nonZeros(); }

double DiffusionOperator::row_sum_defect() const {
  return (apply_t(Eigen::VectorXd::Ones(size())).array() - 1.0).abs().maxCoeff();
}

std::vector<Index> DiffusionOperator::nearest(const Eigen::Ref<const Eigen::VectorXd>& y, Index k) const {
  const StateMatrix& x = training_->samples;
  std::vector<std::pair<double, Index>> dist(static_cast<std::size_t>(x.rows()));
  for (Index i = 0; i < x.rows(); ++i) dist[static_cast<std::size_t>(i)] = {squared_distance(x, i, y), i};
  std::nth_element(dist.begin(), dist.begin() + (k - 1), dist.end());
  std::vector<Index> out;
  out.reserve(static_cast<std::size_t>(k));
  for (Index r = 0; r < k; ++r) out.push_back(dist[static_cast<std::size_t>(r)].second);
  std::sort(out.begin(), out.end());
  return out;
}

Eigen::VectorXd DiffusionOperator::kernel_row(const Eigen::Ref<const Eigen::VectorXd>& y) const {
  const StateMatrix& x = training_->samples;
  if (y.size() != x.cols()) throw ShapeError("query point has dimension " + std::to_string(y.size()) +
                                             ", training data has " + std::to_string(x.cols()));
  const Index n = size();
  const auto nd = static_cast<double>(n);
  const double inv4eps = 1.0 / (4.0 * epsilon_);

  std::vector<Index> support;
  if (is_dense() || sparsity_.k >= n) {
    support.resize(static_cast<std::size_t>(n));
    std::iota(support.begin(), support.end(), Index{0});
  } else {
    support = nearest(y, sparsity_.k);
  }

  Eigen::VectorXd row = Eigen::VectorXd::Zero(n);
  double min_exponent = std::numeric_limits<double>::infinity();
  for (Index i : support) {
    const double e = squared_distance(x, i, y) * inv4eps;
    min_exponent = std::min(min_exponent, e);
    row[i] = std::exp(-e);
  }
  if (min_exponent > kSupportExponent) throw OutOfSupport("query point lies outside the kernel support of the data");

  double q_y = 0.0;
  for (Index i : support) q_y += row[i];
  q_y /= nd;
  for (Index i : support) row[i] = normalized_kernel(row[i], q_y, q_[i]);
  double d_y = 0.0;
  for (Index i : support) d_y += row[i];
  d_y /= nd;
  for (Index i : support) row[i] /= nd * d_y;
  return row;
}

std::shared_ptr<const DiffusionOperator> build_diffusion_operator(std::shared_ptr<const TimeSeries> training,
                                                                  double epsilon, Sparsity sparsity) {
  return std::make_shared<const DiffusionOperator>(std::move(training), epsilon, sparsity);
}

}  // namespace difcast
