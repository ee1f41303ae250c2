#pragma once

#include "difcast/datasets.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <memory>
#include <span>
#include <string>
#include <vector>

namespace difcast {

//! Kernel truncation: dense, or symmetrised k-nearest-neighbour (entry kept when
//! either point lists the other among its k nearest, itself included).
struct Sparsity {
  Index k = 0;

  static Sparsity dense() { return {}; }
  static Sparsity knn(Index k) { return {k}; }
  bool is_dense() const { return k == 0; }
  //! "dense" or "knn:<k>"
  std::string describe() const;
  static Sparsity parse(const std::string& text);
};

struct BandwidthTuning {
  double epsilon = 0.0;
  double slope = 0.0;        // d log S / d log eps at the chosen epsilon
  std::vector<double> grid;  // ascending
  std::vector<double> log_sums;
  std::vector<double> slopes;  // NaN at the two grid ends
};

//! 2^l times the median squared pairwise distance, l = -30..30.
std::vector<double> default_bandwidth_grid(const TimeSeries& series, Index max_points = 3000);

//! Picks the grid bandwidth with the steepest log-log slope of the kernel sum
//! S(eps) = N^-2 sum_ij exp(-|x_i - x_j|^2 / (4 eps)). Series longer than
//! max_points are evaluated on an evenly strided subsample.
BandwidthTuning tune_bandwidth(const TimeSeries& series, std::span<const double> grid, Index max_points = 3000);
BandwidthTuning tune_bandwidth(const TimeSeries& series);

//! Diffusion-maps operator with alpha = 1/2 normalisation.
//!
//! Only the symmetric matrix T^ = D^{1/2} T D^{-1/2} is stored; the Markov matrix
//! T (rows sum to one) is recovered through the conjugation when needed.
class DiffusionOperator {
 public:
  DiffusionOperator(std::shared_ptr<const TimeSeries> training, double epsilon, Sparsity sparsity);

  Index size() const { return q_.size(); }
  double epsilon() const { return epsilon_; }
  static constexpr double alpha() { return 0.5; }
  Sparsity sparsity() const { return sparsity_; }
  const TimeSeries& training() const { return *training_; }
  const std::shared_ptr<const TimeSeries>& training_ref() const { return training_; }

  //! q_eps(x_i), the kernel density estimate at each training point.
  const Eigen::VectorXd& q_values() const { return q_; }
  //! Diagonal of D, i.e. q^(x_i).
  const Eigen::VectorXd& d_values() const { return d_; }

  Eigen::VectorXd apply_t_hat(const Eigen::VectorXd& v) const;
  Eigen::VectorXd apply_t(const Eigen::VectorXd& v) const;
  double t_hat(Index i, Index j) const;
  double t(Index i, Index j) const { return t_hat(i, j) * sqrt_d_[j] / sqrt_d_[i]; }

  //! Selected columns of T as an N x m block.
  Eigen::MatrixXd t_columns(std::span<const Index> columns) const;
  Eigen::MatrixXd dense_t() const;
  Eigen::MatrixXd dense_t_hat() const;
  bool is_dense() const { return sparsity_.is_dense(); }
  Index nonzeros() const;

  //! Out-of-sample Markov row: T(y, x_i), i = 1..N. Sums to one; for y equal to a
  //! training point of a dense operator it reproduces that row of T.
  Eigen::VectorXd kernel_row(const Eigen::Ref<const Eigen::VectorXd>& y) const;

  //! max_i |sum_j T_ij - 1|
  double row_sum_defect() const;

  //! Rebuilds an operator from persisted pieces: the symmetric matrix T^ plus q and D.
  static DiffusionOperator from_parts(std::shared_ptr<const TimeSeries> training, double epsilon,
                                      const Eigen::MatrixXd& t_hat, Eigen::VectorXd q_values,
                                      Eigen::VectorXd d_values);
  static DiffusionOperator from_parts(std::shared_ptr<const TimeSeries> training, double epsilon, Sparsity sparsity,
                                      Eigen::SparseMatrix<double> t_hat, Eigen::VectorXd q_values,
                                      Eigen::VectorXd d_values);
  //! Stored T^ in sparse form (knn operators only).
  const Eigen::SparseMatrix<double>& sparse_t_hat() const { return sparse_; }

 private:
  DiffusionOperator() = default;
  std::vector<Index> nearest(const Eigen::Ref<const Eigen::VectorXd>& y, Index k) const;

  std::shared_ptr<const TimeSeries> training_;
  double epsilon_ = 0.0;
  Sparsity sparsity_;
  Eigen::VectorXd q_;
  Eigen::VectorXd d_;
  Eigen::VectorXd sqrt_d_;
  Eigen::MatrixXd dense_;                    // T^ when dense
  Eigen::SparseMatrix<double> sparse_;       // T^ when knn (symmetric, column-major)
};

std::shared_ptr<const DiffusionOperator> build_diffusion_operator(std::shared_ptr<const TimeSeries> training,
                                                                  double epsilon, Sparsity sparsity = {});

}  // namespace difcast
