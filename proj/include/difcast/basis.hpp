#pragma once

#include "difcast/eigensolver.hpp"
#include "difcast/kernel.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace difcast {

//! Which columns of T feed the QR block.
struct ColumnSelection {
  enum class Kind { middle, random, explicit_list };
  Kind kind = Kind::middle;
  std::uint64_t seed = 0;
  std::vector<Index> indices;  // explicit_list only

  static ColumnSelection middle() { return {}; }
  static ColumnSelection random(std::uint64_t seed) { return {Kind::random, seed, {}}; }
  static ColumnSelection explicit_list(std::vector<Index> indices) {
    return {Kind::explicit_list, 0, std::move(indices)};
  }

  //! "middle", "random:<seed>" or "explicit:<i0>,<i1>,..."
  std::string describe() const;
  static ColumnSelection parse(const std::string& text);
};

//! Zero-based column indices of T for the QR block.
//!  - middle: (N - M_Q)/2 .. (N + M_Q)/2 - 1; odd M_Q (< N) is rounded down to even with a warning
//!  - random: M_Q distinct indices drawn uniformly, sorted ascending
//!  - explicit: validated, order preserved
std::vector<Index> select_columns(Index n, Index m_q, const ColumnSelection& selection);

//! Basis functions sampled on the training points, normalised so that (1/N) Phi^T Phi = I.
struct BasisSet {
  Eigen::MatrixXd values;        // N x M, entry (i, k) = phi_k(x_i)
  Index m_eigen = 0;
  Index m_qr = 0;
  Eigen::VectorXd eigenvalues;   // eigenvalues of T^ for the eigen columns, descending
  ColumnSelection selection;
  std::vector<Index> selected_columns;
  Index deficiency = 0;          // columns dropped as numerically dependent
  std::shared_ptr<const DiffusionOperator> op;

  Index size() const { return values.cols(); }
  Index n_points() const { return values.rows(); }
  //! (1/N) sum_i phi_k(x_i): coefficients of the constant function.
  Eigen::VectorXd means() const;
  //! max |(1/N) Phi^T Phi - I|
  double orthonormality_defect() const;
  std::string describe() const;
};

//! Leading eigenvectors of T^ mapped through D^{-1/2}, ordered by descending
//! eigenvalue, orthonormalised in the sample inner product in that order (phi_0
//! stays the constant function) and sign-fixed so sum_i phi_k(x_i)^3 >= 0.
BasisSet leading_eigenbasis(std::shared_ptr<const DiffusionOperator> op, Index m_eigen,
                            const LanczosOptions& options = {});

//! Mixed basis: Householder QR of B = [T(:, selected), Phi_E] with Q scaled by sqrt(N).
//! `eigen` may be null for a pure QR basis.
BasisSet qr_mixed_basis(std::shared_ptr<const DiffusionOperator> op, const BasisSet* eigen, Index m_qr,
                        const ColumnSelection& selection);

//! Orthogonal projection Phi (Phi^T s) / N of each column of `signal`.
Eigen::MatrixXd reconstruct(const BasisSet& basis, const Eigen::MatrixXd& signal);
Eigen::VectorXd reconstruct(const BasisSet& basis, const Eigen::VectorXd& signal);

//! Flips column signs so that sum phi^3 >= 0, falling back to "first nonzero entry positive".
void fix_signs(Eigen::MatrixXd& columns);

}  // namespace difcast
