#pragma once

#include "difcast/basis.hpp"

#include <memory>

namespace difcast {

//! Coefficients of p = sum_k c_k phi_k p_eq.
struct DensityState {
  Eigen::VectorXd coeffs;
  Index time_index = 0;
};

//! Monte-Carlo Galerkin estimate of the shift operator at lag tau.
struct Propagator {
  Eigen::MatrixXd a_hat;  // M x M, A_kj = <phi_j, S_tau phi_k>
  double tau = 0.0;
  Index pair_count = 0;
  std::shared_ptr<const BasisSet> basis;

  Index size() const { return a_hat.rows(); }
};

//! A_kj = 1/(N-1) sum_i phi_j(x_i) phi_k(x_{i+1}) over consecutive training pairs.
Propagator build_propagator(std::shared_ptr<const BasisSet> basis, const TimeSeries& train);

//! Same sum with each sample paired with itself; equals I for an orthonormal basis.
Eigen::MatrixXd zero_lag_matrix(const BasisSet& basis);

//! Total probability (1/N) sum_i rho_i of a state.
double total_mass(const BasisSet& basis, const DensityState& state);

//! Rescales to unit total mass; with clip, negative density values are zeroed
//! and re-projected first. When the constant function is phi_0 this is c_0 = 1.
//! Throws DegenerateDensity when no positive mass remains.
DensityState normalize(const BasisSet& basis, const DensityState& state, bool clip);

//! c <- A^n c, renormalising the total mass after every step.
DensityState step(const Propagator& prop, const DensityState& state, Index n);

//! rho_i = sum_k c_k phi_k(x_i): density relative to equilibrium at the training points.
Eigen::VectorXd density_values(const BasisSet& basis, const DensityState& state);

//! (1/N) sum_i f(x_i) rho_i
double expectation(const BasisSet& basis, const DensityState& state, const Eigen::VectorXd& f_values);

//! Coefficient-space form of `expectation` for the coordinate functions and
//! their squares: mean = G1^T c, second moment = G2^T c.
class MomentProjector {
 public:
  explicit MomentProjector(const BasisSet& basis);
  Eigen::VectorXd mean(const DensityState& state) const { return first_.transpose() * state.coeffs; }
  Eigen::VectorXd second_moment(const DensityState& state) const { return second_.transpose() * state.coeffs; }

 private:
  Eigen::MatrixXd first_;   // M x n_dim
  Eigen::MatrixXd second_;  // M x n_dim
};

}  // namespace difcast
