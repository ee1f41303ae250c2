#pragma once

#include "difcast/datasets.hpp"

#include <cstdint>

namespace difcast {

struct Ensemble {
  StateMatrix members;  // K x n_dim
  double time = 0.0;

  Index size() const { return members.rows(); }
  Index n_dim() const { return members.cols(); }
  Eigen::VectorXd mean() const { return members.colwise().mean().transpose(); }
  //! Trace of the unbiased sample covariance.
  double spread() const;
  void validate() const;
};

//! Per-lead member averages of x and x^2; row j is lead j (row 0 is the initial ensemble).
struct EnsembleMoments {
  Eigen::MatrixXd mean;
  Eigen::MatrixXd second;
};

//! Integrates every member for n_steps output intervals. Stochastic members draw
//! from independent streams of `seed`.
EnsembleMoments ensemble_forecast(const SystemModel& model, const Ensemble& ens, Index n_steps,
                                  std::uint64_t seed = 0);

//! Advances every member in place by n_intervals output intervals.
void advance_ensemble(const SystemModel& model, Ensemble& ens, Index n_intervals, std::uint64_t seed = 0);

//! ETKF analysis with H = I and R = obs_variance * I, symmetric square-root transform.
Ensemble etkf_update(const Ensemble& ens, const Eigen::Ref<const Eigen::VectorXd>& y, double obs_variance);

//! K members x + xi_k with xi_k ~ N(0, variance I).
Ensemble perturbed_init(const Eigen::Ref<const Eigen::VectorXd>& x, Index k, double variance, std::uint64_t seed);

}  // namespace difcast
