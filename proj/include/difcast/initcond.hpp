#pragma once

#include "difcast/propagator.hpp"

#include <optional>
#include <vector>

namespace difcast {

struct FilterConfig {
  Index spinup_discard = 10;
  //! Per-coordinate Gaussian observation variance; empty means a flat likelihood.
  std::optional<double> likelihood_variance;
  bool clip = true;
};

//! Raw Nystrom coefficients c_k = sum_i T(y, x_i) phi_k(x_i), before normalisation.
Eigen::VectorXd nystrom_coefficients(const DiffusionOperator& op, const BasisSet& basis,
                                     const Eigen::Ref<const Eigen::VectorXd>& y);

//! Delta density at y extended to the basis, clipped and normalised.
DensityState nystrom_delta_init(const DiffusionOperator& op, const BasisSet& basis,
                                const Eigen::Ref<const Eigen::VectorXd>& y);

//! Density uniform in state volume: rho_i proportional to 1 / q^(x_i).
DensityState uniform_prior(const DiffusionOperator& op, const BasisSet& basis, bool clip = true);

//! Predictor-corrector filter over densities in coefficient space.
class BayesianFilter {
 public:
  BayesianFilter(const DiffusionOperator& op, const Propagator& prop, FilterConfig config);

  const DensityState& state() const { return state_; }
  void predict();
  //! Multiplies rho by the likelihood at the training points, re-projects, clips, normalises.
  void correct(const Eigen::Ref<const Eigen::VectorXd>& y);
  //! Same correction with explicit likelihood values at the training points.
  void correct_with(const Eigen::VectorXd& likelihood);

 private:
  const DiffusionOperator& op_;
  const Propagator& prop_;
  FilterConfig config_;
  DensityState state_;
};

struct FilterResult {
  std::vector<DensityState> states;  // posterior after assimilating observation n
  Index spinup = 0;                  // leading entries flagged as spin-up

  bool is_spinup(Index n) const { return n < spinup; }
};

//! Uniform prior, then for every observation: predict (except before the first), correct.
FilterResult bayesian_filter_init(const DiffusionOperator& op, const Propagator& prop,
                                  const TimeSeries& observations, const FilterConfig& config);

//! Nystrom initial states for every sample of a clean observation series.
std::vector<DensityState> nystrom_init_series(const DiffusionOperator& op, const BasisSet& basis,
                                              const TimeSeries& observations);

}  // namespace difcast
