#include "difcast/initcond.hpp"

#include "difcast/errors.hpp"

#include <cmath>
#include <limits>

namespace difcast {

Eigen::VectorXd nystrom_coefficients(const DiffusionOperator& op, const BasisSet& basis,
                                     const Eigen::Ref<const Eigen::VectorXd>& y) {
  if (basis.n_points() != op.size()) throw ShapeError("basis and operator sizes differ");
  // kernel_row sums to one, so this is (1/N) sum_i T(y, x_i) phi_k(x_i) with
  // the kernel function normalised to (1/N) sum_i T(y, x_i) = 1.
  return basis.values.transpose() * op.kernel_row(y);
}

DensityState nystrom_delta_init(const DiffusionOperator& op, const BasisSet& basis,
                                const Eigen::Ref<const Eigen::VectorXd>& y) {
  DensityState state{nystrom_coefficients(op, basis, y), 0};
  return normalize(basis, state, true);
}

DensityState uniform_prior(const DiffusionOperator& op, const BasisSet& basis, bool clip) {
  if (basis.n_points() != op.size()) throw ShapeError("basis and operator sizes differ");
  const Eigen::VectorXd rho = op.d_values().cwiseInverse();
  DensityState state{basis.values.transpose() * rho / static_cast<double>(basis.n_points()), 0};
  return normalize(basis, state, clip);
}

BayesianFilter::BayesianFilter(const DiffusionOperator& op, const Propagator& prop, FilterConfig config)
    : op_(op), prop_(prop), config_(config) {
  if (!prop.basis) throw ParameterError("filter needs a propagator with a basis");
  if (config_.spinup_discard < 0) throw ParameterError("spin-up discard must be non-negative");
  if (config_.likelihood_variance && !(*config_.likelihood_variance > 0.0))
    throw ParameterError("Gaussian likelihood variance must be positive");
  state_ = uniform_prior(op_, *prop_.basis, config_.clip);
}

void BayesianFilter::predict() { state_ = step(prop_, state_, 1); }

void BayesianFilter::correct(const Eigen::Ref<const Eigen::VectorXd>& y) {
  const StateMatrix& x = op_.training().samples;
  if (y.size() != x.cols()) throw ShapeError("observation dimension does not match training data");
  const Index n = x.rows();
  Eigen::VectorXd likelihood = Eigen::VectorXd::Ones(n);
  if (config_.likelihood_variance) {
    Eigen::VectorXd d2 = (x.rowwise() - y.transpose()).rowwise().squaredNorm();
    // shifting by the minimum only rescales the likelihood
    const double shift = d2.minCoeff();
    likelihood = ((d2.array() - shift) * (-0.5 / *config_.likelihood_variance)).exp();
  }
  correct_with(likelihood);
}

void BayesianFilter::correct_with(const Eigen::VectorXd& likelihood) {
  const BasisSet& basis = *prop_.basis;
  if (likelihood.size() != basis.n_points()) throw ShapeError("likelihood must be sampled on the training points");
  const Eigen::VectorXd rho = density_values(basis, state_).cwiseProduct(likelihood);
  DensityState posterior{basis.values.transpose() * rho / static_cast<double>(basis.n_points()), state_.time_index};
  state_ = normalize(basis, posterior, config_.clip);
}

FilterResult bayesian_filter_init(const DiffusionOperator& op, const Propagator& prop,
                                  const TimeSeries& observations, const FilterConfig& config) {
  if (std::abs(observations.tau - prop.tau) > 1e-9 * std::max(1.0, prop.tau))
    throw ParameterError("observations and propagator use different sampling intervals");
  BayesianFilter filter(op, prop, config);
  FilterResult out;
  out.spinup = config.spinup_discard;
  out.states.reserve(static_cast<std::size_t>(observations.length()));
  for (Index n = 0; n < observations.length(); ++n) {
    if (n > 0) filter.predict();
    try {
      filter.correct(observations.samples.row(n).transpose());
    } catch (const DegenerateDensity& e) {
      throw DegenerateDensity(n, std::string("posterior annihilated: ") + e.what());
    }
    DensityState s = filter.state();
    s.time_index = n;
    out.states.push_back(std::move(s));
  }
  return out;
}

std::vector<DensityState> nystrom_init_series(const DiffusionOperator& op, const BasisSet& basis,
                                              const TimeSeries& observations) {
  std::vector<DensityState> out;
  out.reserve(static_cast<std::size_t>(observations.length()));
  for (Index n = 0; n < observations.length(); ++n) {
    DensityState s = nystrom_delta_init(op, basis, observations.samples.row(n).transpose());
    s.time_index = n;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace difcast
