#include "difcast/propagator.hpp"

#include "difcast/errors.hpp"

#include <cmath>

namespace difcast {

Propagator build_propagator(std::shared_ptr<const BasisSet> basis, const TimeSeries& train) {
  if (!basis) throw ParameterError("propagator needs a basis");
  const Index n = basis->n_points();
  if (train.length() != n)
    throw ShapeError("basis has " + std::to_string(n) + " points, training series has " +
                     std::to_string(train.length()));
  if (n < 2) throw ParameterError("propagator needs at least one consecutive pair");
  const auto& phi = basis->values;
  Propagator out;
  out.pair_count = n - 1;
  out.a_hat.noalias() = phi.bottomRows(n - 1).transpose() * phi.topRows(n - 1);
  out.a_hat /= static_cast<double>(n - 1);
  out.tau = train.tau;
  out.basis = std::move(basis);
  return out;
}

Eigen::MatrixXd zero_lag_matrix(const BasisSet& basis) {
  return basis.values.transpose() * basis.values / static_cast<double>(basis.n_points());
}

double total_mass(const BasisSet& basis, const DensityState& state) {
  return basis.means().dot(state.coeffs);
}

DensityState normalize(const BasisSet& basis, const DensityState& state, bool clip) {
  if (state.coeffs.size() != basis.size()) throw ShapeError("state size does not match basis");
  DensityState out = state;
  if (clip) {
    const Eigen::VectorXd rho = density_values(basis, state).cwiseMax(0.0);
    out.coeffs = basis.values.transpose() * rho / static_cast<double>(basis.n_points());
  }
  const double mass = total_mass(basis, out);
  if (!(mass > 0.0) || !std::isfinite(mass))
    throw DegenerateDensity(state.time_index, "total probability " + std::to_string(mass));
  out.coeffs /= mass;
  return out;
}

DensityState step(const Propagator& prop, const DensityState& state, Index n) {
  if (n < 0) throw ParameterError("step count must be non-negative");
  if (state.coeffs.size() != prop.size()) throw ShapeError("state size does not match propagator");
  DensityState out = state;
  const Eigen::VectorXd means = prop.basis ? prop.basis->means() : Eigen::VectorXd();
  Eigen::VectorXd next(prop.size());
  for (Index s = 0; s < n; ++s) {
    next.noalias() = prop.a_hat * out.coeffs;
    out.coeffs.swap(next);
    if (means.size()) {
      // an unstable propagator is left to show in the skill metrics
      const double mass = means.dot(out.coeffs);
      if (mass > 0.0 && std::isfinite(mass)) out.coeffs /= mass;
    }
  }
  out.time_index = state.time_index + n;
  return out;
}

Eigen::VectorXd density_values(const BasisSet& basis, const DensityState& state) {
  if (state.coeffs.size() != basis.size()) throw ShapeError("state size does not match basis");
  return basis.values * state.coeffs;
}

double expectation(const BasisSet& basis, const DensityState& state, const Eigen::VectorXd& f_values) {
  if (f_values.size() != basis.n_points()) throw ShapeError("f_values must be sampled on the training points");
  return f_values.dot(density_values(basis, state)) / static_cast<double>(basis.n_points());
}

MomentProjector::MomentProjector(const BasisSet& basis) {
  if (!basis.op) throw ParameterError("moment projector needs the training data behind the basis");
  const StateMatrix& x = basis.op->training().samples;
  const auto n = static_cast<double>(basis.n_points());
  first_ = basis.values.transpose() * x / n;
  second_ = basis.values.transpose() * x.cwiseAbs2() / n;
}

}  // namespace difcast
