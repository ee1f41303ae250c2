#include "difcast/ensemble.hpp"

#include "difcast/errors.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SVD>
#include <cmath>

namespace difcast {

double Ensemble::spread() const {
  if (size() < 2) return 0.0;
  const StateMatrix anomalies = members.rowwise() - members.colwise().mean();
  return anomalies.squaredNorm() / static_cast<double>(size() - 1);
}

void Ensemble::validate() const {
  if (size() < 2) throw ParameterError("an ensemble needs at least two members");
  if (!members.allFinite()) throw ParameterError("ensemble has non-finite members");
}

namespace {

void check_model(const SystemModel& model, const Ensemble& ens) {
  ens.validate();
  if (model.n_dim() != ens.n_dim())
    throw ShapeError("model dimension " + std::to_string(model.n_dim()) + " does not match members of dimension " +
                     std::to_string(ens.n_dim()));
}

void advance_member(const SystemModel& model, Ensemble& ens, Index k, Index n_intervals, Rng& rng) {
  Eigen::VectorXd x = ens.members.row(k).transpose();
  try {
    model.advance(x, n_intervals, rng);
  } catch (const IntegrationDiverged& e) {
    throw IntegrationDiverged(e.step(), "ensemble member " + std::to_string(k));
  }
  ens.members.row(k) = x.transpose();
}

}  // namespace

EnsembleMoments ensemble_forecast(const SystemModel& model, const Ensemble& ens, Index n_steps, std::uint64_t seed) {
  check_model(model, ens);
  if (n_steps < 0) throw ParameterError("lead count must be non-negative");
  const Index n = ens.n_dim();
  EnsembleMoments out{Eigen::MatrixXd::Zero(n_steps + 1, n), Eigen::MatrixXd::Zero(n_steps + 1, n)};
  // sums are taken relative to member 0, so a collapsed ensemble returns its trajectory exactly
  Eigen::MatrixXd ref(n_steps + 1, n), ref2(n_steps + 1, n);
  for (Index k = 0; k < ens.size(); ++k) {
    Rng rng = make_stream(seed, static_cast<std::uint64_t>(k));
    Eigen::VectorXd x = ens.members.row(k).transpose();
    for (Index j = 0; j <= n_steps; ++j) {
      if (j > 0) {
        try {
          model.advance(x, 1, rng, (j - 1) * model.stride);
        } catch (const IntegrationDiverged& e) {
          throw IntegrationDiverged(e.step(), "ensemble member " + std::to_string(k));
        }
      }
      if (k == 0) {
        ref.row(j) = x.transpose();
        ref2.row(j) = x.cwiseAbs2().transpose();
      } else {
        const Eigen::RowVectorXd d = x.transpose() - ref.row(j);
        out.mean.row(j) += d;
        out.second.row(j) += d.cwiseProduct(x.transpose() + ref.row(j));
      }
    }
  }
  const auto k = static_cast<double>(ens.size());
  out.mean = ref + out.mean / k;
  out.second = ref2 + out.second / k;
  return out;
}

void advance_ensemble(const SystemModel& model, Ensemble& ens, Index n_intervals, std::uint64_t seed) {
  check_model(model, ens);
  for (Index k = 0; k < ens.size(); ++k) {
    Rng rng = make_stream(seed, static_cast<std::uint64_t>(k));
    advance_member(model, ens, k, n_intervals, rng);
  }
  ens.time += model.tau() * static_cast<double>(n_intervals);
}

Ensemble etkf_update(const Ensemble& ens, const Eigen::Ref<const Eigen::VectorXd>& y, double obs_variance) {
  ens.validate();
  if (!(obs_variance > 0.0)) throw ParameterError("ETKF needs a positive observation variance");
  if (y.size() != ens.n_dim()) throw ShapeError("observation dimension does not match the ensemble");
  const Index k = ens.size();
  const Eigen::VectorXd mean = ens.mean();
  const Eigen::MatrixXd anomalies = (ens.members.rowwise() - mean.transpose()).transpose();  // n x K
  const double km1 = static_cast<double>(k - 1);

  // mean: x_a = x_f + P_f (P_f + R)^{-1} (y - x_f)
  const Eigen::MatrixXd pf = anomalies * anomalies.transpose() / km1;
  Eigen::MatrixXd innovation_cov = pf;
  innovation_cov.diagonal().array() += obs_variance;
  Eigen::LLT<Eigen::MatrixXd> llt(innovation_cov);
  if (llt.info() != Eigen::Success) throw SingularMatrix("innovation covariance is not positive definite");
  const Eigen::VectorXd mean_a = mean + pf * llt.solve(y - mean);

  // perturbations: X_a = X_f (I + S^T S)^{-1/2}, S = X_f / sqrt((K-1) r).
  // With S = U diag(s) V^T the transform is I + V diag((1 + s^2)^{-1/2} - 1) V^T.
  const Eigen::MatrixXd s = anomalies / std::sqrt(km1 * obs_variance);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(s.transpose(), Eigen::ComputeThinU);  // s^T = V diag U^T
  const Eigen::MatrixXd& v = svd.matrixU();                                   // K x rank
  const Eigen::VectorXd sv = svd.singularValues();
  const Eigen::VectorXd shrink = ((1.0 + sv.array().square()).rsqrt() - 1.0).matrix();
  const Eigen::MatrixXd xv = anomalies * v;  // n x rank
  const Eigen::MatrixXd anomalies_a = anomalies + xv * shrink.asDiagonal() * v.transpose();

  Ensemble out;
  out.time = ens.time;
  out.members = (anomalies_a.colwise() + mean_a).transpose();
  return out;
}

Ensemble perturbed_init(const Eigen::Ref<const Eigen::VectorXd>& x, Index k, double variance, std::uint64_t seed) {
  if (variance < 0.0) throw ParameterError("perturbation variance must be non-negative");
  if (k < 2) throw ParameterError("an ensemble needs at least two members");
  Ensemble out;
  out.members = x.transpose().replicate(k, 1);
  if (variance > 0.0) {
    Rng rng = make_stream(seed, 0);
    std::normal_distribution<double> normal(0.0, std::sqrt(variance));
    for (Index i = 0; i < k; ++i)
      for (Index j = 0; j < x.size(); ++j) out.members(i, j) += normal(rng);
  }
  return out;
}

}  // namespace difcast
