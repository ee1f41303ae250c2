#include "difcast/ensemble.hpp"
#include "difcast/errors.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <string>

using namespace difcast;

namespace {

Eigen::MatrixXd sample_covariance(const StateMatrix& m) {
  const StateMatrix c = m.rowwise() - m.colwise().mean();
  return c.transpose() * c / double(m.rows() - 1);
}

}  // namespace

TEST_CASE("identical members reproduce the deterministic trajectory") {
  const SystemModel model = standard_system(Origin::lorenz63, 0.1);
  const Eigen::Vector3d x0(1.5, -2.0, 20.0);
  const Ensemble ens = perturbed_init(x0, 5, 0.0, 1);
  const EnsembleMoments mom = ensemble_forecast(model, ens, 30);
  REQUIRE(mom.mean.rows() == 31);
  const TimeSeries single = integrate_lorenz63({}, x0, 300, 10);
  for (Index j = 0; j <= 30; ++j) {
    CHECK(mom.mean.row(j) == single.samples.row(j));
    for (Index c = 0; c < 3; ++c) {
      const double sq = single.samples(j, c) * single.samples(j, c);
      CHECK(mom.second(j, c) == sq);
    }
  }
}

TEST_CASE("triad ensemble mean relaxes to the climatological mean") {
  const SystemModel model = standard_system(Origin::triad, 0.05);
  const TimeSeries clim = generate_trajectory(model, 200000, 3);
  Eigen::Vector3d start(1.0, -1.0, 0.5);
  const Ensemble ens = perturbed_init(start, 1000, 0.04, 4);
  const EnsembleMoments mom = ensemble_forecast(model, ens, 400, 5);
  for (Index c = 0; c < 3; ++c) {
    std::vector<double> xs(clim.samples.col(c).data(), clim.samples.col(c).data() + clim.length());
    std::vector<double> col(static_cast<std::size_t>(clim.length()));
    for (Index i = 0; i < clim.length(); ++i) col[std::size_t(i)] = clim.samples(i, c);
    const auto [cm, cse] = testing::batch_mean_se(col);
    const double var = mom.second(400, c) - mom.mean(400, c) * mom.mean(400, c);
    const double ese = std::sqrt(var / 1000.0);
    CAPTURE(c);
    CHECK(std::abs(mom.mean(400, c) - cm) <= 3.0 * std::hypot(ese, cse));
  }
}

TEST_CASE("Lorenz-63 spread roughly doubles over 0.78 time units") {
  const SystemModel model = standard_system(Origin::lorenz63, 0.01);
  const TimeSeries starts = generate_trajectory(standard_system(Origin::lorenz63, 1.0), 12, 9);
  double log_ratio = 0.0;
  for (Index s = 0; s < starts.length(); ++s) {
    Ensemble ens = perturbed_init(starts.samples.row(s).transpose(), 1000, 0.04, 10 + std::uint64_t(s));
    const double before = std::sqrt(ens.spread());
    advance_ensemble(model, ens, 78);
    log_ratio += std::log(std::sqrt(ens.spread()) / before);
  }
  const double ratio = std::exp(log_ratio / double(starts.length()));
  CAPTURE(ratio);
  CHECK(ratio >= 1.5);
  CHECK(ratio <= 3.0);
}

TEST_CASE("two-member scalar analysis mean equals the Kalman formula") {
  for (auto [a, b, y, r] : {std::tuple{0.3, 1.1, 2.0, 0.5}, std::tuple{-1.0, 4.0, 0.0, 3.0},
                            std::tuple{5.0, 5.5, -2.0, 0.01}}) {
    Ensemble ens;
    ens.members.resize(2, 1);
    ens.members << a, b;
    const Ensemble out = etkf_update(ens, Eigen::VectorXd::Constant(1, y), r);
    const double mean = 0.5 * (a + b);
    const double pf = ((a - mean) * (a - mean) + (b - mean) * (b - mean)) / 1.0;
    const double expect = mean + pf / (pf + r) * (y - mean);
    CHECK(std::abs(out.mean()[0] - expect) <= 1e-12);
    // square-root update: analysis variance is (1 - K) P_f
    CHECK(sample_covariance(out.members)(0, 0) == doctest::Approx((1 - pf / (pf + r)) * pf).epsilon(1e-12));
  }
}

TEST_CASE("analysis covariance equals (I - K) P_f in three dimensions") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  Ensemble ens;
  ens.members.resize(12, 3);
  for (Index i = 0; i < ens.members.size(); ++i) ens.members.data()[i] = g(rng) * (1.0 + double(i % 3));
  const double r = 0.7;
  const Eigen::Vector3d y(0.5, -1.0, 2.0);
  const Ensemble out = etkf_update(ens, y, r);
  const Eigen::MatrixXd pf = sample_covariance(ens.members);
  const Eigen::MatrixXd gain = pf * (pf + r * Eigen::Matrix3d::Identity()).inverse();
  const Eigen::Vector3d mean_expect = ens.mean() + gain * (y - ens.mean());
  CHECK((out.mean() - mean_expect).cwiseAbs().maxCoeff() <= 1e-12);
  const Eigen::MatrixXd pa_expect = (Eigen::Matrix3d::Identity() - gain) * pf;
  CHECK((sample_covariance(out.members) - pa_expect).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(out.spread() <= ens.spread());
}

TEST_CASE("a useless observation leaves the ensemble alone") {
  const Ensemble ens = perturbed_init(Eigen::Vector3d(1, 2, 3), 50, 0.5, 7);
  const Ensemble out = etkf_update(ens, Eigen::Vector3d(10, -10, 0), 1e12);
  CHECK(((out.members - ens.members).cwiseAbs().array() / ens.members.cwiseAbs().array()).maxCoeff() <= 1e-6);
}

TEST_CASE("repeated assimilation of one observation converges monotonically") {
  Ensemble ens = perturbed_init(Eigen::Vector3d(0, 0, 0), 40, 1.0, 8);
  const Eigen::Vector3d y(1.0, -0.5, 2.0);
  double prev = (ens.mean() - y).norm();
  for (int it = 0; it < 15; ++it) {
    ens = etkf_update(ens, y, 0.05);
    const double d = (ens.mean() - y).norm();
    CHECK(d < prev);
    prev = d;
  }
  CHECK(prev < 0.05);
}

TEST_CASE("analysis never increases the spread") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 20; ++trial) {
    const Index k = 3 + trial;
    const Index d = 1 + trial % 6;
    Ensemble ens;
    ens.members.resize(k, d);
    for (Index i = 0; i < ens.members.size(); ++i) ens.members.data()[i] = 3.0 * g(rng);
    Eigen::VectorXd y(d);
    for (Index i = 0; i < d; ++i) y[i] = g(rng);
    const double r = std::exp(g(rng));
    CAPTURE(trial);
    CHECK(etkf_update(ens, y, r).spread() <= ens.spread() * (1 + 1e-12));
  }
}

TEST_CASE("perturbed initial ensembles") {
  const Eigen::Vector3d x(1, -2, 3);
  const Ensemble flat = perturbed_init(x, 10, 0.0, 3);
  for (Index k = 0; k < 10; ++k) CHECK((flat.members.row(k).transpose() - x).cwiseAbs().maxCoeff() == 0.0);
  const Ensemble a = perturbed_init(x, 1000, 0.04, 5);
  const Ensemble b = perturbed_init(x, 1000, 0.04, 5);
  CHECK(a.members == b.members);
  const Eigen::MatrixXd cov = sample_covariance(a.members);
  for (Index c = 0; c < 3; ++c) {
    CHECK(cov(c, c) >= 0.035);
    CHECK(cov(c, c) <= 0.045);
  }
  CHECK_THROWS_AS(perturbed_init(x, 1, 0.04, 5), ParameterError);
  CHECK_THROWS_AS(perturbed_init(x, 10, -0.1, 5), ParameterError);
}

TEST_CASE("ensemble errors") {
  Ensemble bad = perturbed_init(Eigen::Vector3d(1, 1, 1), 4, 0.1, 1);
  CHECK_THROWS_AS(etkf_update(bad, Eigen::Vector3d(0, 0, 0), 0.0), ParameterError);
  CHECK_THROWS_AS(etkf_update(bad, Eigen::Vector2d(0, 0), 1.0), ShapeError);
  CHECK_THROWS_AS(ensemble_forecast(standard_system(Origin::lorenz96, 0.05), bad, 2), ShapeError);
  bad.members(2, 1) = std::nan("");
  CHECK_THROWS_AS(bad.validate(), ParameterError);

  Ensemble wild = perturbed_init(Eigen::Vector3d(1, 1, 1), 4, 0.0, 1);
  wild.members.row(2) << 1e200, 1e200, 1e200;
  try {
    ensemble_forecast(standard_system(Origin::lorenz63, 0.1), wild, 5);
    FAIL("expected divergence");
  } catch (const IntegrationDiverged& e) {
    CHECK(std::string(e.what()).find("member 2") != std::string::npos);
  }
}

TEST_CASE("stochastic members use reproducible independent streams") {
  const SystemModel model = standard_system(Origin::triad, 0.05);
  const Ensemble ens = perturbed_init(Eigen::Vector3d(0.2, 0.1, -0.3), 50, 0.0, 1);
  const EnsembleMoments a = ensemble_forecast(model, ens, 20, 4);
  const EnsembleMoments b = ensemble_forecast(model, ens, 20, 4);
  const EnsembleMoments c = ensemble_forecast(model, ens, 20, 5);
  CHECK(a.mean == b.mean);
  CHECK(a.mean != c.mean);
  // identical starts diverge only through the noise
  CHECK(a.second(20, 0) - a.mean(20, 0) * a.mean(20, 0) > 1e-4);
}
