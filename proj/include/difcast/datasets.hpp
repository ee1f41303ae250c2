#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <utility>
#include <variant>

namespace difcast {

using Index = Eigen::Index;
//! Samples stored one state per row.
using StateMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Rng = std::mt19937_64;
//! Recorded in output metadata so seeds can be interpreted later.
inline constexpr const char* kRngAlgorithm = "mt19937_64+std::normal_distribution";

//! Independent stream for (master seed, stream index).
Rng make_stream(std::uint64_t master_seed, std::uint64_t stream);

enum class Origin { lorenz63, lorenz96, triad, circle, external };

std::string to_string(Origin origin);
Origin origin_from_string(const std::string& name);

//! Uniformly spaced samples of a trajectory.
struct TimeSeries {
  StateMatrix samples;
  double tau = 1.0;
  Origin origin = Origin::external;

  Index length() const { return samples.rows(); }
  Index n_dim() const { return samples.cols(); }
  auto state(Index i) const { return samples.row(i); }

  //! Throws ParameterError unless n_dim >= 1, tau > 0 and length >= 2.
  void validate() const;
};

struct Lorenz63Params {
  double sigma = 10.0;
  double rho = 28.0;
  double b = 8.0 / 3.0;
  double dt = 0.01;
};

struct Lorenz96Params {
  int d = 6;
  double forcing = 8.0;
  double dt = 0.05;
};

struct TriadParams {
  double b1 = 0.5;
  double b2 = 1.0;
  double b3 = -1.5;
  Eigen::Matrix3d l_mat = (Eigen::Matrix3d() << 0, 1, 0, -1, 0, -1, 0, 1, 0).finished();
  Eigen::Matrix3d lambda =
      (Eigen::Matrix3d() << 1, 0.5, 0.25, 0.5, 1, 0.5, 0.25, 0.5, 1).finished();
  double d_coef = 0.5;
  double sigma = 0.2;
  double dt = 0.01;
  std::uint64_t seed = 1;

  void validate() const;
};

//! Symmetric PSD square root of the triad noise covariance.
Eigen::Matrix3d triad_noise_sqrt(const TriadParams& params);

Eigen::Vector3d lorenz63_rhs(const Lorenz63Params& p, const Eigen::Vector3d& x);
Eigen::VectorXd lorenz96_rhs(const Lorenz96Params& p, const Eigen::VectorXd& x);
Eigen::Vector3d triad_drift(const TriadParams& p, const Eigen::Vector3d& x);

TimeSeries integrate_lorenz63(const Lorenz63Params& params, const Eigen::Vector3d& x0, Index n_steps,
                              Index stride);
TimeSeries integrate_lorenz96(const Lorenz96Params& params, const Eigen::VectorXd& x0, Index n_steps,
                              Index stride);
//! Euler-Maruyama; the noise stream is seeded from params.seed.
TimeSeries integrate_triad(const TriadParams& params, const Eigen::Vector3d& x0, Index n_steps,
                           Index stride);

TimeSeries unit_circle_dataset(Index n);

//! A dynamical system together with its output interval (stride integrator steps).
struct SystemModel {
  std::variant<Lorenz63Params, Lorenz96Params, TriadParams> params;
  Index stride = 1;

  Index n_dim() const;
  double dt() const;
  double tau() const { return dt() * static_cast<double>(stride); }
  bool stochastic() const { return std::holds_alternative<TriadParams>(params); }
  Origin origin() const;
  Eigen::VectorXd default_initial_state() const;

  //! Advances `x` by n_intervals output intervals. `rng` is only drawn from for
  //! stochastic systems; `step_offset` is used in divergence messages.
  void advance(Eigen::Ref<Eigen::VectorXd> x, Index n_intervals, Rng& rng, Index step_offset = 0) const;
};

//! Model with the experiment settings used for each system at the given output interval.
SystemModel standard_system(Origin origin, double tau);

//! Integrates burn_in output intervals from a perturbed default state, then records
//! `length` samples.
TimeSeries generate_trajectory(const SystemModel& model, Index length, std::uint64_t seed,
                               Index burn_in = 1000);

struct ObservationModel {
  enum class Kind { gaussian, noiseless };
  Kind kind = Kind::noiseless;
  double variance = 0.0;
  std::uint64_t seed = 0;

  static ObservationModel noiseless() { return {}; }
  static ObservationModel gaussian(double variance, std::uint64_t seed) {
    return {Kind::gaussian, variance, seed};
  }
};

//! y_n = x_n + eta_n with isotropic Gaussian eta_n.
TimeSeries observe(const TimeSeries& series, const ObservationModel& model);

//! First n samples become training data, the next n_verify become verification data.
std::pair<TimeSeries, TimeSeries> split_train_verify(const TimeSeries& series, Index n, Index n_verify);

// DFTS binary trajectory files.
void write_dfts(const std::filesystem::path& path, const TimeSeries& series);
TimeSeries read_dfts(const std::filesystem::path& path);

}  // namespace difcast
