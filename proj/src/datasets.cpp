#include "difcast/datasets.hpp"

#include "difcast/errors.hpp"

#include <Eigen/Eigenvalues>

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

namespace difcast {

Rng make_stream(std::uint64_t master_seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(master_seed), static_cast<std::uint32_t>(master_seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32), 0x9e3779b9u};
  return Rng(seq);
}

std::string to_string(Origin origin) {
  switch (origin) {
    case Origin::lorenz63: return "lorenz63";
    case Origin::lorenz96: return "lorenz96";
    case Origin::triad: return "triad";
    case Origin::circle: return "circle";
    case Origin::external: return "external";
  }
  return "external";
}

Origin origin_from_string(const std::string& name) {
  for (Origin o : {Origin::lorenz63, Origin::lorenz96, Origin::triad, Origin::circle, Origin::external}) {
    if (to_string(o) == name) return o;
  }
  throw ParameterError("unknown system '" + name + "'");
}

void TimeSeries::validate() const {
  if (n_dim() < 1) throw ParameterError("time series must have n_dim >= 1");
  if (!(tau > 0.0) || !std::isfinite(tau)) throw ParameterError("time series tau must be positive");
  if (length() < 2) throw ParameterError("time series needs at least 2 samples");
}

void TriadParams::validate() const {
  if (std::abs(b1 + b2 + b3) > 1e-12) throw ParameterError("triad coefficients must satisfy B1+B2+B3=0");
  if ((l_mat + l_mat.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    throw ParameterError("triad L matrix must be skew-symmetric");
  if ((lambda - lambda.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    throw ParameterError("triad Lambda must be symmetric");
  if (!(dt > 0.0)) throw ParameterError("triad dt must be positive");
  if (sigma < 0.0) throw ParameterError("triad sigma must be non-negative");
}

Eigen::Matrix3d triad_noise_sqrt(const TriadParams& params) {
  params.validate();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(params.lambda);
  if (es.eigenvalues().minCoeff() <= 0.0)
    throw ParameterError("triad Lambda must be positive definite");
  return es.eigenvectors() * es.eigenvalues().cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
}

Eigen::Vector3d lorenz63_rhs(const Lorenz63Params& p, const Eigen::Vector3d& x) {
  return {p.sigma * (x[1] - x[0]), p.rho * x[0] - x[1] - x[0] * x[2], x[0] * x[1] - p.b * x[2]};
}

Eigen::VectorXd lorenz96_rhs(const Lorenz96Params& p, const Eigen::VectorXd& x) {
  const Index d = x.size();
  Eigen::VectorXd out(d);
  for (Index j = 0; j < d; ++j) {
    const double xp1 = x[(j + 1) % d];
    const double xm1 = x[(j + d - 1) % d];
    const double xm2 = x[(j + d - 2) % d];
    out[j] = (xp1 - xm2) * xm1 - x[j] + p.forcing;
  }
  return out;
}

Eigen::Vector3d triad_drift(const TriadParams& p, const Eigen::Vector3d& x) {
  const Eigen::Vector3d bilinear(p.b1 * x[1] * x[2], p.b2 * x[0] * x[2], p.b3 * x[0] * x[1]);
  return bilinear + p.l_mat * x - p.d_coef * (p.lambda * x);
}

namespace {

template <class Vec, class Rhs>
void rk4_step(Vec& x, double dt, const Rhs& rhs) {
  const Vec k1 = rhs(x);
  const Vec k2 = rhs(Vec(x + 0.5 * dt * k1));
  const Vec k3 = rhs(Vec(x + 0.5 * dt * k2));
  const Vec k4 = rhs(Vec(x + dt * k3));
  x += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

template <class Vec>
void check_finite(const Vec& x, Index step) {
  if (!x.allFinite()) throw IntegrationDiverged(step, "non-finite state");
}

void check_steps(Index n_steps, Index stride) {
  if (n_steps < 1) throw ParameterError("n_steps must be >= 1");
  if (stride < 1) throw ParameterError("stride must be >= 1");
  if (n_steps < stride) throw ParameterError("n_steps must cover at least one output interval");
}

// Records x0 and every stride-th state up to n_steps.
template <class Vec, class Stepper>
TimeSeries record(const Vec& x0, Index n_steps, Index stride, double dt, Origin origin, Stepper&& step) {
  check_steps(n_steps, stride);
  if (!(dt > 0.0)) throw ParameterError("dt must be positive");
  const Index length = n_steps / stride + 1;
  TimeSeries out;
  out.samples.resize(length, x0.size());
  out.tau = dt * static_cast<double>(stride);
  out.origin = origin;
  Vec x = x0;
  out.samples.row(0) = x.transpose();
  for (Index s = 1; s <= (length - 1) * stride; ++s) {
    step(x);
    check_finite(x, s);
    if (s % stride == 0) out.samples.row(s / stride) = x.transpose();
  }
  return out;
}

}  // namespace

TimeSeries integrate_lorenz63(const Lorenz63Params& params, const Eigen::Vector3d& x0, Index n_steps,
                              Index stride) {
  return record(x0, n_steps, stride, params.dt, Origin::lorenz63, [&](Eigen::Vector3d& x) {
    rk4_step(x, params.dt, [&](const Eigen::Vector3d& v) { return lorenz63_rhs(params, v); });
  });
}

TimeSeries integrate_lorenz96(const Lorenz96Params& params, const Eigen::VectorXd& x0, Index n_steps,
                              Index stride) {
  if (params.d < 4) throw ParameterError("Lorenz-96 needs d >= 4");
  if (x0.size() != params.d) throw ShapeError("Lorenz-96 initial state must have d entries");
  return record(x0, n_steps, stride, params.dt, Origin::lorenz96, [&](Eigen::VectorXd& x) {
    rk4_step(x, params.dt, [&](const Eigen::VectorXd& v) { return lorenz96_rhs(params, v); });
  });
}

TimeSeries integrate_triad(const TriadParams& params, const Eigen::Vector3d& x0, Index n_steps, Index stride) {
  const Eigen::Matrix3d noise = params.sigma * std::sqrt(params.dt) * triad_noise_sqrt(params);
  Rng rng(params.seed);
  std::normal_distribution<double> normal;
  return record(x0, n_steps, stride, params.dt, Origin::triad, [&](Eigen::Vector3d& x) {
    const Eigen::Vector3d xi(normal(rng), normal(rng), normal(rng));
    x += params.dt * triad_drift(params, x) + noise * xi;
  });
}

TimeSeries unit_circle_dataset(Index n) {
  if (n < 3) throw ParameterError("circle dataset needs N >= 3");
  TimeSeries out;
  out.samples.resize(n, 2);
  for (Index i = 0; i < n; ++i) {
    const double theta = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n);
    out.samples(i, 0) = std::cos(theta);
    out.samples(i, 1) = std::sin(theta);
  }
  out.tau = 1.0;
  out.origin = Origin::circle;
  return out;
}

Index SystemModel::n_dim() const {
  return std::visit(
      [](const auto& p) -> Index {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, Lorenz96Params>) return p.d;
        else return 3;
      },
      params);
}

double SystemModel::dt() const {
  return std::visit([](const auto& p) { return p.dt; }, params);
}

Origin SystemModel::origin() const {
  return std::visit(
      [](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, Lorenz63Params>) return Origin::lorenz63;
        else if constexpr (std::is_same_v<P, Lorenz96Params>) return Origin::lorenz96;
        else return Origin::triad;
      },
      params);
}

Eigen::VectorXd SystemModel::default_initial_state() const {
  return std::visit(
      [](const auto& p) -> Eigen::VectorXd {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, Lorenz63Params>) return Eigen::Vector3d(1.0, 1.0, 1.0);
        else if constexpr (std::is_same_v<P, Lorenz96Params>) return Eigen::VectorXd::Constant(p.d, p.forcing);
        else return Eigen::Vector3d(0.5, 0.5, 0.5);
      },
      params);
}

void SystemModel::advance(Eigen::Ref<Eigen::VectorXd> x, Index n_intervals, Rng& rng, Index step_offset) const {
  const Index n_steps = n_intervals * stride;
  std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, Lorenz63Params>) {
          Eigen::Vector3d v = x;
          for (Index s = 0; s < n_steps; ++s) {
            rk4_step(v, p.dt, [&](const Eigen::Vector3d& u) { return lorenz63_rhs(p, u); });
            if (!v.allFinite()) throw IntegrationDiverged(step_offset + s + 1, "non-finite state");
          }
          x = v;
        } else if constexpr (std::is_same_v<P, Lorenz96Params>) {
          Eigen::VectorXd v = x;
          for (Index s = 0; s < n_steps; ++s) {
            rk4_step(v, p.dt, [&](const Eigen::VectorXd& u) { return lorenz96_rhs(p, u); });
            if (!v.allFinite()) throw IntegrationDiverged(step_offset + s + 1, "non-finite state");
          }
          x = v;
        } else {
          const Eigen::Matrix3d noise = p.sigma * std::sqrt(p.dt) * triad_noise_sqrt(p);
          std::normal_distribution<double> normal;
          Eigen::Vector3d v = x;
          for (Index s = 0; s < n_steps; ++s) {
            const Eigen::Vector3d xi(normal(rng), normal(rng), normal(rng));
            v += p.dt * triad_drift(p, v) + noise * xi;
            if (!v.allFinite()) throw IntegrationDiverged(step_offset + s + 1, "non-finite state");
          }
          x = v;
        }
      },
      params);
}

SystemModel standard_system(Origin origin, double tau) {
  SystemModel model;
  switch (origin) {
    case Origin::lorenz63: model.params = Lorenz63Params{}; break;
    case Origin::lorenz96: model.params = Lorenz96Params{}; break;
    case Origin::triad: model.params = TriadParams{}; break;
    default: throw ParameterError("no dynamical model for system '" + to_string(origin) + "'");
  }
  const double steps = tau / model.dt();
  const auto stride = static_cast<Index>(std::llround(steps));
  if (stride < 1 || std::abs(steps - static_cast<double>(stride)) > 1e-9)
    throw ParameterError("tau must be a positive multiple of the integrator step " + std::to_string(model.dt()));
  model.stride = stride;
  return model;
}

TimeSeries generate_trajectory(const SystemModel& model, Index length, std::uint64_t seed, Index burn_in) {
  if (length < 2) throw ParameterError("trajectory length must be >= 2");
  if (burn_in < 0) throw ParameterError("burn-in must be non-negative");
  Rng rng = make_stream(seed, 0);
  std::normal_distribution<double> normal;
  Eigen::VectorXd x = model.default_initial_state();
  for (Index j = 0; j < x.size(); ++j) x[j] += 1e-3 * normal(rng);

  model.advance(x, burn_in, rng);
  TimeSeries out;
  out.samples.resize(length, x.size());
  out.tau = model.tau();
  out.origin = model.origin();
  out.samples.row(0) = x.transpose();
  for (Index i = 1; i < length; ++i) {
    model.advance(x, 1, rng, (burn_in + i - 1) * model.stride);
    out.samples.row(i) = x.transpose();
  }
  return out;
}

TimeSeries observe(const TimeSeries& series, const ObservationModel& model) {
  if (model.variance < 0.0) throw ParameterError("observation variance must be non-negative");
  if (model.kind == ObservationModel::Kind::noiseless) {
    if (model.variance != 0.0) throw ParameterError("noiseless observations must have zero variance");
    return series;
  }
  TimeSeries out = series;
  Rng rng = make_stream(model.seed, 1);
  std::normal_distribution<double> normal(0.0, std::sqrt(model.variance));
  for (Index i = 0; i < out.length(); ++i)
    for (Index j = 0; j < out.n_dim(); ++j) out.samples(i, j) += normal(rng);
  return out;
}

std::pair<TimeSeries, TimeSeries> split_train_verify(const TimeSeries& series, Index n, Index n_verify) {
  if (n < 2) throw ParameterError("training segment needs at least 2 samples");
  if (n_verify < 1) throw ParameterError("verification segment needs at least 1 sample");
  if (n + n_verify > series.length()) throw InsufficientLength(n + n_verify, series.length());
  TimeSeries train{series.samples.topRows(n), series.tau, series.origin};
  TimeSeries verify{series.samples.middleRows(n, n_verify), series.tau, series.origin};
  return {std::move(train), std::move(verify)};
}

namespace {

constexpr std::array<char, 4> kDftsMagic{'D', 'F', 'T', 'S'};
constexpr std::uint32_t kDftsVersion = 1;

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

template <class T>
void put(std::ostream& os, T value) {
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T get(std::istream& is, const std::filesystem::path& path) {
  T value{};
  if (!is.read(reinterpret_cast<char*>(&value), sizeof(T))) throw IoError("truncated file " + path.string());
  return value;
}

}  // namespace

void write_dfts(const std::filesystem::path& path, const TimeSeries& series) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os.write(kDftsMagic.data(), 4);
  put<std::uint32_t>(os, kDftsVersion);
  put<std::uint64_t>(os, static_cast<std::uint64_t>(series.n_dim()));
  put<std::uint64_t>(os, static_cast<std::uint64_t>(series.length()));
  put<double>(os, series.tau);
  os.write(reinterpret_cast<const char*>(series.samples.data()),
           static_cast<std::streamsize>(series.samples.size() * sizeof(double)));
  if (!os) throw IoError("write failed for " + path.string());
}

TimeSeries read_dfts(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::array<char, 4> magic{};
  if (!is.read(magic.data(), 4) || magic != kDftsMagic) throw IoError(path.string() + " is not a DFTS file");
  if (const auto version = get<std::uint32_t>(is, path); version != kDftsVersion)
    throw IoError("unsupported DFTS version " + std::to_string(version));
  const auto n_dim = get<std::uint64_t>(is, path);
  const auto length = get<std::uint64_t>(is, path);
  TimeSeries out;
  out.tau = get<double>(is, path);
  out.origin = Origin::external;
  out.samples.resize(static_cast<Index>(length), static_cast<Index>(n_dim));
  if (!is.read(reinterpret_cast<char*>(out.samples.data()),
               static_cast<std::streamsize>(out.samples.size() * sizeof(double))))
    throw IoError("truncated file " + path.string());
  return out;
}

}  // namespace difcast
