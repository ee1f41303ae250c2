#include "difcast/metrics.hpp"

#include "difcast/errors.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace difcast {

ForecastTable::ForecastTable(Index n_points, Index n_leads, Index n_dim, double tau)
    : n_points_(n_points), n_leads_(n_leads), n_dim_(n_dim), tau_(tau) {
  if (n_points < 0 || n_leads < 1 || n_dim < 1) throw ParameterError("invalid forecast table shape");
  if (!(tau > 0.0)) throw ParameterError("forecast table needs a positive tau");
  data_.assign(static_cast<std::size_t>(n_points * n_leads * n_dim), 0.0);
}

Index ForecastTable::offset(Index n, Index j) const {
  if (n < 0 || n >= n_points_ || j < 0 || j >= n_leads_)
    throw ShapeError("forecast index (" + std::to_string(n) + ", " + std::to_string(j) + ") out of range");
  return (n * n_leads_ + j) * n_dim_;
}

Eigen::Map<Eigen::VectorXd> ForecastTable::at(Index n, Index j) {
  return {data_.data() + offset(n, j), n_dim_};
}

Eigen::Map<const Eigen::VectorXd> ForecastTable::at(Index n, Index j) const {
  return {data_.data() + offset(n, j), n_dim_};
}

Index SkillCurve::lead_index(double lead) const {
  for (std::size_t j = 0; j < leads.size(); ++j)
    if (std::abs(leads[j] - lead) <= 1e-9 * std::max(1.0, std::abs(lead))) return static_cast<Index>(j);
  throw ParameterError("lead " + format_double(lead) + " is not on the skill curve");
}

void SkillCurve::validate() const {
  for (std::size_t j = 1; j < leads.size(); ++j)
    if (!(leads[j] > leads[j - 1])) throw ParameterError("skill curve leads must increase strictly");
  if (per_coord.rows() != static_cast<Index>(leads.size()) || aggregate.size() != per_coord.rows())
    throw ShapeError("skill curve arrays disagree in length");
  if ((per_coord.array() < 0.0).any() || (aggregate.array() < 0.0).any())
    throw ParameterError("skill curve has negative errors");
}

namespace {

template <class Target>
SkillCurve reduce(const ForecastTable& forecast, Index n_dim, Index spinup, Target&& target) {
  if (spinup < 0) throw ParameterError("spin-up must be non-negative");
  const Index j_max = forecast.n_leads() - 1;
  const Index count = forecast.n_points() - j_max - spinup;
  if (count < 1) throw InsufficientLength(spinup + j_max + 1, forecast.n_points());
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(forecast.n_leads(), n_dim);
  for (Index n = spinup; n < spinup + count; ++n)
    for (Index j = 0; j <= j_max; ++j) sum.row(j) += (forecast.at(n, j) - target(n, j)).cwiseAbs2().transpose();
  SkillCurve out;
  out.effective_count = count;
  out.per_coord = (sum / static_cast<double>(count)).cwiseSqrt();
  out.aggregate = out.per_coord.cwiseAbs2().rowwise().mean().cwiseSqrt();
  out.leads.resize(static_cast<std::size_t>(forecast.n_leads()));
  for (Index j = 0; j <= j_max; ++j) out.leads[static_cast<std::size_t>(j)] = static_cast<double>(j) * forecast.tau();
  out.meta["spinup"] = std::to_string(spinup);
  out.meta["n_verify"] = std::to_string(forecast.n_points());
  out.meta["effective_count"] = std::to_string(count);
  return out;
}

}  // namespace

SkillCurve rmse_mean(const ForecastTable& forecast_means, const TimeSeries& truth, Index spinup) {
  if (truth.n_dim() != forecast_means.n_dim()) throw ShapeError("truth and forecast dimensions differ");
  if (truth.length() < forecast_means.n_points())
    throw InsufficientLength(forecast_means.n_points(), truth.length());
  return reduce(forecast_means, truth.n_dim(), spinup,
                [&truth](Index n, Index j) { return truth.samples.row(n + j).transpose(); });
}

SkillCurve rmse_second_moment(const ForecastTable& forecast_m2, const ForecastTable& reference_m2, Index spinup) {
  if (reference_m2.empty()) throw ParameterError("second-moment skill needs an ensemble reference");
  if (reference_m2.n_points() != forecast_m2.n_points() || reference_m2.n_leads() != forecast_m2.n_leads() ||
      reference_m2.n_dim() != forecast_m2.n_dim())
    throw ShapeError("reference and forecast tables differ in shape");
  return reduce(forecast_m2, forecast_m2.n_dim(), spinup,
                [&reference_m2](Index n, Index j) { return reference_m2.at(n, j); });
}

void write_skill_csv(const std::filesystem::path& path, const SkillCurve& curve) {
  curve.validate();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << "lead,coord,value\n";
  for (Index j = 0; j < curve.per_coord.rows(); ++j) {
    const std::string lead = format_double(curve.leads[static_cast<std::size_t>(j)]);
    for (Index c = 0; c < curve.per_coord.cols(); ++c)
      os << lead << ',' << c << ',' << format_double(curve.per_coord(j, c)) << '\n';
    os << lead << ",all," << format_double(curve.aggregate[j]) << '\n';
  }
  if (!os) throw IoError("failed writing " + path.string());
}

SkillCurve read_skill_csv(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(is, line) || line != "lead,coord,value") throw IoError(path.string() + ": bad CSV header");
  std::map<double, std::map<Index, double>> coords;
  std::map<double, double> all;
  Index n_dim = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string lead_s, coord_s, value_s;
    if (!std::getline(ss, lead_s, ',') || !std::getline(ss, coord_s, ',') || !std::getline(ss, value_s))
      throw IoError(path.string() + ": malformed row '" + line + "'");
    double lead = 0.0, value = 0.0;
    std::from_chars(lead_s.data(), lead_s.data() + lead_s.size(), lead);
    std::from_chars(value_s.data(), value_s.data() + value_s.size(), value);
    if (coord_s == "all") {
      all[lead] = value;
    } else {
      const Index c = std::stoll(coord_s);
      coords[lead][c] = value;
      n_dim = std::max(n_dim, c + 1);
    }
  }
  SkillCurve out;
  out.per_coord.resize(static_cast<Index>(all.size()), n_dim);
  out.aggregate.resize(static_cast<Index>(all.size()));
  Index j = 0;
  for (const auto& [lead, value] : all) {
    out.leads.push_back(lead);
    out.aggregate[j] = value;
    for (Index c = 0; c < n_dim; ++c) out.per_coord(j, c) = coords.at(lead).at(c);
    ++j;
  }
  return out;
}

}  // namespace difcast
