#pragma once

#include "difcast/datasets.hpp"
#include "difcast/matrix_io.hpp"

#include <filesystem>
#include <vector>

namespace difcast {

//! Forecast vectors indexed by verification point n, lead j and coordinate.
class ForecastTable {
 public:
  ForecastTable() = default;
  ForecastTable(Index n_points, Index n_leads, Index n_dim, double tau);

  Index n_points() const { return n_points_; }
  Index n_leads() const { return n_leads_; }  // leads 0 .. n_leads-1
  Index n_dim() const { return n_dim_; }
  double tau() const { return tau_; }
  bool empty() const { return data_.empty(); }

  Eigen::Map<Eigen::VectorXd> at(Index n, Index j);
  Eigen::Map<const Eigen::VectorXd> at(Index n, Index j) const;

 private:
  Index offset(Index n, Index j) const;

  Index n_points_ = 0, n_leads_ = 0, n_dim_ = 0;
  double tau_ = 0.0;
  std::vector<double> data_;
};

struct SkillCurve {
  std::vector<double> leads;     // j tau, strictly increasing
  Eigen::MatrixXd per_coord;     // lead x coordinate
  Eigen::VectorXd aggregate;     // sqrt(mean over coordinates of per_coord^2)
  Index effective_count = 0;     // verification points entering every lead
  Metadata meta;

  Index lead_index(double lead) const;
  void validate() const;
};

//! RMSE of forecast means against truth over n in [spinup, N_V - n_leads], the range
//! where every lead still has a verifying sample.
SkillCurve rmse_mean(const ForecastTable& forecast_means, const TimeSeries& truth, Index spinup);

//! Same reduction for second moments against an ensemble reference.
SkillCurve rmse_second_moment(const ForecastTable& forecast_m2, const ForecastTable& reference_m2, Index spinup);

//! Header lead,coord,value; coordinates 0..n-1 followed by "all" for the aggregate.
void write_skill_csv(const std::filesystem::path& path, const SkillCurve& curve);
SkillCurve read_skill_csv(const std::filesystem::path& path);

}  // namespace difcast
