#pragma once

#include "difcast/basis.hpp"
#include "difcast/config.hpp"
#include "difcast/datasets.hpp"
#include "difcast/kernel.hpp"
#include "difcast/metrics.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace difcast {

struct BasisVariant {
  Index me = 0;
  Index mq = 0;
  ColumnSelection select = ColumnSelection::middle();

  std::string label() const;
};

struct ExperimentConfig {
  Origin system = Origin::lorenz63;
  Index n = 5000;
  Index nv = 500;
  double tau = 0.1;
  std::uint64_t seed = 1;
  std::optional<double> epsilon;  // empty: tuned
  Sparsity sparsity;
  std::vector<BasisVariant> variants;
  ObservationModel::Kind obs_kind = ObservationModel::Kind::noiseless;
  double obs_variance = 0.0;
  Index spinup = 10;
  Index leads = 20;                   // forecast steps after lead 0
  std::vector<Index> trajectory_leads;  // leads (in steps) written as trajectory CSVs
  Index ensemble_members = 1000;      // 0 disables the reference
  double ensemble_perturbation = 0.04;  // initial variance for noiseless observations
  std::filesystem::path out_dir = "difcast_out";

  static ExperimentConfig from_document(const ConfigDocument& doc);
  static ExperimentConfig load(const std::filesystem::path& path);
  void validate() const;
};

struct VariantResult {
  BasisVariant variant;
  std::string description;  // realised basis, after rank truncation
  SkillCurve mean;
  std::optional<SkillCurve> second;  // against the ensemble reference
  double reconstruction_error = -1.0;  // circle runs only
};

struct ExperimentResult {
  double epsilon = 0.0;
  std::vector<VariantResult> variants;
  std::optional<SkillCurve> ensemble_mean;
  std::filesystem::path out_dir;
};

struct EnsembleSettings {
  Index members = 1000;
  double obs_variance = 0.0;   // > 0: ETKF cycling; 0: perturbed observations
  double perturbation = 0.04;  // initial variance when observations are noiseless
  std::uint64_t seed = 0;
};

struct ReferenceForecast {
  ForecastTable mean;
  ForecastTable second;
};

//! Monte-Carlo reference from every verification observation, leads 0..leads.
//! Gaussian observations are assimilated by sequential ETKF cycling and each
//! analysis is forecast; noiseless observations are perturbed directly.
ReferenceForecast ensemble_reference(const SystemModel& model, const TimeSeries& observations,
                                     const EnsembleSettings& settings, Index leads);

//! generate, tune, build operator, bases, propagators, initialise, forecast,
//! ensemble reference, evaluate. Writes CSVs and manifest.txt into out_dir.
//! Failures are rethrown as StageFailed after the partial manifest is written.
ExperimentResult run_experiment(const ExperimentConfig& config);

struct BenchRow {
  Index n = 0;
  Index m = 0;
  double qr_seconds = 0.0;
  double eig_seconds = 0.0;
};

//! Median wall-clock times of the M-column QR basis and of M leading eigenvectors
//! on one Lorenz-63 operator per N.
std::vector<BenchRow> bench_basis(const std::vector<Index>& sizes, const std::vector<Index>& ms, int trials,
                                  std::uint64_t seed = 1);

}  // namespace difcast
