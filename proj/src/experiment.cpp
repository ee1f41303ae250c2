#include "difcast/experiment.hpp"

#include "difcast/ensemble.hpp"
#include "difcast/errors.hpp"
#include "difcast/initcond.hpp"
#include "difcast/propagator.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

namespace difcast {

namespace {

constexpr const char* kVersion = "0.1.0";

std::uint64_t mix_seed(std::uint64_t master, std::uint64_t a) {
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (a + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

class Manifest {
 public:
  explicit Manifest(std::filesystem::path path) : path_(std::move(path)) {}
  void set(const std::string& key, const std::string& value) {
    for (auto& [k, v] : entries_)
      if (k == key) {
        v = value;
        return;
      }
    entries_.emplace_back(key, value);
  }
  void write() const {
    std::ofstream os(path_, std::ios::binary);
    if (!os) throw IoError("cannot write " + path_.string());
    for (const auto& [k, v] : entries_) os << k << '=' << v << '\n';
  }

 private:
  std::filesystem::path path_;
  std::vector<std::pair<std::string, std::string>> entries_;
};

template <class F>
auto run_stage(const std::string& stage, Manifest& manifest, F&& body) -> decltype(body()) {
  std::cerr << "[" << stage << "]\n";
  const auto t0 = Clock::now();
  try {
    if constexpr (std::is_void_v<decltype(body())>) {
      body();
      manifest.set("time." + stage, format_double(seconds_since(t0)));
    } else {
      auto out = body();
      manifest.set("time." + stage, format_double(seconds_since(t0)));
      return out;
    }
  } catch (const StageFailed&) {
    throw;
  } catch (const std::exception& e) {
    manifest.set("status", "failed");
    manifest.set("failed_stage", stage);
    manifest.set("error", e.what());
    manifest.write();
    throw StageFailed(stage, e.what());
  }
}

void write_trajectory_csv(const std::filesystem::path& path, const ForecastTable& forecast, const TimeSeries& truth,
                          Index lead) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string());
  os << "time,coord,truth,forecast\n";
  for (Index n = 0; n + lead < forecast.n_points(); ++n) {
    const std::string t = format_double(static_cast<double>(n + lead) * forecast.tau());
    const auto f = forecast.at(n, lead);
    for (Index c = 0; c < forecast.n_dim(); ++c)
      os << t << ',' << c << ',' << format_double(truth.samples(n + lead, c)) << ',' << format_double(f[c]) << '\n';
  }
}

}  // namespace

std::string BasisVariant::label() const {
  std::string sel = select.describe();
  std::replace(sel.begin(), sel.end(), ':', '-');
  std::replace(sel.begin(), sel.end(), ',', '-');
  return "me" + std::to_string(me) + "_mq" + std::to_string(mq) + (mq > 0 ? "_" + sel : "");
}

ExperimentConfig ExperimentConfig::from_document(const ConfigDocument& doc) {
  ExperimentConfig c;
  try {
    c.system = origin_from_string(doc.get("system").as_string("system"));
  } catch (const ParameterError& e) {
    throw ConfigError(e.what());
  }
  auto integer = [&doc](const std::string& key, Index fallback) {
    return doc.has(key) ? static_cast<Index>(doc.get(key).as_int(key)) : fallback;
  };
  c.n = integer("n", c.n);
  c.nv = integer("nv", c.nv);
  if (doc.has("tau")) c.tau = doc.get("tau").as_double("tau");
  if (doc.has("seed")) c.seed = static_cast<std::uint64_t>(doc.get("seed").as_int("seed"));
  if (doc.has("epsilon")) {
    const auto& v = doc.get("epsilon");
    if (v.kind == ConfigValue::Kind::string) {
      if (v.text != "auto") throw ConfigError("'epsilon' must be \"auto\" or a number");
    } else {
      c.epsilon = v.as_double("epsilon");
    }
  }
  if (doc.has("sparsity")) {
    try {
      c.sparsity = Sparsity::parse(doc.get("sparsity").as_string("sparsity"));
    } catch (const ParameterError& e) {
      throw ConfigError(e.what());
    }
  }
  c.spinup = integer("spinup", c.spinup);
  c.leads = integer("leads", c.leads);
  if (doc.has("trajectory_leads"))
    for (const auto& v : doc.get("trajectory_leads").as_array("trajectory_leads"))
      c.trajectory_leads.push_back(static_cast<Index>(v.as_int("trajectory_leads")));
  if (doc.has("out_dir")) c.out_dir = doc.get("out_dir").as_string("out_dir");

  if (doc.has("obs.kind")) {
    const std::string kind = doc.get("obs.kind").as_string("obs.kind");
    if (kind == "gaussian") c.obs_kind = ObservationModel::Kind::gaussian;
    else if (kind == "noiseless") c.obs_kind = ObservationModel::Kind::noiseless;
    else throw ConfigError("'obs.kind' must be gaussian or noiseless");
  }
  if (doc.has("obs.variance")) c.obs_variance = doc.get("obs.variance").as_double("obs.variance");
  c.ensemble_members = integer("ensemble.members", c.ensemble_members);
  if (doc.has("ensemble.perturbation"))
    c.ensemble_perturbation = doc.get("ensemble.perturbation").as_double("ensemble.perturbation");

  auto it = doc.table_arrays.find("basis.variants");
  if (it != doc.table_arrays.end()) {
    for (const ConfigTable& t : it->second) {
      BasisVariant v;
      for (const auto& [key, value] : t) {
        if (key == "me") v.me = static_cast<Index>(value.as_int("basis.variants.me"));
        else if (key == "mq") v.mq = static_cast<Index>(value.as_int("basis.variants.mq"));
        else if (key == "select") {
          try {
            v.select = ColumnSelection::parse(value.as_string("basis.variants.select"));
          } catch (const std::exception& e) {
            throw ConfigError(std::string("basis.variants.select: ") + e.what());
          }
        } else {
          throw ConfigError("unknown key 'basis.variants." + key + "'");
        }
      }
      c.variants.push_back(v);
    }
  }
  static const char* known[] = {"system", "n", "nv", "tau", "seed", "epsilon", "sparsity", "spinup", "leads",
                                "trajectory_leads", "out_dir", "obs.kind", "obs.variance", "ensemble.members",
                                "ensemble.perturbation"};
  for (const auto& [key, value] : doc.values)
    if (std::find(std::begin(known), std::end(known), key) == std::end(known))
      throw ConfigError("unknown config key '" + key + "'");
  for (const auto& [name, tables] : doc.table_arrays)
    if (name != "basis.variants") throw ConfigError("unknown table array '" + name + "'");
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  return from_document(ConfigDocument::load(path));
}

void ExperimentConfig::validate() const {
  if (system == Origin::external) throw ConfigError("external data is not supported by evaluate");
  if (n < 2) throw ConfigError("n must be at least 2");
  if (!(tau > 0.0)) throw ConfigError("tau must be positive");
  if (epsilon && !(*epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  if (variants.empty()) throw ConfigError("at least one basis variant is required");
  for (const auto& v : variants) {
    if (v.me < 0 || v.mq < 0 || v.me + v.mq == 0) throw ConfigError("variant " + v.label() + " is empty");
    if (v.me + v.mq > n) throw ConfigError("variant " + v.label() + " needs more than n basis functions");
  }
  if (system == Origin::circle) return;
  if (spinup < 0) throw ConfigError("spinup must be non-negative");
  if (leads < 0) throw ConfigError("leads must be non-negative");
  if (nv < spinup + 1) throw ConfigError("nv must be at least spinup + 1");
  if (nv < spinup + leads + 1) throw ConfigError("nv must cover spinup + leads + 1 verification points");
  for (Index l : trajectory_leads)
    if (l < 0 || l > leads) throw ConfigError("trajectory lead " + std::to_string(l) + " outside 0..leads");
  if (obs_kind == ObservationModel::Kind::gaussian && !(obs_variance > 0.0))
    throw ConfigError("gaussian observations need a positive variance");
  if (obs_kind == ObservationModel::Kind::noiseless && obs_variance != 0.0)
    throw ConfigError("noiseless observations must have variance 0");
  if (ensemble_members == 1 || ensemble_members < 0) throw ConfigError("ensemble.members must be 0 or >= 2");
  if (ensemble_perturbation < 0.0) throw ConfigError("ensemble.perturbation must be non-negative");
}

ReferenceForecast ensemble_reference(const SystemModel& model, const TimeSeries& observations,
                                     const EnsembleSettings& settings, Index leads) {
  if (settings.obs_variance < 0.0) throw ParameterError("observation variance must be non-negative");
  if (std::abs(observations.tau - model.tau()) > 1e-9 * std::max(1.0, model.tau()))
    throw ParameterError("observations and model use different sampling intervals");
  const Index nv = observations.length();
  ReferenceForecast out{ForecastTable(nv, leads + 1, observations.n_dim(), model.tau()), {}};
  out.second = out.mean;
  const bool gaussian = settings.obs_variance > 0.0;
  Ensemble analysis;
  for (Index n = 0; n < nv; ++n) {
    const Eigen::VectorXd y = observations.samples.row(n).transpose();
    const auto stream = 3 * static_cast<std::uint64_t>(n);
    if (gaussian) {
      if (n == 0) analysis = perturbed_init(y, settings.members, settings.obs_variance, mix_seed(settings.seed, 0));
      else advance_ensemble(model, analysis, 1, mix_seed(settings.seed, stream + 1));
      analysis = etkf_update(analysis, y, settings.obs_variance);
    } else {
      analysis = perturbed_init(y, settings.members, settings.perturbation, mix_seed(settings.seed, stream));
    }
    const EnsembleMoments m = ensemble_forecast(model, analysis, leads, mix_seed(settings.seed, stream + 2));
    for (Index j = 0; j <= leads; ++j) {
      out.mean.at(n, j) = m.mean.row(j).transpose();
      out.second.at(n, j) = m.second.row(j).transpose();
    }
  }
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  std::filesystem::create_directories(config.out_dir);
  Manifest manifest(config.out_dir / "manifest.txt");
  manifest.set("difcast_version", kVersion);
  manifest.set("eigen_version", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                    "." + std::to_string(EIGEN_MINOR_VERSION));
  manifest.set("status", "running");
  manifest.set("system", to_string(config.system));
  manifest.set("n", std::to_string(config.n));
  manifest.set("nv", std::to_string(config.nv));
  manifest.set("tau", format_double(config.tau));
  manifest.set("seed.data", std::to_string(config.seed));
  manifest.set("rng", kRngAlgorithm);
  manifest.set("sparsity", config.sparsity.describe());
  manifest.set("alpha", "0.5");
  manifest.set("decision.renormalize", "total mass rescaled after every forecast step");
  manifest.set("decision.clip", "initialisation and bayesian correction only");
  manifest.set("decision.nystrom", "kernel-weighted sum without eigenvalue division");
  manifest.set("decision.rmse", "squared norm divided by n_dim; per coordinate also written");
  manifest.set("decision.spectral_clamp", "none");
  ExperimentResult result;
  result.out_dir = config.out_dir;

  const bool circle = config.system == Origin::circle;
  SystemModel model;
  std::shared_ptr<const TimeSeries> train;
  TimeSeries verify, observations;
  run_stage("generate", manifest, [&] {
    if (circle) {
      train = std::make_shared<const TimeSeries>(unit_circle_dataset(config.n));
      return;
    }
    model = standard_system(config.system, config.tau);
    const TimeSeries all = generate_trajectory(model, config.n + config.nv, config.seed);
    auto [tr, ve] = split_train_verify(all, config.n, config.nv);
    train = std::make_shared<const TimeSeries>(std::move(tr));
    verify = std::move(ve);
    const std::uint64_t obs_seed = mix_seed(config.seed, 1);
    manifest.set("seed.obs", std::to_string(obs_seed));
    manifest.set("obs.kind", config.obs_kind == ObservationModel::Kind::gaussian ? "gaussian" : "noiseless");
    manifest.set("obs.variance", format_double(config.obs_variance));
    observations = observe(verify, config.obs_kind == ObservationModel::Kind::gaussian
                                       ? ObservationModel::gaussian(config.obs_variance, obs_seed)
                                       : ObservationModel::noiseless());
  });

  result.epsilon = run_stage("tune", manifest, [&] {
    if (config.epsilon) {
      manifest.set("epsilon.source", "config");
      return *config.epsilon;
    }
    const BandwidthTuning t = tune_bandwidth(*train);
    manifest.set("epsilon.source", "tuned");
    manifest.set("epsilon.slope", format_double(t.slope));
    return t.epsilon;
  });
  manifest.set("epsilon", format_double(result.epsilon));

  const auto op = run_stage("build-operator", manifest,
                            [&] { return build_diffusion_operator(train, result.epsilon, config.sparsity); });

  Index max_me = 0;
  for (const auto& v : config.variants) max_me = std::max(max_me, v.me);
  std::shared_ptr<const BasisSet> eigen_all;
  if (max_me > 0)
    eigen_all = run_stage("eigenbasis", manifest,
                          [&] { return std::make_shared<const BasisSet>(leading_eigenbasis(op, max_me, {})); });

  std::vector<ForecastTable> second_tables;  // scored once the ensemble reference exists
  for (std::size_t vi = 0; vi < config.variants.size(); ++vi) {
    const BasisVariant& variant = config.variants[vi];
    const std::string label = variant.label();
    VariantResult vr;
    vr.variant = variant;
    manifest.set("variant." + label + ".select_seed", std::to_string(variant.select.seed));

    auto basis = run_stage("basis:" + label, manifest, [&] {
      BasisSet eigen;
      if (variant.me > 0) {
        eigen = *eigen_all;
        eigen.values = eigen_all->values.leftCols(variant.me);
        eigen.eigenvalues = eigen_all->eigenvalues.head(variant.me);
        eigen.m_eigen = variant.me;
      }
      if (variant.mq == 0) return std::make_shared<const BasisSet>(std::move(eigen));
      return std::make_shared<const BasisSet>(
          qr_mixed_basis(op, variant.me > 0 ? &eigen : nullptr, variant.mq, variant.select));
    });
    vr.description = basis->describe();
    manifest.set("variant." + label + ".basis", vr.description);
    manifest.set("variant." + label + ".dropped_columns", std::to_string(basis->deficiency));

    if (circle) {
      const Eigen::MatrixXd x = train->samples;
      vr.reconstruction_error = (x - reconstruct(*basis, x)).norm();
      manifest.set("variant." + label + ".reconstruction_error", format_double(vr.reconstruction_error));
      result.variants.push_back(std::move(vr));
      continue;
    }

    const Propagator prop = run_stage("propagator:" + label, manifest, [&] { return build_propagator(basis, *train); });

    const std::vector<DensityState> states = run_stage("init:" + label, manifest, [&] {
      if (config.obs_kind == ObservationModel::Kind::gaussian) {
        FilterConfig fc;
        fc.spinup_discard = config.spinup;
        fc.likelihood_variance = config.obs_variance;
        return bayesian_filter_init(*op, prop, observations, fc).states;
      }
      return nystrom_init_series(*op, *basis, observations);
    });

    ForecastTable means(config.nv, config.leads + 1, train->n_dim(), config.tau);
    ForecastTable seconds = means;
    run_stage("forecast:" + label, manifest, [&] {
      const MomentProjector moments(*basis);
      for (Index n = 0; n < config.nv; ++n) {
        DensityState s = states[static_cast<std::size_t>(n)];
        for (Index j = 0; j <= config.leads; ++j) {
          if (j > 0) s = step(prop, s, 1);
          means.at(n, j) = moments.mean(s);
          seconds.at(n, j) = moments.second_moment(s);
        }
      }
    });

    vr.mean = run_stage("evaluate:" + label, manifest, [&] {
      SkillCurve c = rmse_mean(means, verify, config.spinup);
      c.meta["basis"] = vr.description;
      write_skill_csv(config.out_dir / ("skill_mean_" + label + ".csv"), c);
      for (Index l : config.trajectory_leads)
        write_trajectory_csv(config.out_dir / ("trajectory_" + label + "_lead" + std::to_string(l) + ".csv"), means,
                             verify, l);
      return c;
    });
    manifest.set("variant." + label + ".effective_count", std::to_string(vr.mean.effective_count));
    result.variants.push_back(std::move(vr));
    second_tables.push_back(std::move(seconds));
  }

  if (!circle && config.ensemble_members > 0) {
    const std::uint64_t ens_seed = mix_seed(config.seed, 2);
    manifest.set("seed.ensemble", std::to_string(ens_seed));
    manifest.set("ensemble.members", std::to_string(config.ensemble_members));
    const bool gaussian = config.obs_kind == ObservationModel::Kind::gaussian;
    manifest.set("ensemble.init", gaussian ? "etkf cycling over verification observations"
                                           : "perturbed truth, variance " + format_double(config.ensemble_perturbation));
    const ReferenceForecast ref = run_stage("ensemble", manifest, [&] {
      EnsembleSettings es;
      es.members = config.ensemble_members;
      es.obs_variance = gaussian ? config.obs_variance : 0.0;
      es.perturbation = config.ensemble_perturbation;
      es.seed = ens_seed;
      return ensemble_reference(model, observations, es, config.leads);
    });
    const ForecastTable& ens_mean = ref.mean;
    const ForecastTable& ens_m2 = ref.second;
    run_stage("evaluate:ensemble", manifest, [&] {
      SkillCurve c = rmse_mean(ens_mean, verify, config.spinup);
      c.meta["basis"] = "ensemble";
      write_skill_csv(config.out_dir / "skill_mean_ensemble.csv", c);
      for (Index l : config.trajectory_leads)
        write_trajectory_csv(config.out_dir / ("trajectory_ensemble_lead" + std::to_string(l) + ".csv"), ens_mean,
                             verify, l);
      result.ensemble_mean = std::move(c);
      for (std::size_t k = 0; k < result.variants.size(); ++k) {
        VariantResult& v = result.variants[k];
        SkillCurve s = rmse_second_moment(second_tables[k], ens_m2, config.spinup);
        s.meta["basis"] = v.description;
        write_skill_csv(config.out_dir / ("skill_m2_" + v.variant.label() + ".csv"), s);
        v.second = std::move(s);
      }
    });
  }

  if (circle) {
    std::ofstream os(config.out_dir / "reconstruction.csv", std::ios::binary);
    os << "variant,basis,error\n";
    for (const auto& v : result.variants)
      os << v.variant.label() << ',' << v.description << ',' << format_double(v.reconstruction_error) << '\n';
  }
  manifest.set("status", "ok");
  manifest.write();
  return result;
}

std::vector<BenchRow> bench_basis(const std::vector<Index>& sizes, const std::vector<Index>& ms, int trials,
                                  std::uint64_t seed) {
  if (trials < 1) throw ParameterError("bench needs at least one trial");
  std::vector<BenchRow> rows;
  const SystemModel model = standard_system(Origin::lorenz63, 0.1);
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t h = v.size() / 2;
    return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
  };
  for (Index n : sizes) {
    auto train = std::make_shared<const TimeSeries>(generate_trajectory(model, n, seed));
    const double eps = tune_bandwidth(*train).epsilon;
    const auto op = build_diffusion_operator(train, eps, Sparsity::dense());
    for (Index m : ms) {
      if (m < 1 || m >= n) throw ParameterError("bench needs 1 <= M < N");
      std::vector<double> qr_t, eig_t;
      for (int t = 0; t < trials; ++t) {
        auto t0 = Clock::now();
        const BasisSet q = qr_mixed_basis(op, nullptr, m, ColumnSelection::middle());
        qr_t.push_back(seconds_since(t0));
        t0 = Clock::now();
        const BasisSet e = leading_eigenbasis(op, m, {});
        eig_t.push_back(seconds_since(t0));
      }
      rows.push_back({n, m, median(qr_t), median(eig_t)});
    }
  }
  return rows;
}

}  // namespace difcast
