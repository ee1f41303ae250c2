#include "difcast/ensemble.hpp"
#include "difcast/errors.hpp"
#include "difcast/experiment.hpp"
#include "difcast/initcond.hpp"
#include "difcast/matrix_io.hpp"
#include "difcast/persist.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

using namespace difcast;
namespace fs = std::filesystem;

namespace {

fs::path with_suffix(const fs::path& path, const std::string& tag) {
  fs::path out = path;
  out.replace_extension();
  out += "." + tag + ".dfts";
  return out;
}

void cmd_generate(const std::string& system, Index n, Index nv, double tau, std::uint64_t seed, double obs_var,
                  const fs::path& out) {
  const Origin origin = origin_from_string(system);
  if (origin == Origin::circle) {
    write_dfts(out, unit_circle_dataset(n));
    std::cout << "wrote " << out << " (" << n << " circle points)\n";
    return;
  }
  const SystemModel model = standard_system(origin, tau);
  const TimeSeries all = generate_trajectory(model, n + nv, seed);
  auto [train, verify] = split_train_verify(all, n, nv);
  write_dfts(out, train);
  std::cout << "wrote " << out << " (" << train.length() << " x " << train.n_dim() << ")\n";
  if (nv > 0) {
    write_dfts(with_suffix(out, "verify"), verify);
    const TimeSeries obs = observe(verify, obs_var > 0.0 ? ObservationModel::gaussian(obs_var, seed)
                                                         : ObservationModel::noiseless());
    write_dfts(with_suffix(out, "obs"), obs);
    std::cout << "wrote " << with_suffix(out, "verify") << " and " << with_suffix(out, "obs") << '\n';
  }
}

void cmd_build_operator(const fs::path& in, const std::string& epsilon, Index knn, const fs::path& out) {
  auto train = std::make_shared<const TimeSeries>(read_dfts(in));
  double eps = 0.0;
  if (epsilon == "auto") {
    const BandwidthTuning t = tune_bandwidth(*train);
    eps = t.epsilon;
    std::cout << "tuned epsilon " << format_double(eps) << " (slope " << format_double(t.slope) << ")\n";
  } else {
    eps = parse_double(epsilon);
  }
  const auto op = build_diffusion_operator(train, eps, knn > 0 ? Sparsity::knn(knn) : Sparsity::dense());
  save_operator(out, *op, in);
  std::cout << "wrote " << out << " (N=" << op->size() << ", " << op->sparsity().describe()
            << ", row-sum defect " << op->row_sum_defect() << ")\n";
}

void cmd_basis(const fs::path& op_path, Index me, Index mq, const std::string& select, const fs::path& out) {
  const auto op = load_operator(op_path);
  BasisSet eigen;
  if (me > 0) eigen = leading_eigenbasis(op, me, {});
  BasisSet basis = mq > 0 ? qr_mixed_basis(op, me > 0 ? &eigen : nullptr, mq, ColumnSelection::parse(select))
                          : std::move(eigen);
  if (basis.size() == 0) throw ParameterError("basis needs --me or --mq");
  save_basis(out, basis, op_path);
  std::cout << "wrote " << out << " (" << basis.describe() << ", orthonormality defect "
            << basis.orthonormality_defect() << ")\n";
}

void cmd_propagator(const fs::path& basis_path, const fs::path& train_path, const fs::path& out) {
  const auto basis = load_basis(basis_path);
  const Propagator prop = build_propagator(basis, read_dfts(train_path));
  save_propagator(out, prop, basis_path);
  std::cout << "wrote " << out << " (" << prop.size() << " x " << prop.size() << ", tau " << prop.tau << ")\n";
}

void cmd_filter_init(const fs::path& op_path, const fs::path& basis_path, const fs::path& prop_path,
                     const fs::path& obs_path, double obs_var, Index spinup, const fs::path& out) {
  const auto op = load_operator(op_path);
  Propagator prop = load_propagator(prop_path);
  const auto basis = load_basis(basis_path);
  if (basis->values.rows() != prop.basis->values.rows() || basis->size() != prop.size())
    throw ShapeError("basis does not match the propagator");
  const TimeSeries obs = read_dfts(obs_path);
  std::vector<DensityState> states;
  Metadata meta;
  if (obs_var > 0.0) {
    FilterConfig fc;
    fc.spinup_discard = spinup;
    fc.likelihood_variance = obs_var;
    states = bayesian_filter_init(*op, prop, obs, fc).states;
    meta["method"] = "bayesian filter";
    meta["obs_variance"] = format_double(obs_var);
  } else {
    states = nystrom_init_series(*op, *basis, obs);
    meta["method"] = "nystrom delta";
    meta["nystrom"] = "kernel-weighted sum without eigenvalue division";
  }
  Eigen::MatrixXd coeffs(static_cast<Index>(states.size()), prop.size());
  for (std::size_t n = 0; n < states.size(); ++n) coeffs.row(static_cast<Index>(n)) = states[n].coeffs.transpose();
  meta["kind"] = "initial_states";
  meta["spinup"] = std::to_string(spinup);
  meta["basis"] = fs::absolute(basis_path).string();
  write_dfm(out, coeffs);
  write_metadata(out, meta);
  std::cout << "wrote " << out << " (" << coeffs.rows() << " states, first " << spinup << " are spin-up)\n";
}

void cmd_ensemble(const std::string& system, const fs::path& obs_path, double obs_var, Index members, Index leads,
                  std::uint64_t seed, double perturbation, const fs::path& out) {
  const TimeSeries obs = read_dfts(obs_path);
  const SystemModel model = standard_system(origin_from_string(system), obs.tau);
  EnsembleSettings es;
  es.members = members;
  es.obs_variance = obs_var;
  es.perturbation = perturbation;
  es.seed = seed;
  const ReferenceForecast ref = ensemble_reference(model, obs, es, leads);
  std::ofstream os(out, std::ios::binary);
  if (!os) throw IoError("cannot open " + out.string());
  os << "start,lead,coord,mean,second\n";
  for (Index n = 0; n < ref.mean.n_points(); ++n)
    for (Index j = 0; j <= leads; ++j) {
      const std::string lead = format_double(static_cast<double>(j) * obs.tau);
      for (Index c = 0; c < obs.n_dim(); ++c)
        os << n << ',' << lead << ',' << c << ',' << format_double(ref.mean.at(n, j)[c]) << ','
           << format_double(ref.second.at(n, j)[c]) << '\n';
    }
  std::cout << "wrote " << out << '\n';
}

void cmd_evaluate(const fs::path& config_path) {
  const ExperimentConfig config = ExperimentConfig::load(config_path);
  const ExperimentResult r = run_experiment(config);
  std::cout << "epsilon " << format_double(r.epsilon) << '\n';
  for (const auto& v : r.variants) {
    std::cout << v.variant.label() << " [" << v.description << "]";
    if (v.reconstruction_error >= 0.0) {
      std::cout << " reconstruction error " << v.reconstruction_error << '\n';
      continue;
    }
    const Index last = v.mean.aggregate.size() - 1;
    std::cout << " rmse lead0 " << v.mean.aggregate[0] << " lead" << format_double(v.mean.leads.back()) << ' '
              << v.mean.aggregate[last] << '\n';
  }
  if (r.ensemble_mean)
    std::cout << "ensemble rmse lead0 " << r.ensemble_mean->aggregate[0] << " lead"
              << format_double(r.ensemble_mean->leads.back()) << ' ' << r.ensemble_mean->aggregate.tail(1)[0] << '\n';
  std::cout << "outputs in " << r.out_dir << '\n';
}

void cmd_bench(const std::vector<Index>& sizes, const std::vector<Index>& ms, int trials, const fs::path& out) {
  const auto rows = bench_basis(sizes, ms, trials);
  std::ostream* os = &std::cout;
  std::ofstream file;
  if (!out.empty()) {
    file.open(out, std::ios::binary);
    if (!file) throw IoError("cannot open " + out.string());
    os = &file;
  }
  *os << "n,m,qr_seconds,eig_seconds\n";
  for (const auto& r : rows)
    *os << r.n << ',' << r.m << ',' << format_double(r.qr_seconds) << ',' << format_double(r.eig_seconds) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Diffusion forecasting with eigen and QR bases"};
  app.require_subcommand(1);

  std::string system = "lorenz63", epsilon = "auto", select = "middle";
  Index n = 5000, nv = 0, knn = 0, me = 0, mq = 0, spinup = 10, members = 1000, leads = 20;
  double tau = 0.1, obs_var = 0.0, perturbation = 0.04;
  std::uint64_t seed = 1;
  int trials = 3;
  std::string in, out, op_path, basis_path, prop_path, train_path, obs_path, config_path;
  std::vector<Index> sizes{5000}, ms{250, 500};

  auto* gen = app.add_subcommand("generate", "simulate a trajectory and write DFTS files");
  gen->add_option("--system", system, "lorenz63 | lorenz96 | triad | circle")->required();
  gen->add_option("--n", n, "training length")->required();
  gen->add_option("--nv", nv, "verification length (written as <out>.verify.dfts and <out>.obs.dfts)");
  gen->add_option("--tau", tau, "sampling interval");
  gen->add_option("--seed", seed);
  gen->add_option("--obs-var", obs_var, "Gaussian observation variance for <out>.obs.dfts");
  gen->add_option("--out", out)->required();
  gen->callback([&] { cmd_generate(system, n, nv, tau, seed, obs_var, out); });

  auto* bop = app.add_subcommand("build-operator", "diffusion-maps operator from a training series");
  bop->add_option("--in", in)->required();
  bop->add_option("--epsilon", epsilon, "auto or a value");
  bop->add_option("--knn", knn, "nearest neighbours per row, 0 for dense");
  bop->add_option("--out", out)->required();
  bop->callback([&] { cmd_build_operator(in, epsilon, knn, out); });

  auto* bas = app.add_subcommand("basis", "eigen, QR or mixed basis");
  bas->add_option("--op", op_path)->required();
  bas->add_option("--me", me, "leading eigenvectors");
  bas->add_option("--mq", mq, "selected operator columns");
  bas->add_option("--select", select, "middle | random:<seed> | explicit:<i,j,...>");
  bas->add_option("--out", out)->required();
  bas->callback([&] { cmd_basis(op_path, me, mq, select, out); });

  auto* pro = app.add_subcommand("propagator", "shift-operator matrix on a basis");
  pro->add_option("--basis", basis_path)->required();
  pro->add_option("--train", train_path)->required();
  pro->add_option("--out", out)->required();
  pro->callback([&] { cmd_propagator(basis_path, train_path, out); });

  auto* fil = app.add_subcommand("filter-init", "initial densities from observations");
  fil->add_option("--op", op_path)->required();
  fil->add_option("--basis", basis_path)->required();
  fil->add_option("--prop", prop_path)->required();
  fil->add_option("--obs", obs_path)->required();
  fil->add_option("--obs-var", obs_var, "Gaussian variance; 0 uses the Nystrom delta")->required();
  fil->add_option("--spinup", spinup);
  fil->add_option("--out", out)->required();
  fil->callback([&] { cmd_filter_init(op_path, basis_path, prop_path, obs_path, obs_var, spinup, out); });

  auto* ens = app.add_subcommand("ensemble", "Monte-Carlo reference forecast with the true model");
  ens->add_option("--system", system)->required();
  ens->add_option("--obs", obs_path)->required();
  ens->add_option("--obs-var", obs_var, "Gaussian variance (ETKF); 0 perturbs the observations")->required();
  ens->add_option("--members", members);
  ens->add_option("--leads", leads);
  ens->add_option("--seed", seed);
  ens->add_option("--perturbation", perturbation, "initial variance for noiseless observations");
  ens->add_option("--out", out)->required();
  ens->callback([&] { cmd_ensemble(system, obs_path, obs_var, members, leads, seed, perturbation, out); });

  auto* eva = app.add_subcommand("evaluate", "run a configured experiment end to end");
  eva->add_option("--config", config_path)->required();
  eva->callback([&] { cmd_evaluate(config_path); });

  auto* ben = app.add_subcommand("bench", "QR versus eigensolver timings");
  ben->add_option("--sizes", sizes, "training lengths")->delimiter(',');
  ben->add_option("--ms", ms, "basis sizes")->delimiter(',');
  ben->add_option("--trials", trials);
  ben->add_option("--out", out, "CSV file (default stdout)");
  ben->callback([&] { cmd_bench(sizes, ms, trials, out); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const difcast::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
