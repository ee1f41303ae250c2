#include "difcast/persist.hpp"

#include "difcast/errors.hpp"
#include "difcast/matrix_io.hpp"

#include <sstream>

namespace difcast {

namespace fs = std::filesystem;

namespace {

fs::path sibling(const fs::path& path, const std::string& suffix) {
  fs::path out = path;
  out += suffix;
  return out;
}

std::string absolute_string(const fs::path& p) { return fs::absolute(p).lexically_normal().string(); }

void expect_kind(const Metadata& meta, const std::string& kind, const fs::path& path) {
  if (require(meta, "kind") != kind) throw IoError(path.string() + " does not hold a " + kind);
}

Index parse_index(const std::string& s) { return static_cast<Index>(std::stoll(s)); }

}  // namespace

void save_operator(const fs::path& path, const DiffusionOperator& op, const fs::path& training_path) {
  Metadata meta;
  meta["kind"] = "diffusion_operator";
  meta["content"] = "symmetric conjugate T^ = D^(1/2) T D^(-1/2)";
  meta["n"] = std::to_string(op.size());
  meta["epsilon"] = format_double(op.epsilon());
  meta["alpha"] = format_double(DiffusionOperator::alpha());
  meta["sparsity"] = op.sparsity().describe();
  meta["train"] = absolute_string(training_path);
  meta["q_file"] = sibling(path, ".q").filename().string();
  meta["d_file"] = sibling(path, ".d").filename().string();
  if (op.is_dense()) {
    meta["storage"] = "dense";
    write_dfm(path, op.dense_t_hat());
  } else {
    meta["storage"] = "triplets";
    const auto& s = op.sparse_t_hat();
    Eigen::MatrixXd trip(s.nonZeros(), 3);
    Index r = 0;
    for (Index c = 0; c < s.outerSize(); ++c)
      for (Eigen::SparseMatrix<double>::InnerIterator it(s, c); it; ++it, ++r) {
        trip(r, 0) = static_cast<double>(it.row());
        trip(r, 1) = static_cast<double>(it.col());
        trip(r, 2) = it.value();
      }
    write_dfm(path, trip);
  }
  write_dfm(sibling(path, ".q"), op.q_values());
  write_dfm(sibling(path, ".d"), op.d_values());
  write_metadata(path, meta);
}

std::shared_ptr<const DiffusionOperator> load_operator(const fs::path& path) {
  const Metadata meta = read_metadata(path);
  expect_kind(meta, "diffusion_operator", path);
  auto training = std::make_shared<const TimeSeries>(read_dfts(require(meta, "train")));
  const double eps = parse_double(require(meta, "epsilon"));
  const fs::path dir = path.parent_path();
  Eigen::VectorXd q = read_dfm(dir / require(meta, "q_file"));
  Eigen::VectorXd d = read_dfm(dir / require(meta, "d_file"));
  const Eigen::MatrixXd stored = read_dfm(path);
  const Sparsity sparsity = Sparsity::parse(require(meta, "sparsity"));
  if (require(meta, "storage") == "dense")
    return std::make_shared<const DiffusionOperator>(DiffusionOperator::from_parts(training, eps, stored, q, d));
  if (stored.cols() != 3) throw IoError(path.string() + ": triplet storage needs three columns");
  const Index n = parse_index(require(meta, "n"));
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(stored.rows()));
  for (Index r = 0; r < stored.rows(); ++r)
    trips.emplace_back(static_cast<int>(stored(r, 0)), static_cast<int>(stored(r, 1)), stored(r, 2));
  Eigen::SparseMatrix<double> s(n, n);
  s.setFromTriplets(trips.begin(), trips.end());
  return std::make_shared<const DiffusionOperator>(
      DiffusionOperator::from_parts(training, eps, sparsity, std::move(s), q, d));
}

void save_basis(const fs::path& path, const BasisSet& basis, const fs::path& op_path) {
  Metadata meta;
  meta["kind"] = "basis";
  meta["op"] = absolute_string(op_path);
  meta["m_eigen"] = std::to_string(basis.m_eigen);
  meta["m_qr"] = std::to_string(basis.m_qr);
  meta["selection"] = basis.m_qr > 0 ? basis.selection.describe() : "none";
  meta["dropped_columns"] = std::to_string(basis.deficiency);
  meta["column_order"] = "qr columns first, eigenvectors last";
  std::ostringstream ev;
  for (Index k = 0; k < basis.eigenvalues.size(); ++k) ev << (k ? "," : "") << format_double(basis.eigenvalues[k]);
  meta["eigenvalues"] = ev.str();
  std::ostringstream cols;
  for (std::size_t k = 0; k < basis.selected_columns.size(); ++k) cols << (k ? "," : "") << basis.selected_columns[k];
  meta["selected_columns"] = cols.str();
  write_dfm(path, basis.values);
  write_metadata(path, meta);
}

std::shared_ptr<const BasisSet> load_basis(const fs::path& path) {
  const Metadata meta = read_metadata(path);
  expect_kind(meta, "basis", path);
  auto basis = std::make_shared<BasisSet>();
  basis->values = read_dfm(path);
  basis->m_eigen = parse_index(require(meta, "m_eigen"));
  basis->m_qr = parse_index(require(meta, "m_qr"));
  basis->deficiency = parse_index(require(meta, "dropped_columns"));
  if (const std::string& sel = require(meta, "selection"); sel != "none") basis->selection = ColumnSelection::parse(sel);
  std::vector<double> ev;
  std::stringstream ss(require(meta, "eigenvalues"));
  for (std::string item; std::getline(ss, item, ',');) ev.push_back(parse_double(item));
  basis->eigenvalues = Eigen::Map<Eigen::VectorXd>(ev.data(), static_cast<Index>(ev.size()));
  std::stringstream cs(require(meta, "selected_columns"));
  for (std::string item; std::getline(cs, item, ',');) basis->selected_columns.push_back(parse_index(item));
  basis->op = load_operator(require(meta, "op"));
  if (basis->op->size() != basis->n_points()) throw ShapeError("basis and its operator disagree in size");
  return basis;
}

void save_propagator(const fs::path& path, const Propagator& prop, const fs::path& basis_path) {
  Metadata meta;
  meta["kind"] = "propagator";
  meta["basis"] = absolute_string(basis_path);
  meta["tau"] = format_double(prop.tau);
  meta["pair_count"] = std::to_string(prop.pair_count);
  meta["renormalize"] = "total mass rescaled after every step";
  write_dfm(path, prop.a_hat);
  write_metadata(path, meta);
}

Propagator load_propagator(const fs::path& path) {
  const Metadata meta = read_metadata(path);
  expect_kind(meta, "propagator", path);
  Propagator prop;
  prop.a_hat = read_dfm(path);
  prop.tau = parse_double(require(meta, "tau"));
  prop.pair_count = parse_index(require(meta, "pair_count"));
  prop.basis = load_basis(require(meta, "basis"));
  if (prop.basis->size() != prop.a_hat.rows() || prop.a_hat.rows() != prop.a_hat.cols())
    throw ShapeError("propagator and its basis disagree in size");
  return prop;
}

}  // namespace difcast
