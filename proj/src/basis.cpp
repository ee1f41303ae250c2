#include "difcast/basis.hpp"

#include "difcast/errors.hpp"
#include "difcast/householder.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>

namespace difcast {

std::string ColumnSelection::describe() const {
  switch (kind) {
    case Kind::middle: return "middle";
    case Kind::random: return "random:" + std::to_string(seed);
    case Kind::explicit_list: {
      std::ostringstream os;
      os << "explicit:";
      for (std::size_t i = 0; i < indices.size(); ++i) os << (i ? "," : "") << indices[i];
      return os.str();
    }
  }
  return "middle";
}

ColumnSelection ColumnSelection::parse(const std::string& text) {
  if (text == "middle") return middle();
  if (text.rfind("random:", 0) == 0) return random(std::stoull(text.substr(7)));
  if (text.rfind("explicit:", 0) == 0) {
    std::vector<Index> idx;
    std::stringstream ss(text.substr(9));
    std::string item;
    while (std::getline(ss, item, ',')) idx.push_back(std::stoll(item));
    return explicit_list(std::move(idx));
  }
  throw ParameterError("unknown column selection '" + text + "'");
}

std::vector<Index> select_columns(Index n, Index m_q, const ColumnSelection& selection) {
  if (m_q < 1 || m_q > n) throw ParameterError("M_Q must lie in [1, N]");
  std::vector<Index> out;
  switch (selection.kind) {
    case ColumnSelection::Kind::middle: {
      Index count = m_q;
      if (count < n && count % 2 == 1 && count > 1) {
        std::cerr << "warning: middle selection rounds M_Q=" << count << " down to " << count - 1 << '\n';
        --count;
      }
      if (count < n && n % 2 == 1)
        std::cerr << "warning: middle selection with odd N=" << n << " is shifted down by half a column\n";
      const Index start = (n - count) / 2;
      out.resize(static_cast<std::size_t>(count));
      std::iota(out.begin(), out.end(), start);
      break;
    }
    case ColumnSelection::Kind::random: {
      std::vector<Index> all(static_cast<std::size_t>(n));
      std::iota(all.begin(), all.end(), Index{0});
      Rng rng(selection.seed);
      out.reserve(static_cast<std::size_t>(m_q));
      std::sample(all.begin(), all.end(), std::back_inserter(out), m_q, rng);
      std::sort(out.begin(), out.end());
      break;
    }
    case ColumnSelection::Kind::explicit_list: {
      if (static_cast<Index>(selection.indices.size()) != m_q)
        throw ParameterError("explicit selection has " + std::to_string(selection.indices.size()) +
                             " indices, M_Q is " + std::to_string(m_q));
      std::set<Index> seen;
      for (Index i : selection.indices) {
        if (i < 0 || i >= n) throw ParameterError("explicit column index " + std::to_string(i) + " out of range");
        if (!seen.insert(i).second) throw ParameterError("duplicate explicit column index " + std::to_string(i));
      }
      out = selection.indices;
      break;
    }
  }
  return out;
}

Eigen::VectorXd BasisSet::means() const {
  return values.colwise().mean().transpose();
}

double BasisSet::orthonormality_defect() const {
  const auto n = static_cast<double>(values.rows());
  Eigen::MatrixXd gram = values.transpose() * values / n;
  gram.diagonal().array() -= 1.0;
  return gram.size() ? gram.cwiseAbs().maxCoeff() : 0.0;
}

std::string BasisSet::describe() const {
  std::ostringstream os;
  os << "me=" << m_eigen << ",mq=" << m_qr << ",select=" << (m_qr > 0 ? selection.describe() : "none");
  return os.str();
}

void fix_signs(Eigen::MatrixXd& columns) {
  for (Index k = 0; k < columns.cols(); ++k) {
    auto col = columns.col(k);
    const double cube = col.array().cube().sum();
    const double scale = col.array().abs().cube().sum();
    double sign = 1.0;
    if (std::abs(cube) > 1e-8 * scale) {
      sign = cube < 0.0 ? -1.0 : 1.0;
    } else {
      const double tiny = 1e-12 * col.cwiseAbs().maxCoeff();
      for (Index i = 0; i < col.size(); ++i) {
        if (std::abs(col[i]) > tiny) {
          sign = col[i] < 0.0 ? -1.0 : 1.0;
          break;
        }
      }
    }
    if (sign < 0.0) col = -col;
  }
}

BasisSet leading_eigenbasis(std::shared_ptr<const DiffusionOperator> op, Index m_eigen, const LanczosOptions& options) {
  if (!op) throw ParameterError("eigenbasis needs an operator");
  const Index n = op->size();
  if (m_eigen < 1 || m_eigen > n) throw ParameterError("M_E must lie in [1, N]");
  const DiffusionOperator& t = *op;
  EigenPairs pairs = largest_eigenpairs(
      [&t, n](const double* x, double* y) {
        Eigen::Map<const Eigen::VectorXd> xin(x, n);
        Eigen::Map<Eigen::VectorXd>(y, n) = t.apply_t_hat(xin);
      },
      n, static_cast<int>(m_eigen), options);

  // Phi = D^{-1/2} U is orthogonal only in the D-weighted product; re-orthonormalise
  // in the sample inner product, keeping the eigenvalue order.
  Eigen::MatrixXd phi = op->d_values().cwiseSqrt().cwiseInverse().asDiagonal() * pairs.vectors;
  fix_signs(phi);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(phi);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, m_eigen);
  const Eigen::VectorXd r_diag = qr.matrixQR().diagonal();
  for (Index k = 0; k < m_eigen; ++k)
    if (r_diag[k] < 0.0) q.col(k) = -q.col(k);

  BasisSet out;
  out.values = std::sqrt(static_cast<double>(n)) * q;
  fix_signs(out.values);
  out.m_eigen = m_eigen;
  out.eigenvalues = pairs.values;
  out.op = std::move(op);
  return out;
}

BasisSet qr_mixed_basis(std::shared_ptr<const DiffusionOperator> op, const BasisSet* eigen, Index m_qr,
                        const ColumnSelection& selection) {
  if (!op) throw ParameterError("mixed basis needs an operator");
  const Index n = op->size();
  const Index m_e = eigen ? eigen->size() : 0;
  if (eigen && eigen->n_points() != n) throw ShapeError("eigenbasis was built on different data");
  if (eigen && eigen->op && eigen->op != op) throw ParameterError("eigenbasis was built from a different operator");
  if (m_qr < 0 || m_qr + m_e > n) throw ParameterError("M_E + M_Q must not exceed N");
  if (m_qr + m_e == 0) throw ParameterError("mixed basis needs at least one column");

  BasisSet out;
  out.selection = selection;
  if (m_qr > 0) out.selected_columns = select_columns(n, m_qr, selection);
  const Index mq = static_cast<Index>(out.selected_columns.size());

  Eigen::MatrixXd b(n, mq + m_e);
  if (mq > 0) b.leftCols(mq) = op->t_columns(out.selected_columns);
  if (m_e > 0) b.rightCols(m_e) = eigen->values;

  ThinQr qr = truncated_householder_qr(std::move(b));
  out.values = std::sqrt(static_cast<double>(n)) * qr.q;
  out.m_qr = std::count_if(qr.kept.begin(), qr.kept.end(), [mq](Index c) { return c < mq; });
  out.m_eigen = static_cast<Index>(qr.kept.size()) - out.m_qr;
  out.deficiency = static_cast<Index>(qr.dropped.size());
  if (out.deficiency > 0)
    std::cerr << "warning: mixed basis dropped " << out.deficiency << " numerically dependent columns\n";
  if (eigen) out.eigenvalues = eigen->eigenvalues;
  out.op = std::move(op);
  return out;
}

Eigen::MatrixXd reconstruct(const BasisSet& basis, const Eigen::MatrixXd& signal) {
  if (signal.rows() != basis.n_points())
    throw ShapeError("signal has " + std::to_string(signal.rows()) + " rows, basis has " +
                     std::to_string(basis.n_points()) + " points");
  const Eigen::MatrixXd coeffs = basis.values.transpose() * signal / static_cast<double>(basis.n_points());
  return basis.values * coeffs;
}

Eigen::VectorXd reconstruct(const BasisSet& basis, const Eigen::VectorXd& signal) {
  return reconstruct(basis, Eigen::MatrixXd(signal)).col(0);
}

}  // namespace difcast
