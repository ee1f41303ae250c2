#include "difcast/householder.hpp"

#include "difcast/errors.hpp"

#include <algorithm>
#include <cmath>

namespace difcast {

using Eigen::Index;

namespace {

// Upper triangular T with H_0 ... H_{p-1} = I - Y T Y^T.
template <class Y>
Eigen::MatrixXd block_reflector_factor(const Y& y, const Eigen::Ref<const Eigen::VectorXd>& tau) {
  const Index kp = tau.size();
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(kp, kp);
  for (Index i = 0; i < kp; ++i) {
    t(i, i) = tau[i];
    if (i > 0) {
      const Eigen::VectorXd w = y.leftCols(i).transpose() * y.col(i);
      const Eigen::VectorXd tw = t.topLeftCorner(i, i).template triangularView<Eigen::Upper>() * w;
      t.col(i).head(i) = -tau[i] * tw;
    }
  }
  return t;
}

}  // namespace

ThinQr truncated_householder_qr(Eigen::MatrixXd a, double relative_tolerance, Index block) {
  const Index n = a.rows();
  const Index m = a.cols();
  if (block < 1) throw ParameterError("QR panel width must be positive");
  if (m > n) throw ShapeError("QR input must not have more columns than rows");

  ThinQr out;
  // Reflector vectors (unit leading entry at row k) and their scalars.
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(n, m);
  Eigen::VectorXd tau = Eigen::VectorXd::Zero(m);
  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(m, m);
  std::vector<Index> panel_start;  // first reflector index of each panel
  double reference = 0.0;          // |R_00|
  Index k = 0;                     // reflectors created so far

  for (Index c0 = 0; c0 < m; c0 += block) {
    const Index c1 = std::min(m, c0 + block);
    const Index k0 = k;
    for (Index c = c0; c < c1; ++c) {
      auto x = a.col(c).segment(k, n - k);
      const double alpha = x.norm();
      const bool deficient = reference > 0.0 ? alpha < relative_tolerance * reference : alpha == 0.0;
      r.col(c).head(k) = a.col(c).head(k);
      if (deficient || k == n) {
        out.dropped.push_back(c);
        continue;
      }
      if (reference == 0.0) reference = alpha;
      const double x0 = x[0];
      const double beta = x0 >= 0.0 ? -alpha : alpha;
      const double v0 = x0 - beta;
      auto vk = v.col(k).segment(k, n - k);
      vk = x / v0;
      vk[0] = 1.0;
      tau[k] = (beta - x0) / beta;
      r(k, c) = beta;
      // apply H_k to the remaining columns of this panel
      for (Index cc = c + 1; cc < c1; ++cc) {
        auto y = a.col(cc).segment(k, n - k);
        y -= (tau[k] * vk.dot(y)) * vk;
      }
      out.kept.push_back(c);
      ++k;
    }
    const Index kp = k - k0;
    if (kp == 0) continue;
    panel_start.push_back(k0);
    if (c1 < m) {
      // compact WY: H_{k0} ... H_{k-1} = I - Y T Y^T
      const auto y = v.block(k0, k0, n - k0, kp);
      const Eigen::MatrixXd t = block_reflector_factor(y, tau.segment(k0, kp));
      auto trailing = a.block(k0, c1, n - k0, m - c1);
      const Eigen::MatrixXd w = y.transpose() * trailing;
      const Eigen::MatrixXd tw = t.transpose().triangularView<Eigen::Lower>() * w;
      trailing.noalias() -= y * tw;
    }
  }

  // Q = H_0 ... H_{k-1} [I_k; 0], accumulated panel by panel from the last one.
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(n, k);
  for (Index i = 0; i < k; ++i) q(i, i) = 1.0;
  for (auto it = panel_start.rbegin(); it != panel_start.rend(); ++it) {
    const Index k0 = *it;
    const Index k1 = (it == panel_start.rbegin()) ? k : *(it - 1);
    const Index kp = k1 - k0;
    const auto y = v.block(k0, k0, n - k0, kp);
    const Eigen::MatrixXd t = block_reflector_factor(y, tau.segment(k0, kp));
    auto target = q.block(k0, k0, n - k0, k - k0);
    const Eigen::MatrixXd w = y.transpose() * target;
    const Eigen::MatrixXd tw = t.triangularView<Eigen::Upper>() * w;
    target.noalias() -= y * tw;
  }

  out.q = std::move(q);
  out.r = r.topRows(k);
  return out;
}

}  // namespace difcast
