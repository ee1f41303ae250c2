#pragma once

#include <Eigen/Dense>

#include <vector>

namespace difcast {

//! Thin factorisation B(:, kept) = Q R(:, kept) with orthonormal Q.
struct ThinQr {
  Eigen::MatrixXd q;                // N x r
  Eigen::MatrixXd r;                // r x m; columns not kept hold their projections
  std::vector<Eigen::Index> kept;   // input columns that contributed a reflector
  std::vector<Eigen::Index> dropped;
};

//! Truncated, unpivoted Householder QR computed panel by panel (compact WY
//! trailing updates). Columns are processed strictly in input order; a column
//! whose remaining norm |R_kk| falls below relative_tolerance * |R_00| is
//! dropped and the factorisation continues with the next column.
ThinQr truncated_householder_qr(Eigen::MatrixXd b, double relative_tolerance = 1e-12, Eigen::Index block = 64);

}  // namespace difcast
