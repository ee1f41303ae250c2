#pragma once

#include <Eigen/Dense>

#include <functional>

namespace difcast {

struct EigenPairs {
  Eigen::VectorXd values;   // descending
  Eigen::MatrixXd vectors;  // unit 2-norm columns
  int restarts = 0;
  int matvecs = 0;
};

struct LanczosOptions {
  double tolerance = 1e-10;   // relative Ritz-estimate tolerance handed to the solver
  double max_residual = 1e-8; // accepted ||A u - s u||_2
  int max_restarts = 500;
  int ncv = 0;                // Krylov dimension; 0 picks max(2 nev + 1, nev + 20)
  unsigned seed = 20180101u;  // starting vector
};

//! y = A x for a symmetric n x n operator.
using SymmetricMatVec = std::function<void(const double* x, double* y)>;

//! Largest-algebraic eigenpairs of a symmetric operator by implicitly restarted
//! Lanczos (ARPACK dsaupd/dseupd). Throws EigensolverFailed when fewer than nev
//! pairs converge or a returned residual exceeds options.max_residual.
EigenPairs largest_eigenpairs(const SymmetricMatVec& apply, Eigen::Index n, int nev,
                              const LanczosOptions& options = {});

//! Same contract using a dense symmetric eigendecomposition; used when nev is too
//! close to n for a Krylov method.
EigenPairs largest_eigenpairs_dense(const Eigen::MatrixXd& a, int nev);

}  // namespace difcast
