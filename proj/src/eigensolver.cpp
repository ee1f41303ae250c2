#include "difcast/eigensolver.hpp"

#include "difcast/errors.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cstddef>
#include <random>
#include <string>
#include <vector>

extern "C" {
void dsaupd_(int* ido, const char* bmat, const int* n, const char* which, const int* nev, const double* tol,
             double* resid, const int* ncv, double* v, const int* ldv, int* iparam, int* ipntr, double* workd,
             double* workl, const int* lworkl, int* info, std::size_t bmat_len, std::size_t which_len);
void dseupd_(const int* rvec, const char* howmny, int* select, double* d, double* z, const int* ldz,
             const double* sigma, const char* bmat, const int* n, const char* which, const int* nev,
             const double* tol, double* resid, const int* ncv, double* v, const int* ldv, int* iparam, int* ipntr,
             double* workd, double* workl, const int* lworkl, int* info, std::size_t howmny_len,
             std::size_t bmat_len, std::size_t which_len);
}

namespace difcast {

namespace {

void check_residuals(const SymmetricMatVec& apply, EigenPairs& pairs, double max_residual) {
  const Eigen::Index n = pairs.vectors.rows();
  Eigen::VectorXd au(n);
  int good = 0;
  double worst = 0.0;
  for (Eigen::Index k = 0; k < pairs.vectors.cols(); ++k) {
    apply(pairs.vectors.col(k).data(), au.data());
    const double r = (au - pairs.values[k] * pairs.vectors.col(k)).norm();
    worst = std::max(worst, r);
    if (r <= max_residual) ++good;
  }
  if (good < pairs.vectors.cols())
    throw EigensolverFailed(good, static_cast<int>(pairs.vectors.cols()),
                            "largest residual " + std::to_string(worst));
}

}  // namespace

EigenPairs largest_eigenpairs_dense(const Eigen::MatrixXd& a, int nev) {
  const Eigen::Index n = a.rows();
  if (nev < 1 || nev > n) throw ParameterError("requested eigenpair count out of range");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
  if (es.info() != Eigen::Success) throw EigensolverFailed(0, nev, "dense symmetric eigensolver did not converge");
  EigenPairs out;
  out.values = es.eigenvalues().tail(nev).reverse();
  out.vectors = es.eigenvectors().rightCols(nev).rowwise().reverse();
  return out;
}

EigenPairs largest_eigenpairs(const SymmetricMatVec& apply, Eigen::Index n_index, int nev,
                              const LanczosOptions& options) {
  if (nev < 1 || nev > n_index) throw ParameterError("requested eigenpair count out of range");
  const int n = static_cast<int>(n_index);
  if (nev >= n - 1) {
    // Krylov methods need nev < n - 1; assemble the operator densely instead.
    Eigen::MatrixXd a(n, n);
    Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
    for (int j = 0; j < n; ++j) {
      e[j] = 1.0;
      apply(e.data(), a.col(j).data());
      e[j] = 0.0;
    }
    EigenPairs out = largest_eigenpairs_dense(0.5 * (a + a.transpose()), nev);
    check_residuals(apply, out, options.max_residual);
    return out;
  }

  int ncv = options.ncv > 0 ? options.ncv : std::max(2 * nev + 1, nev + 20);
  ncv = std::min(ncv, n);
  const int lworkl = ncv * (ncv + 8);
  const char bmat = 'I';
  const char which[2] = {'L', 'A'};
  const double tol = options.tolerance;

  std::vector<double> resid(static_cast<std::size_t>(n));
  {
    std::mt19937_64 rng(options.seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (double& r : resid) r = u(rng);
  }
  std::vector<double> v(static_cast<std::size_t>(n) * static_cast<std::size_t>(ncv));
  std::vector<double> workd(3 * static_cast<std::size_t>(n));
  std::vector<double> workl(static_cast<std::size_t>(lworkl));
  int iparam[11] = {};
  int ipntr[11] = {};
  iparam[0] = 1;  // exact shifts
  iparam[2] = options.max_restarts;
  iparam[6] = 1;  // standard eigenproblem, mode 1

  int ido = 0;
  int info = 1;  // use the supplied starting vector
  int matvecs = 0;
  for (;;) {
    dsaupd_(&ido, &bmat, &n, which, &nev, &tol, resid.data(), &ncv, v.data(), &n, iparam, ipntr, workd.data(),
            workl.data(), &lworkl, &info, 1, 2);
    if (ido == -1 || ido == 1) {
      apply(&workd[static_cast<std::size_t>(ipntr[0] - 1)], &workd[static_cast<std::size_t>(ipntr[1] - 1)]);
      ++matvecs;
      continue;
    }
    break;
  }
  if (info == 1) throw EigensolverFailed(iparam[4], nev, "restart budget exhausted");
  if (info != 0) throw EigensolverFailed(0, nev, "dsaupd info " + std::to_string(info));

  const int rvec = 1;
  const char howmny = 'A';
  std::vector<int> select(static_cast<std::size_t>(ncv));
  std::vector<double> d(static_cast<std::size_t>(nev));
  Eigen::MatrixXd z(n, nev);
  const double sigma = 0.0;
  int ldz = n;
  dseupd_(&rvec, &howmny, select.data(), d.data(), z.data(), &ldz, &sigma, &bmat, &n, which, &nev, &tol,
          resid.data(), &ncv, v.data(), &n, iparam, ipntr, workd.data(), workl.data(), &lworkl, &info, 1, 1, 2);
  if (info != 0) throw EigensolverFailed(iparam[4], nev, "dseupd info " + std::to_string(info));

  // dseupd returns ascending values; sort descending explicitly
  std::vector<int> order(static_cast<std::size_t>(nev));
  for (int k = 0; k < nev; ++k) order[static_cast<std::size_t>(k)] = k;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return d[static_cast<std::size_t>(a)] > d[static_cast<std::size_t>(b)]; });
  EigenPairs out;
  out.values.resize(nev);
  out.vectors.resize(n, nev);
  for (int k = 0; k < nev; ++k) {
    const int src = order[static_cast<std::size_t>(k)];
    out.values[k] = d[static_cast<std::size_t>(src)];
    out.vectors.col(k) = z.col(src).normalized();
  }
  out.restarts = iparam[2];
  out.matvecs = matvecs;
  check_residuals(apply, out, options.max_residual);
  return out;
}

}  // namespace difcast
