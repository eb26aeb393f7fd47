#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "thinhomog/error.hpp"
#include "thinhomog/fem/constraints.hpp"
#include "thinhomog/fem/sparse.hpp"

namespace thinhomog::fem {

inline constexpr double kDefaultCgTol = 1e-10;

struct CgResult {
  std::vector<double> x;
  std::size_t iterations = 0;
  double residual = 0.0; ///< ||b - Ax|| / ||b||
};

namespace detail {

inline void remove_mean(std::vector<double>& v) {
  if (v.empty()) return;
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  for (double& x : v) x -= mean;
}

} // namespace detail

/// Jacobi-preconditioned conjugate gradients. With `constant_kernel` the
/// matrix is taken to be singular with kernel span{1}: b is projected onto
/// the range and the residual is kept there.
inline CgResult solve_cg(const CsrMatrix& A, std::vector<double> b, double tol = kDefaultCgTol,
                         std::size_t max_iter = 0, bool constant_kernel = false) {
  const std::size_t n = A.n;
  if (max_iter == 0) max_iter = 20 * std::max<std::size_t>(n, 1);
  if (constant_kernel) detail::remove_mean(b);

  CgResult out;
  out.x.assign(n, 0.0);
  const double bnorm = norm2(b);
  if (bnorm == 0.0) return out;

  std::vector<double> inv_diag = A.diagonal();
  for (double& d : inv_diag) {
    if (!(d > 0.0)) throw NoConvergence(0, 1.0, "non-positive diagonal entry");
    d = 1.0 / d;
  }

  std::vector<double> r = b;
  std::vector<double> z(n), p(n), Ap(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
  p = z;
  double rz = dot(r, z);
  double rnorm = bnorm;
  while (out.iterations < max_iter) {
    A.multiply(p, Ap);
    const double pAp = dot(p, Ap);
    if (!(pAp > 0.0)) throw NoConvergence(out.iterations, rnorm / bnorm, "breakdown, p.Ap <= 0");
    const double alpha = rz / pAp;
    for (std::size_t i = 0; i < n; ++i) {
      out.x[i] += alpha * p[i];
      r[i] -= alpha * Ap[i];
    }
    if (constant_kernel) detail::remove_mean(r);
    ++out.iterations;
    rnorm = norm2(r);
    if (rnorm <= tol * bnorm) break;
    for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
    const double rz_next = dot(r, z);
    const double beta = rz_next / rz;
    rz = rz_next;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  // true residual
  std::vector<double> Ax = A * out.x;
  std::vector<double> res(n);
  for (std::size_t i = 0; i < n; ++i) res[i] = b[i] - Ax[i];
  if (constant_kernel) detail::remove_mean(res);
  out.residual = norm2(res) / bnorm;
  if (out.residual > tol * 10.0 && rnorm > tol * bnorm) throw NoConvergence(out.iterations, out.residual);
  return out;
}

struct SolveInfo {
  std::size_t iterations = 0;
  double residual = 0.0;
};

/// Solves a reduced system; returns the full nodal vector. The zero-mean
/// case is solved on the range complement and then shifted so that
/// w . u = 0.
inline std::vector<double> solve(const ReducedSystem& sys, const std::vector<double>& rhs, SolveInfo* info = nullptr,
                                 double tol = kDefaultCgTol, std::size_t max_iter = 0) {
  CgResult r = solve_cg(sys.matrix, rhs, tol, max_iter, sys.zero_mean());
  if (sys.zero_mean()) {
    const double wsum = std::accumulate(sys.mean_weights.begin(), sys.mean_weights.end(), 0.0);
    const double shift = dot(sys.mean_weights, r.x) / wsum;
    for (double& v : r.x) v -= shift;
  }
  if (info != nullptr) *info = {r.iterations, r.residual};
  return sys.expand(r.x);
}

inline std::vector<double> solve(const ReducedSystem& sys, SolveInfo* info = nullptr, double tol = kDefaultCgTol,
                                 std::size_t max_iter = 0) {
  return solve(sys, sys.rhs, info, tol, max_iter);
}

} // namespace thinhomog::fem
