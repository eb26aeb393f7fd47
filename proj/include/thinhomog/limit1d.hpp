#pragma once
// The homogenized problem on I = (-L, L):
//   -(a_eff u')' + c_bar u = |Box| f,   u(-L) = u(L) = 0,
// with P1 elements and 2-point Gauss quadrature per element.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "thinhomog/cell.hpp"
#include "thinhomog/error.hpp"

namespace thinhomog {

struct EffectiveSolution {
  double L = 1.0;
  std::vector<double> nodes;
  std::vector<double> u;

  struct Entry {
    double x1 = 0.0;
    double weight = 0.0;
    double a_eff = 0.0;
    double c_bar = 0.0;
    double box_measure = 0.0;
    double f = 0.0;
  };
  std::vector<Entry> table; ///< coefficient data at the quadrature points

  std::size_t elements() const { return nodes.size() - 1; }

  std::size_t element_of(double x1) const {
    if (!(x1 >= -L - 1e-12 && x1 <= L + 1e-12)) throw OutOfDomain("x1 = " + std::to_string(x1) + " outside [-L, L]");
    const double h = 2.0 * L / static_cast<double>(elements());
    const auto e = static_cast<long>(std::floor((x1 + L) / h));
    return static_cast<std::size_t>(std::clamp<long>(e, 0, static_cast<long>(elements()) - 1));
  }

  double evaluate(double x1) const {
    const std::size_t e = element_of(x1);
    const double t = (x1 - nodes[e]) / (nodes[e + 1] - nodes[e]);
    return (1.0 - t) * u[e] + t * u[e + 1];
  }

  /// Elementwise constant; at an interior node the element on the right is used.
  double derivative(double x1) const {
    const std::size_t e = element_of(x1);
    return (u[e + 1] - u[e]) / (nodes[e + 1] - nodes[e]);
  }

  /// int a_eff u'^2 + c_bar u^2.
  double energy() const {
    double s = 0.0;
    for (const Entry& q : table) {
      const double du = derivative(q.x1);
      const double v = evaluate(q.x1);
      s += q.weight * (q.a_eff * du * du + q.c_bar * v * v);
    }
    return s;
  }

  /// int |Box| f u.
  double load_work() const {
    double s = 0.0;
    for (const Entry& q : table) s += q.weight * q.box_measure * q.f * evaluate(q.x1);
    return s;
  }

  double l2_norm() const {
    double s = 0.0;
    for (const Entry& q : table) s += q.weight * evaluate(q.x1) * evaluate(q.x1);
    return std::sqrt(s);
  }

  double h1_norm() const {
    double s = 0.0;
    for (const Entry& q : table) s += q.weight * (evaluate(q.x1) * evaluate(q.x1) + derivative(q.x1) * derivative(q.x1));
    return std::sqrt(s);
  }
};

/// Gauss points of the uniform 1D mesh, two per element.
inline std::vector<double> limit_quadrature_points(double L, int n_elements) {
  std::vector<double> xs;
  const double h = 2.0 * L / n_elements;
  const double off = 0.5 * h / std::sqrt(3.0);
  for (int e = 0; e < n_elements; ++e) {
    const double mid = -L + (e + 0.5) * h;
    xs.push_back(mid - off);
    xs.push_back(mid + off);
  }
  return xs;
}

/// Solves with coefficient data given at limit_quadrature_points(L, n).
inline EffectiveSolution solve_limit(double L, int n_elements, const std::vector<EffectiveData>& data,
                                     const std::function<double(double)>& f) {
  if (n_elements < 2) throw ResolutionError("the 1D mesh needs at least 2 elements");
  const std::vector<double> xs = limit_quadrature_points(L, n_elements);
  if (data.size() != xs.size()) throw Error("coefficient table does not match the quadrature points");
  EffectiveSolution sol;
  sol.L = L;
  sol.nodes = uniform_nodes(-L, L, n_elements + 1);
  const double h = 2.0 * L / n_elements;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!(data[i].a_eff > 0.0)) throw NonSPD("a_eff is not positive at x1 = " + std::to_string(xs[i]));
    if (data[i].c_bar < 0.0) throw NonSPD("c_bar is negative at x1 = " + std::to_string(xs[i]));
    sol.table.push_back({xs[i], 0.5 * h, data[i].a_eff, data[i].c_bar, data[i].box_measure, f(xs[i])});
  }

  // tridiagonal system for the interior nodes 1..n-1
  const auto n = static_cast<std::size_t>(n_elements);
  std::vector<double> diag(n + 1, 0.0), off(n + 1, 0.0), rhs(n + 1, 0.0);
  for (std::size_t e = 0; e < n; ++e) {
    for (std::size_t g = 0; g < 2; ++g) {
      const auto& q = sol.table[2 * e + g];
      const double t = (q.x1 - sol.nodes[e]) / h;
      const double phi[2] = {1.0 - t, t};
      const double dphi[2] = {-1.0 / h, 1.0 / h};
      for (std::size_t a = 0; a < 2; ++a) {
        rhs[e + a] += q.weight * q.box_measure * q.f * phi[a];
        diag[e + a] += q.weight * (q.a_eff * dphi[a] * dphi[a] + q.c_bar * phi[a] * phi[a]);
      }
      off[e] += q.weight * (q.a_eff * dphi[0] * dphi[1] + q.c_bar * phi[0] * phi[1]);
    }
  }
  // Thomas algorithm on rows 1..n-1; off[i] couples i and i+1
  std::vector<double> c(n + 1, 0.0), d(n + 1, 0.0);
  for (std::size_t i = 1; i < n; ++i) {
    const double lower = i > 1 ? off[i - 1] : 0.0;
    const double denom = diag[i] - lower * c[i - 1];
    if (!(denom > 0.0)) throw NoConvergence(0, 1.0, "1D system is not positive definite");
    c[i] = i + 1 < n ? off[i] / denom : 0.0;
    d[i] = (rhs[i] - lower * d[i - 1]) / denom;
  }
  sol.u.assign(n + 1, 0.0);
  for (std::size_t i = n - 1; i >= 1; --i) {
    sol.u[i] = d[i] - c[i] * sol.u[i + 1];
    if (i == 1) break;
  }
  return sol;
}

/// Pointwise coefficient functions (tests, benchmarks).
inline EffectiveSolution solve_limit(double L, int n_elements, const std::function<EffectiveData(double)>& coeff,
                                     const std::function<double(double)>& f) {
  std::vector<EffectiveData> data;
  for (double x : limit_quadrature_points(L, n_elements)) data.push_back(coeff(x));
  return solve_limit(L, n_elements, data, f);
}

struct LimitOptions {
  int n_elements = 64;
  int workers = 1;
  int profile_nodes = 0; ///< > 0: interpolate a profile instead of solving at every Gauss point
};

/// Effective solve with coefficients from cell problems (shared cache).
inline EffectiveSolution solve_effective(CellCache& cache, const LimitOptions& opt) {
  if (opt.n_elements < 8) throw ResolutionError("the effective problem needs at least 8 elements");
  const GeometryModel& m = cache.model();
  const CoefficientSet& co = cache.coefficients();
  const std::vector<double> xs = limit_quadrature_points(m.L, opt.n_elements);
  std::vector<EffectiveData> data;
  if (opt.profile_nodes > 0) {
    const EffectiveProfile prof = effective_profile(cache, uniform_nodes(-m.L, m.L, std::max(opt.profile_nodes, 4)), opt.workers);
    for (double x : xs) data.push_back(prof.interpolate(x));
  } else {
    data = cache.get_all(xs, opt.workers);
  }
  return solve_limit(m.L, opt.n_elements, data, [&](double x) { return co.source(x); });
}

inline EffectiveSolution solve_effective(const GeometryModel& m, const CoefficientSet& co, int n_elements,
                                         CellResolution res = {}, int workers = 1) {
  CellCache cache(m, co, res);
  return solve_effective(cache, {n_elements, workers, 0});
}

} // namespace thinhomog
