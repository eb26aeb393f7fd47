#pragma once
// The full problem on the thin domain,
//   -div(a^eps grad u) + c^eps u = f(x1)  in Omega_eps,
//   u = 0 on x1 = +-L,  a^eps grad u . n = 0 on the lateral boundary,
// with a^eps(x) = a(x1, x / eps). Q1 elements on the mapped rectangle
// [-L, L] x [0, 1]; the eps^-1 weight of mu_eps is kept on both sides so the
// reported norms are the mu_eps ones.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "thinhomog/cell.hpp"
#include "thinhomog/error.hpp"
#include "thinhomog/fem/assembly.hpp"
#include "thinhomog/fem/cg.hpp"
#include "thinhomog/fem/constraints.hpp"
#include "thinhomog/fem/mesh.hpp"
#include "thinhomog/geometry.hpp"
#include "thinhomog/limit1d.hpp"
#include "thinhomog/parallel.hpp"

namespace thinhomog {

struct EpsOptions {
  int per_period = 16; ///< x1 elements per fast period
  int n_s = 8;         ///< elements across the thickness
  std::size_t dof_cap = 2'000'000;
  double tol = fem::kDefaultCgTol;
};

struct EpsSolution {
  double eps = 0.0;
  GeometryModel model;
  CoefficientSet coeffs;
  EpsOptions options;
  fem::MappedMesh mesh;
  std::vector<double> u;
  fem::SolveInfo info;
  std::vector<double> average; ///< local average at every mesh column

  double L() const { return model.L; }
  std::size_t dofs() const { return u.size(); }
};

/// Cross-sectional mean at every mesh column. u is linear in s along each
/// column edge, so the trapezoid rule in s is exact for the discrete field.
inline std::vector<double> column_averages(const fem::Mesh& mesh, const std::vector<double>& u) {
  std::vector<double> avg(static_cast<std::size_t>(mesh.n1 + 1), 0.0);
  for (int i = 0; i <= mesh.n1; ++i) {
    double s = 0.0;
    for (int j = 0; j < mesh.n2; ++j) s += 0.5 * (u[mesh.node(i, j)] + u[mesh.node(i, j + 1)]);
    avg[static_cast<std::size_t>(i)] = s / mesh.n2;
  }
  return avg;
}

inline EpsSolution solve_eps_problem(const GeometryModel& m, const CoefficientSet& co, double eps,
                                     const EpsOptions& opt = {}) {
  if (!(eps > 0.0)) throw Error("eps must be positive");
  if (opt.per_period < 8 || opt.n_s < 8) throw ResolutionError("need at least 8 elements per period and across the thickness");
  const double periods = 2.0 * m.L / eps;
  const double n1_real = std::ceil(periods * opt.per_period - 1e-9);
  const double dofs = (n1_real + 1.0) * (opt.n_s + 1.0);
  if (dofs > static_cast<double>(opt.dof_cap)) {
    throw ResolutionError("eps = " + std::to_string(eps) + " needs " + std::to_string(static_cast<long long>(dofs)) +
                          " nodes, above the cap of " + std::to_string(opt.dof_cap));
  }
  EpsSolution sol;
  sol.eps = eps;
  sol.model = m;
  sol.coeffs = co;
  sol.options = opt;
  const fem::Mesh mesh = fem::build_mesh(-m.L, m.L, static_cast<int>(n1_real), opt.n_s, false);
  sol.mesh = fem::map_mesh(mesh, reference_map_thin(m, eps));

  const double w = 1.0 / eps;
  fem::CsrMatrix A = fem::assemble_matrix(sol.mesh, [&](const fem::QuadPoint& q) {
    const double y1 = q.x[0] / eps;
    const double y2 = q.x[1] / eps;
    return fem::Material{co.a(q.x[0], y1, y2) * w, co.reaction(q.x[0], y1, y2) * w};
  });
  const std::vector<double> b =
      fem::assemble_load(sol.mesh, [&](const fem::QuadPoint& q) { return fem::Load{w * co.source(q.x[0]), {0.0, 0.0}}; });

  fem::ConstraintSet cs;
  for (int j = 0; j <= mesh.n2; ++j) {
    cs.dirichlet.emplace_back(mesh.node(0, j), 0.0);
    cs.dirichlet.emplace_back(mesh.node(mesh.n1, j), 0.0);
  }
  const fem::ReducedSystem sys = fem::constrain(A, b, cs);
  sol.u = fem::solve(sys, &sol.info, opt.tol);

  sol.average = column_averages(mesh, sol.u);
  return sol;
}

/// Cross-sectional mean of u_eps at x1.
inline double local_average(const EpsSolution& s, double x1) {
  const fem::Mesh& m = s.mesh.mesh;
  if (!(x1 >= -s.L() && x1 <= s.L())) throw OutOfDomain("x1 = " + std::to_string(x1) + " outside [-L, L]");
  const double f = (x1 - m.a1) / m.h1();
  const int i = std::clamp(static_cast<int>(std::floor(f)), 0, m.n1 - 1);
  const double t = f - i;
  return (1.0 - t) * s.average[static_cast<std::size_t>(i)] + t * s.average[static_cast<std::size_t>(i + 1)];
}

/// eps^-1 int |u_eps - u(x1)|^2 dx.
inline double l2_error_vs_limit(const EpsSolution& s, const EffectiveSolution& u) {
  double err = 0.0;
  fem::for_each_quad_point(s.mesh, [&](const fem::QuadPoint& q) {
    const double d = fem::field_at(q, s.u).value - u.evaluate(q.x[0]);
    err += q.weight * d * d;
  });
  return err / s.eps;
}

/// sup over mesh columns of |mean u_eps(x1) - u(x1)|.
inline double average_gap(const EpsSolution& s, const EffectiveSolution& u) {
  double worst = 0.0;
  for (int i = 0; i <= s.mesh.mesh.n1; ++i) {
    const double x1 = s.mesh.mesh.t(i);
    worst = std::max(worst, std::fabs(s.average[static_cast<std::size_t>(i)] - u.evaluate(x1)));
  }
  return worst;
}

struct EpsNorms {
  double l2 = 0.0; ///< mu_eps-weighted
  double h1_semi = 0.0;
  double apriori() const { return l2 + h1_semi; }
};

inline EpsNorms eps_norms(const EpsSolution& s) {
  const fem::FieldNorms n = fem::norms(s.mesh, s.u, 1.0 / s.eps);
  return {n.l2_weighted, n.h1_semi};
}

/// Observed constant C in eps^-1 int (u - mean u)^2 <= C eps^2 eps^-1 int |grad u|^2.
inline double poincare_constant(const EpsSolution& s) {
  double num = 0.0;
  double den = 0.0;
  fem::for_each_quad_point(s.mesh, [&](const fem::QuadPoint& q) {
    const fem::FieldValue v = fem::field_at(q, s.u);
    const double d = v.value - local_average(s, q.x[0]);
    num += q.weight * d * d;
    den += q.weight * dot(v.grad, v.grad);
  });
  if (den == 0.0) return 0.0;
  return num / (s.eps * s.eps * den);
}

/// a(e1 + grad_y N1) . e1 moments against a list of cell weights psi,
/// tabulated on x1 nodes and interpolated with 4-point Lagrange stencils.
struct FluxMomentProfile {
  std::vector<double> x1;
  std::vector<std::vector<double>> values; ///< values[k][i] for psi_k at x1[i]

  double interpolate(std::size_t k, double x) const {
    const std::size_t n = x1.size();
    if (n == 1) return values[k][0];
    std::size_t i = 0;
    while (i + 2 < n && x1[i + 1] < x) ++i;
    const std::size_t order = std::min<std::size_t>(4, n);
    std::size_t first = std::min(i >= 1 ? i - 1 : 0, n - order);
    double out = 0.0;
    for (std::size_t a = first; a < first + order; ++a) {
      double w = 1.0;
      for (std::size_t b = first; b < first + order; ++b) {
        if (b != a) w *= (x - x1[b]) / (x1[a] - x1[b]);
      }
      out += w * values[k][a];
    }
    return out;
  }
};

inline FluxMomentProfile flux_moment_profile(const GeometryModel& m, const CoefficientSet& co,
                                             const std::vector<Expr>& psis, int n_nodes, CellResolution res,
                                             int workers = 1) {
  FluxMomentProfile p;
  p.x1 = uniform_nodes(-m.L, m.L, std::max(n_nodes, 4));
  p.values.assign(psis.size(), std::vector<double>(p.x1.size()));
  parallel_for(p.x1.size(), workers, [&](std::size_t i) {
    const CellSolution c = solve_cell_problem(m, co, p.x1[i], res);
    for (std::size_t k = 0; k < psis.size(); ++k) p.values[k][i] = cell_flux_moment(c, co, psis[k]);
  });
  return p;
}

/// |int (a^eps grad u_eps)_1 phi psi(x/eps) d mu_eps
///   - int_I phi(x1, 0) u'(x1) M_psi(x1) dx1|, with M_psi the k-th moment.
inline double flux_two_scale_residual(const EpsSolution& s, const FluxMomentProfile& moments, std::size_t k,
                                      const EffectiveSolution& u, const Expr& phi, const Expr& psi) {
  const double eps = s.eps;
  double lhs = 0.0;
  fem::for_each_quad_point(s.mesh, [&](const fem::QuadPoint& q) {
    const double y1 = q.x[0] / eps;
    const double y2 = q.x[1] / eps;
    const fem::FieldValue v = fem::field_at(q, s.u);
    const Vec2 flux = s.coeffs.a(q.x[0], y1, y2) * v.grad;
    lhs += q.weight * flux[0] * phi(q.x[0], q.x[1], y1, y2) * psi(q.x[0], q.x[1], y1, y2);
  });
  lhs /= eps;
  double rhs = 0.0;
  const QuadratureRule r = gauss_legendre(4, 0.0, 1.0);
  for (std::size_t e = 0; e < u.elements(); ++e) {
    const double a = u.nodes[e];
    const double h = u.nodes[e + 1] - a;
    const double du = (u.u[e + 1] - u.u[e]) / h;
    for (std::size_t g = 0; g < r.size(); ++g) {
      const double x = a + h * r.nodes[g];
      rhs += h * r.weights[g] * phi(x, 0.0, 0.0, 0.0) * du * moments.interpolate(k, x);
    }
  }
  return std::fabs(lhs - rhs);
}

} // namespace thinhomog
