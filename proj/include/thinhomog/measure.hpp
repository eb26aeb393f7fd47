#pragma once
// Quadrature against d mu_eps = eps^-1 chi(Omega_eps) dx and its weak limit
// d mu_* = |Box(x1)| dx1 x delta(x2).
//
// The x1 axis is split at the period boundaries eps*j, so every panel sees a
// single period of the fast variable; the partial periods at the two ends get
// their own (shorter) panels. Across the thickness a Gauss rule in the
// reference coordinate s is used.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "thinhomog/error.hpp"
#include "thinhomog/expr.hpp"
#include "thinhomog/geometry.hpp"
#include "thinhomog/quadrature.hpp"

namespace thinhomog {

struct MeasurePoint {
  double x1 = 0.0;
  double x2 = 0.0;
  double s = 0.0;      ///< reference coordinate across the thickness
  double weight = 0.0; ///< includes the eps^-1 prefactor
};

struct MeasureQuadrature {
  GeometryModel model;
  double eps = 0.0;
  int n_x1 = 16; ///< nodes per fast period
  int n_s = 8;
  std::vector<MeasurePoint> points;

  std::size_t size() const { return points.size(); }
};

namespace detail {

// breakpoints -L, eps*j (interior), L
inline std::vector<double> period_breaks(double L, double eps) {
  std::vector<double> b{-L};
  const auto first = static_cast<long>(std::floor(-L / eps)) + 1;
  for (long j = first; eps * static_cast<double>(j) < L; ++j) {
    const double x = eps * static_cast<double>(j);
    if (x - b.back() > 1e-12 * eps) b.push_back(x);
  }
  if (L - b.back() <= 1e-12 * eps) b.back() = L;
  else b.push_back(L);
  return b;
}

} // namespace detail

inline MeasureQuadrature measure_quadrature(const GeometryModel& m, double eps, int n_x1 = 16, int n_s = 8) {
  if (!(eps > 0.0)) throw Error("eps must be positive");
  if (n_x1 < 4) throw Error("need at least 4 x1 nodes per period");
  if (n_s < 1) throw Error("need at least one node across the thickness");
  MeasureQuadrature q{m, eps, n_x1, n_s, {}};
  const std::vector<double> breaks = detail::period_breaks(m.L, eps);
  const QuadratureRule srule = gauss_legendre(n_s, 0.0, 1.0);
  const int full_panels = std::max(1, n_x1 / 4);
  for (std::size_t p = 0; p + 1 < breaks.size(); ++p) {
    const double a = breaks[p];
    const double b = breaks[p + 1];
    const int panels = std::max(1, static_cast<int>(std::ceil(full_panels * (b - a) / eps - 1e-9)));
    const QuadratureRule xr = composite_gauss(a, b, panels, 4);
    for (std::size_t i = 0; i < xr.size(); ++i) {
      const double x1 = xr.nodes[i];
      const CrossSection cs = cross_section(m, x1, x1 / eps);
      // eps^-1 * (eps * thickness) = thickness
      for (std::size_t k = 0; k < srule.size(); ++k) {
        const double s = srule.nodes[k];
        q.points.push_back({x1, eps * (cs.g_minus + s * cs.thickness()), s, xr.weights[i] * srule.weights[k] * cs.thickness()});
      }
    }
  }
  return q;
}

inline double integrate(const MeasureQuadrature& q, const std::function<double(const MeasurePoint&)>& g) {
  double sum = 0.0;
  for (const MeasurePoint& p : q.points) sum += p.weight * g(p);
  return sum;
}

/// Integral of phi(x1, x2) against mu_eps. Fast variables, if present, are
/// bound to x / eps.
inline double integrate_mu_eps(const Expr& phi, const MeasureQuadrature& q) {
  return integrate(q, [&](const MeasurePoint& p) { return phi(p.x1, p.x2, p.x1 / q.eps, p.x2 / q.eps); });
}

/// Integral of fn(y1, y2) over Box(x1).
inline double integrate_box(const GeometryModel& m, double x1, const std::function<double(double, double)>& fn,
                            int n_y1 = 64, int n_y2 = 8) {
  const QuadratureRule yr = composite_gauss(0.0, 1.0, std::max(1, n_y1 / 4), 4);
  const QuadratureRule sr = gauss_legendre(n_y2, 0.0, 1.0);
  double sum = 0.0;
  for (std::size_t i = 0; i < yr.size(); ++i) {
    const CrossSection cs = cross_section(m, x1, yr.nodes[i]);
    double inner = 0.0;
    for (std::size_t k = 0; k < sr.size(); ++k) inner += sr.weights[k] * fn(yr.nodes[i], cs.g_minus + sr.nodes[k] * cs.thickness());
    sum += yr.weights[i] * cs.thickness() * inner;
  }
  return sum;
}

/// Integral of |Box(x1)| g(x1) over I.
inline double integrate_limit(const GeometryModel& m, const std::function<double(double)>& g, int n_quad = 64,
                              int n_box = 64) {
  const QuadratureRule xr = composite_gauss(-m.L, m.L, std::max(1, n_quad / 4), 4);
  double sum = 0.0;
  for (std::size_t i = 0; i < xr.size(); ++i) sum += xr.weights[i] * cell_geometry(m, xr.nodes[i], n_box).box_measure * g(xr.nodes[i]);
  return sum;
}

/// Integral of phi(x1, 0) against mu_*.
inline double integrate_mu_star(const Expr& phi, const GeometryModel& m, int n_quad = 128) {
  return integrate_limit(m, [&](double x1) { return phi(x1, 0.0, 0.0, 0.0); }, n_quad);
}

struct MeasureGapRow {
  double eps = 0.0;
  double value = 0.0; ///< integral against mu_eps
  double limit = 0.0; ///< integral against mu_*
  double gap = 0.0;
};

inline std::vector<MeasureGapRow> measure_convergence_study(const Expr& phi, const GeometryModel& m,
                                                            const std::vector<double>& eps_list, int n_x1 = 16,
                                                            int n_s = 8) {
  for (std::size_t i = 1; i < eps_list.size(); ++i) {
    if (!(eps_list[i] < eps_list[i - 1])) throw Error("eps list must be strictly decreasing");
  }
  std::vector<MeasureGapRow> rows;
  if (eps_list.empty()) return rows;
  const double limit = integrate_mu_star(phi, m);
  for (double eps : eps_list) {
    const double v = integrate_mu_eps(phi, measure_quadrature(m, eps, n_x1, n_s));
    rows.push_back({eps, v, limit, std::fabs(v - limit)});
  }
  return rows;
}

/// Integral of g(x) phi(x) psi(x / eps) against mu_eps. `g` is evaluated at
/// the quadrature points (e.g. by FEM interpolation in (x1, s)).
inline double two_scale_pairing(const std::function<double(const MeasurePoint&)>& g, const Expr& phi, const Expr& psi,
                                const MeasureQuadrature& q) {
  return integrate(q, [&](const MeasurePoint& p) {
    const double y1 = p.x1 / q.eps;
    const double y2 = p.x2 / q.eps;
    return g(p) * phi(p.x1, p.x2, y1, y2) * psi(p.x1, p.x2, y1, y2);
  });
}

/// |int phi psi(x/eps) d mu_eps - int_I phi(x1, 0) (int_Box psi dy) dx1|.
inline double mean_value_gap(const Expr& phi, const Expr& psi, const GeometryModel& m, double eps, int n_x1 = 16,
                             int n_s = 8) {
  const MeasureQuadrature q = measure_quadrature(m, eps, n_x1, n_s);
  const double lhs = two_scale_pairing([](const MeasurePoint&) { return 1.0; }, phi, psi, q);
  const QuadratureRule xr = composite_gauss(-m.L, m.L, 16, 4);
  double rhs = 0.0;
  for (std::size_t i = 0; i < xr.size(); ++i) {
    const double x1 = xr.nodes[i];
    const double cell = integrate_box(m, x1, [&](double y1, double y2) { return psi(x1, 0.0, y1, y2); });
    rhs += xr.weights[i] * phi(x1, 0.0, 0.0, 0.0) * cell;
  }
  return std::fabs(lhs - rhs);
}

} // namespace thinhomog
