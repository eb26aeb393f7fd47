#pragma once
// Cross-sections Q(x1, y1) = {y2 : F(x1, y1, y2) > 0}, periodicity cells and
// boundary-fitted maps onto reference rectangles. Two space dimensions only,
// so every cross-section is an interval (g_minus, g_plus).

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "thinhomog/error.hpp"
#include "thinhomog/expr.hpp"
#include "thinhomog/linalg.hpp"
#include "thinhomog/quadrature.hpp"

namespace thinhomog {

inline constexpr double kThicknessFloor = 1e-6;
inline constexpr double kValidationFloor = 1e-8;
inline constexpr int kRootSamples = 64;

/// Boundary function F(x1, y1, y2) on the cylinder I = (-L, L).
struct GeometryModel {
  Expr F;
  double L = 1.0;
  double search_radius = 4.0;
  double root_tol = 1e-10;
  bool unit_core = false; ///< model declares F(x1, y1, 0) == 1
  Expr dF_dx1;
  Expr dF_dy1;
  Expr dF_dy2;

  static GeometryModel make(const Expr& F, double L, double search_radius = 4.0, double root_tol = 1e-10,
                            bool unit_core = false) {
    if (!(L > 0.0)) throw GeometryError("half-length L must be positive");
    if (!(search_radius > 0.0)) throw GeometryError("search radius must be positive");
    if (!(root_tol > 0.0)) throw GeometryError("root tolerance must be positive");
    if (F.depends_on(Var::x2)) throw GeometryError("F must not depend on x2");
    GeometryModel m;
    m.F = F;
    m.L = L;
    m.search_radius = search_radius;
    m.root_tol = root_tol;
    m.unit_core = unit_core;
    m.dF_dx1 = differentiate(F, Var::x1);
    m.dF_dy1 = differentiate(F, Var::y1);
    m.dF_dy2 = differentiate(F, Var::y2);
    return m;
  }

  double operator()(double x1, double y1, double y2) const { return F(x1, 0.0, y1, y2); }
};

struct CrossSection {
  double g_minus = 0.0;
  double g_plus = 0.0;
  double thickness() const { return g_plus - g_minus; }
};

namespace detail {

inline double refine_root(const GeometryModel& m, double x1, double y1, double outside, double inside) {
  auto f = [&](double y) { return m(x1, y1, y); };
  // bisection keeps F(outside) <= 0 < F(inside)
  while (std::fabs(inside - outside) > 1e-12) {
    const double mid = 0.5 * (outside + inside);
    if (f(mid) > 0.0) {
      inside = mid;
    } else {
      outside = mid;
    }
  }
  const double lo = std::min(outside, inside);
  const double hi = std::max(outside, inside);
  double y = 0.5 * (outside + inside);
  for (int step = 0; step < 2; ++step) {
    const double fy = f(y);
    const double dfy = m.dF_dy2(x1, 0.0, y1, y);
    if (dfy == 0.0) break;
    const double next = y - fy / dfy;
    if (next < lo - 1e-12 || next > hi + 1e-12) break;
    if (std::fabs(f(next)) > std::fabs(fy)) break;
    y = next;
  }
  return y;
}

} // namespace detail

/// The unique positivity interval of F(x1, y1, .) inside (-R, R).
inline CrossSection cross_section(const GeometryModel& m, double x1, double y1) {
  const double R = m.search_radius;
  std::array<double, kRootSamples> ys{};
  std::array<bool, kRootSamples> pos{};
  for (int k = 0; k < kRootSamples; ++k) {
    ys[static_cast<std::size_t>(k)] = -R + 2.0 * R * k / (kRootSamples - 1);
    pos[static_cast<std::size_t>(k)] = m(x1, y1, ys[static_cast<std::size_t>(k)]) > 0.0;
  }
  int runs = 0;
  int first = -1;
  int last = -1;
  for (int k = 0; k < kRootSamples; ++k) {
    if (pos[static_cast<std::size_t>(k)] && (k == 0 || !pos[static_cast<std::size_t>(k - 1)])) {
      ++runs;
      if (first < 0) first = k;
    }
    if (pos[static_cast<std::size_t>(k)]) last = k;
  }
  std::ostringstream where;
  where << " at (x1, y1) = (" << x1 << ", " << y1 << ")";
  if (runs == 0) throw EmptySection("F <= 0 on the whole search bracket" + where.str());
  if (runs > 1) throw MultiComponent("cross-section has " + std::to_string(runs) + " components" + where.str());
  if (first == 0 || last == kRootSamples - 1) {
    throw EmptySection("cross-section is not contained in the search bracket" + where.str());
  }
  CrossSection cs;
  cs.g_minus = detail::refine_root(m, x1, y1, ys[static_cast<std::size_t>(first - 1)], ys[static_cast<std::size_t>(first)]);
  cs.g_plus = detail::refine_root(m, x1, y1, ys[static_cast<std::size_t>(last + 1)], ys[static_cast<std::size_t>(last)]);
  for (double g : {cs.g_minus, cs.g_plus}) {
    if (std::fabs(m(x1, y1, g)) > m.root_tol) {
      throw GeometryError("root refinement did not reach the tolerance" + where.str());
    }
  }
  if (cs.thickness() < kThicknessFloor) throw DegenerateSection("cross-section thinner than the floor" + where.str());
  if (!(m(x1, y1, 0.5 * (cs.g_minus + cs.g_plus)) > 0.0)) {
    throw MultiComponent("F not positive at the section midpoint" + where.str());
  }
  return cs;
}

/// Derivatives of the section endpoints by implicit differentiation of F = 0.
struct SectionSlopes {
  double dminus_dx1 = 0.0, dplus_dx1 = 0.0;
  double dminus_dy1 = 0.0, dplus_dy1 = 0.0;
};

inline SectionSlopes section_slopes(const GeometryModel& m, double x1, double y1, const CrossSection& cs) {
  SectionSlopes out;
  auto one = [&](double g, double& dx1, double& dy1) {
    const double fy2 = m.dF_dy2(x1, 0.0, y1, g);
    if (fy2 == 0.0) throw DegenerateMap("dF/dy2 vanishes on the boundary");
    dx1 = -m.dF_dx1(x1, 0.0, y1, g) / fy2;
    dy1 = -m.dF_dy1(x1, 0.0, y1, g) / fy2;
  };
  one(cs.g_minus, out.dminus_dx1, out.dminus_dy1);
  one(cs.g_plus, out.dplus_dx1, out.dplus_dy1);
  return out;
}

/// Tabulated cross-section data of Box(x1) on [0, 1] in y1.
struct CellGeometry {
  GeometryModel model;
  double x1 = 0.0;
  QuadratureRule rule; ///< composite Gauss nodes in y1
  std::vector<double> g_minus;
  std::vector<double> g_plus;
  std::vector<double> thickness;
  double box_measure = 0.0;
  double thickness_at_0 = 0.0;
  double thickness_at_1 = 0.0;
};

inline CellGeometry cell_geometry(const GeometryModel& m, double x1, int n_quad) {
  if (n_quad < 4) throw Error("cell_geometry needs n_quad >= 4");
  CellGeometry g;
  g.model = m;
  g.x1 = x1;
  g.rule = composite_gauss(0.0, 1.0, std::max(1, n_quad / 4), 4);
  const std::size_t n = g.rule.size();
  g.g_minus.resize(n);
  g.g_plus.resize(n);
  g.thickness.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const CrossSection cs = cross_section(m, x1, g.rule.nodes[i]);
    g.g_minus[i] = cs.g_minus;
    g.g_plus[i] = cs.g_plus;
    g.thickness[i] = cs.thickness();
    g.box_measure += g.rule.weights[i] * cs.thickness();
  }
  g.thickness_at_0 = cross_section(m, x1, 0.0).thickness();
  g.thickness_at_1 = cross_section(m, x1, 1.0).thickness();
  return g;
}

// ---- validation -------------------------------------------------------------

struct ConditionResult {
  std::string name;
  bool passed = true;
  std::string detail;
};

struct ValidationReport {
  std::vector<ConditionResult> conditions;

  bool ok() const {
    return std::all_of(conditions.begin(), conditions.end(), [](const auto& c) { return c.passed; });
  }
  const ConditionResult& get(const std::string& name) const {
    for (const auto& c : conditions) {
      if (c.name == name) return c;
    }
    throw Error("no validation entry named " + name);
  }
};

namespace detail {

inline double zero_set_indicator(const GeometryModel& m, double x1, double y1, double y2) {
  const double f = m(x1, y1, y2);
  double g1 = 0.0;
  double g2 = 0.0;
  try {
    g1 = m.dF_dy1(x1, 0.0, y1, y2);
    g2 = m.dF_dy2(x1, 0.0, y1, y2);
  } catch (const NonDifferentiable&) {
    return std::numeric_limits<double>::infinity();
  }
  return std::fabs(f) + std::hypot(g1, g2);
}

// golden-section minimum of |F| + |grad_y F| on [a, b]
inline double minimize_indicator(const GeometryModel& m, double x1, double y1, double a, double b) {
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - invphi * (b - a);
  double d = a + invphi * (b - a);
  double fc = zero_set_indicator(m, x1, y1, c);
  double fd = zero_set_indicator(m, x1, y1, d);
  for (int it = 0; it < 200 && (b - a) > 1e-15 * (1.0 + std::fabs(a)); ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = zero_set_indicator(m, x1, y1, c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = zero_set_indicator(m, x1, y1, d);
    }
  }
  return std::min(fc, fd);
}

} // namespace detail

/// Checks (F1)-(F4) on an n_samples x n_samples grid of (x1, y1). Failures
/// are reported, never thrown.
inline ValidationReport validate(const GeometryModel& m, int n_samples, std::uint64_t seed = 20240607) {
  n_samples = std::max(n_samples, 8);
  ValidationReport report;
  std::vector<double> xs(static_cast<std::size_t>(n_samples));
  std::vector<double> ts(static_cast<std::size_t>(n_samples));
  for (int i = 0; i < n_samples; ++i) {
    xs[static_cast<std::size_t>(i)] = -m.L + 2.0 * m.L * i / (n_samples - 1);
    ts[static_cast<std::size_t>(i)] = static_cast<double>(i) / n_samples;
  }

  {
    ConditionResult r{"F1", true, "periodic in y1"};
    try {
      r.passed = check_periodicity(m.F, Var::y1, n_samples, seed, -m.L, m.L);
      if (!r.passed) r.detail = "F(x1, y1 + 1, y2) differs from F(x1, y1, y2)";
    } catch (const Error& e) {
      r.passed = false;
      r.detail = e.what();
    }
    report.conditions.push_back(r);
  }

  {
    ConditionResult r{"F2", true, ""};
    double worst = std::numeric_limits<double>::infinity();
    double worst_x1 = 0.0, worst_y1 = 0.0;
    constexpr int scan = 256;
    const double R = m.search_radius;
    const double step = 2.0 * R / (scan - 1);
    try {
      for (double x1 : xs) {
        for (double y1 : ts) {
          std::array<double, scan> f{};
          for (int k = 0; k < scan; ++k) f[static_cast<std::size_t>(k)] = m(x1, y1, -R + step * k);
          for (int k = 0; k < scan; ++k) {
            const double fk = f[static_cast<std::size_t>(k)];
            const bool sign_change = k + 1 < scan && ((fk > 0.0) != (f[static_cast<std::size_t>(k + 1)] > 0.0));
            const bool local_min = k > 0 && k + 1 < scan && std::fabs(fk) <= std::fabs(f[static_cast<std::size_t>(k - 1)]) &&
                                   std::fabs(fk) <= std::fabs(f[static_cast<std::size_t>(k + 1)]);
            if (!sign_change && !local_min) continue;
            const double a = -R + step * std::max(0, k - 1);
            const double b = -R + step * std::min(scan - 1, k + 1 + (sign_change ? 1 : 0));
            const double g = detail::minimize_indicator(m, x1, y1, a, b);
            if (g < worst) {
              worst = g;
              worst_x1 = x1;
              worst_y1 = y1;
            }
          }
        }
      }
      r.passed = worst >= kValidationFloor;
    } catch (const Error& e) {
      r.passed = false;
      r.detail = e.what();
    }
    if (r.detail.empty()) {
      std::ostringstream os;
      os << "min |F| + |grad_y F| near the zero set = " << worst << " at (x1, y1) = (" << worst_x1 << ", " << worst_y1
         << ")";
      r.detail = os.str();
    }
    report.conditions.push_back(r);
  }

  {
    ConditionResult r{"F3", true, ""};
    std::ostringstream os;
    try {
      if (m.unit_core) {
        double dev = 0.0;
        for (double x1 : xs) {
          for (double y1 : ts) dev = std::max(dev, std::fabs(m(x1, y1, 0.0) - 1.0));
        }
        r.passed = dev <= 1e-10;
        os << "max |F(x1, y1, 0) - 1| = " << dev;
      } else {
        os << "F(x1, y1, 0) = 1 not declared";
      }
      const bool open_ends = m(-m.L, 0.0, 0.0) > 0.0 || m(m.L, 0.0, 0.0) > 0.0;
      if (open_ends) os << "; end sections at x1 = +-L are nonempty (Dirichlet bases)";
    } catch (const Error& e) {
      r.passed = false;
      os << e.what();
    }
    r.detail = os.str();
    report.conditions.push_back(r);
  }

  {
    ConditionResult r{"F4", true, "single-interval cross-sections on the sample grid"};
    for (double x1 : xs) {
      for (double y1 : ts) {
        try {
          (void)cross_section(m, x1, y1);
        } catch (const Error& e) {
          r.passed = false;
          r.detail = e.what();
          break;
        }
      }
      if (!r.passed) break;
    }
    report.conditions.push_back(r);
  }
  return report;
}

// ---- reference maps ---------------------------------------------------------

/// Lower edge and thickness of one reference column, with derivatives in t.
struct Column {
  double lower = 0.0;
  double thickness = 0.0;
  double d_lower = 0.0;
  double d_thickness = 0.0;
};

/// (t, s) in [t0, t1] x [0, 1]  ->  (t, lower(t) + s * thickness(t)).
class ReferenceMap {
public:
  ReferenceMap(double t0, double t1, std::function<Column(double)> column)
      : t0_(t0), t1_(t1), column_(std::move(column)) {}

  double t_begin() const { return t0_; }
  double t_end() const { return t1_; }
  Column column(double t) const { return column_(t); }

  Vec2 map(double t, double s) const {
    const Column c = column_(t);
    return {t, c.lower + s * c.thickness};
  }

  /// Rows are the physical components, columns the reference directions (t, s).
  Mat2 jacobian(double t, double s) const {
    const Column c = column_(t);
    return {1.0, 0.0, c.d_lower + s * c.d_thickness, c.thickness};
  }

  double det(double t, double s) const { return jacobian(t, s).det(); }

  Mat2 inverse_jacobian_transpose(double t, double s) const { return jacobian(t, s).inverse().transpose(); }

  /// Throws DegenerateMap unless det J > 0 on an n x n sample grid.
  void check(int n = 16) const {
    for (int i = 0; i <= n; ++i) {
      const double t = t0_ + (t1_ - t0_) * i / n;
      const Column c = column_(t);
      if (!(c.thickness > 0.0)) throw DegenerateMap("non-positive Jacobian determinant at t = " + std::to_string(t));
    }
  }

private:
  double t0_;
  double t1_;
  std::function<Column(double)> column_;
};

/// Box(x1) as the image of [0, 1]^2.
inline ReferenceMap reference_map_cell(const GeometryModel& m, double x1) {
  ReferenceMap map(0.0, 1.0, [m, x1](double t) {
    const CrossSection cs = cross_section(m, x1, t);
    const SectionSlopes sl = section_slopes(m, x1, t, cs);
    return Column{cs.g_minus, cs.thickness(), sl.dminus_dy1, sl.dplus_dy1 - sl.dminus_dy1};
  });
  map.check();
  return map;
}

inline ReferenceMap reference_map_cell(const CellGeometry& g) { return reference_map_cell(g.model, g.x1); }

/// Omega_eps as the image of [-L, L] x [0, 1].
inline ReferenceMap reference_map_thin(const GeometryModel& m, double eps) {
  if (!(eps > 0.0)) throw Error("eps must be positive");
  ReferenceMap map(-m.L, m.L, [m, eps](double x1) {
    const CrossSection cs = cross_section(m, x1, x1 / eps);
    const SectionSlopes sl = section_slopes(m, x1, x1 / eps, cs);
    const double dminus = eps * sl.dminus_dx1 + sl.dminus_dy1;
    const double dplus = eps * sl.dplus_dx1 + sl.dplus_dy1;
    return Column{eps * cs.g_minus, eps * cs.thickness(), dminus, dplus - dminus};
  });
  map.check(64);
  return map;
}

} // namespace thinhomog
