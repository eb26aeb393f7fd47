#pragma once
// Cell problems on Box(x1) and the effective data they produce.
//
// For k = 1, 2 find N_k, 1-periodic in y1, with zero mean over Box(x1), s.t.
//   int a grad N_k . grad v dy = - int a e_k . grad v dy   for all periodic v.
// The Neumann data on the curved top and bottom is carried by the right-hand
// side (it is what integration by parts of div(a e_k) leaves behind).

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <future>
#include <limits>
#include <map>
#include <mutex>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "thinhomog/error.hpp"
#include "thinhomog/expr.hpp"
#include "thinhomog/fem/assembly.hpp"
#include "thinhomog/fem/cg.hpp"
#include "thinhomog/fem/constraints.hpp"
#include "thinhomog/fem/mesh.hpp"
#include "thinhomog/geometry.hpp"
#include "thinhomog/linalg.hpp"
#include "thinhomog/measure.hpp"
#include "thinhomog/parallel.hpp"

namespace thinhomog {

inline constexpr double kCrossCheckTol = 1e-6;

/// Diffusion a(x1, y), reaction c(x1, y) and source f(x1).
struct CoefficientSet {
  Expr a11 = Expr::constant(1.0);
  Expr a12 = Expr::constant(0.0);
  Expr a22 = Expr::constant(1.0);
  Expr c = Expr::constant(0.0);
  Expr f = Expr::constant(0.0);
  double lambda0 = 1e-6; ///< ellipticity floor for the validation probes

  static CoefficientSet make(const Expr& a11, const Expr& a12, const Expr& a22, const Expr& c, const Expr& f,
                             double lambda0 = 1e-6) {
    for (const Expr* e : {&a11, &a12, &a22, &c}) {
      if (e->depends_on(Var::x2)) throw ValidationFailure("coefficients are functions of (x1, y1, y2); found x2 in " + e->to_string());
    }
    if (f.depends_on(Var::x2) || f.depends_on(Var::y1) || f.depends_on(Var::y2)) {
      throw ValidationFailure("the source f may only depend on x1");
    }
    if (!(lambda0 > 0.0)) throw ValidationFailure("ellipticity floor must be positive");
    return {a11, a12, a22, c, f, lambda0};
  }

  Mat2 a(double x1, double y1, double y2) const {
    const double off = a12(x1, 0.0, y1, y2);
    return {a11(x1, 0.0, y1, y2), off, off, a22(x1, 0.0, y1, y2)};
  }
  double reaction(double x1, double y1, double y2) const { return c(x1, 0.0, y1, y2); }
  double source(double x1) const { return f(x1, 0.0, 0.0, 0.0); }
};

/// Probes periodicity in y1 of a and c, ellipticity and c >= 0 on sampled
/// points of the cells Box(x1). Failures are reported, never thrown.
inline ValidationReport validate_coefficients(const GeometryModel& m, const CoefficientSet& co, int n_samples = 16,
                                              std::uint64_t seed = 20240607) {
  n_samples = std::max(n_samples, 8);
  ValidationReport report;

  ConditionResult h1{"H1", true, ""};
  for (const auto& [name, e] : {std::pair<const char*, const Expr*>{"a11", &co.a11}, {"a12", &co.a12},
                                {"a22", &co.a22}, {"c", &co.c}}) {
    if (!check_periodicity(*e, Var::y1, n_samples, seed, -m.L, m.L)) {
      h1.passed = false;
      h1.detail += std::string(h1.detail.empty() ? "" : "; ") + name + " is not 1-periodic in y1";
    }
  }
  report.conditions.push_back(h1);

  ConditionResult h2{"H2", true, ""};
  ConditionResult h3{"H3", true, ""};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst = std::numeric_limits<double>::infinity();
  try {
    for (int i = 0; i < n_samples && h2.passed; ++i) {
      const double x1 = -m.L + 2.0 * m.L * i / (n_samples - 1);
      for (int j = 0; j < n_samples; ++j) {
        const double y1 = (j + unit(rng)) / n_samples;
        const CrossSection cs = cross_section(m, x1, y1);
        for (double s : {0.0, unit(rng), 0.5, 1.0}) {
          const double y2 = cs.g_minus + s * cs.thickness();
          const double lmin = symmetric_eigenvalues(co.a(x1, y1, y2))[0];
          worst = std::min(worst, lmin);
          if (!(lmin >= co.lambda0)) {
            h2.passed = false;
            h2.detail = "smallest eigenvalue " + std::to_string(lmin) + " below floor at (x1, y1, y2) = (" +
                        std::to_string(x1) + ", " + std::to_string(y1) + ", " + std::to_string(y2) + ")";
            break;
          }
          if (co.reaction(x1, y1, y2) < 0.0 && h3.passed) {
            h3.passed = false;
            h3.detail = "negative reaction coefficient at x1 = " + std::to_string(x1);
          }
        }
        if (!h2.passed) break;
      }
    }
    if (h2.passed) h2.detail = "smallest sampled eigenvalue " + std::to_string(worst);
    for (int i = 0; i < n_samples; ++i) {
      const double x1 = -m.L + 2.0 * m.L * i / (n_samples - 1);
      if (!std::isfinite(co.source(x1))) {
        h3.passed = false;
        h3.detail = "source is not finite at x1 = " + std::to_string(x1);
      }
    }
  } catch (const Error& e) {
    h2.passed = false;
    h2.detail = e.what();
  }
  report.conditions.push_back(h2);
  report.conditions.push_back(h3);
  return report;
}

struct CellResolution {
  int n1 = 64; ///< elements in y1
  int n2 = 32; ///< elements across the thickness

  auto operator<=>(const CellResolution&) const = default;
};

struct CellSolution {
  double x1 = 0.0;
  CellResolution resolution;
  fem::MappedMesh mesh;
  std::vector<double> N1;
  std::vector<double> N2;
  std::vector<double> mass; ///< lumped mass on the cell mesh
  fem::SolveInfo info[2];
  Mat2 A_eff{};    ///< symmetric formula
  Mat2 A_direct{}; ///< direct formula
  double a_eff = 0.0;
  double c_bar = 0.0;
  double box_measure = 0.0;
  bool has_effective = false;

  const std::vector<double>& corrector(int k) const { return k == 1 ? N1 : N2; }
};

inline CellSolution solve_cell_problem(const GeometryModel& m, const CoefficientSet& co, double x1,
                                       CellResolution res = {}) {
  if (res.n1 < 8 || res.n2 < 8) throw ResolutionError("cell mesh needs at least 8 x 8 elements");
  if (x1 < -m.L || x1 > m.L) throw OutOfDomain("x1 = " + std::to_string(x1) + " outside [-L, L]");
  CellSolution sol;
  sol.x1 = x1;
  sol.resolution = res;
  const fem::Mesh mesh = fem::build_mesh(0.0, 1.0, res.n1, res.n2, true);
  sol.mesh = fem::map_mesh(mesh, reference_map_cell(m, x1));

  const fem::CsrMatrix A =
      fem::assemble_matrix(sol.mesh, [&](const fem::QuadPoint& q) { return fem::Material{co.a(x1, q.x[0], q.x[1]), 0.0}; });
  sol.mass = fem::lumped_mass(sol.mesh);
  fem::ConstraintSet cs;
  cs.periodic = mesh.periodic_pairs();
  cs.zero_mean = true;
  cs.mean_weights = sol.mass;
  const fem::ReducedSystem sys = fem::constrain(A, std::vector<double>(A.n, 0.0), cs);

  for (int k = 1; k <= 2; ++k) {
    const std::vector<double> load = fem::assemble_load(sol.mesh, [&](const fem::QuadPoint& q) {
      const Mat2 a = co.a(x1, q.x[0], q.x[1]);
      const Vec2 col = k == 1 ? Vec2{a.m11, a.m21} : Vec2{a.m12, a.m22};
      return fem::Load{0.0, {-col[0], -col[1]}};
    });
    std::vector<double> u = fem::solve(sys, sys.reduce_rhs(load), &sol.info[k - 1]);
    (k == 1 ? sol.N1 : sol.N2) = std::move(u);
  }
  return sol;
}

/// Fills A_eff (both formulas, cross-checked), a_eff, c_bar and |Box|.
inline CellSolution& effective_coefficients(CellSolution& sol, const GeometryModel& m, const CoefficientSet& co) {
  Mat2 direct{};
  Mat2 sym{};
  const double x1 = sol.x1;
  fem::for_each_quad_point(sol.mesh, [&](const fem::QuadPoint& q) {
    const Mat2 a = co.a(x1, q.x[0], q.x[1]);
    const fem::FieldValue n1 = fem::field_at(q, sol.N1);
    const fem::FieldValue n2 = fem::field_at(q, sol.N2);
    const Vec2 e1{1.0 + n1.grad[0], n1.grad[1]}; // grad(y1 + N1)
    const Vec2 e2{n2.grad[0], 1.0 + n2.grad[1]}; // grad(y2 + N2)
    const Vec2 f1 = a * e1;
    const Vec2 f2 = a * e2;
    direct.m11 += q.weight * f1[0];
    direct.m21 += q.weight * f1[1];
    direct.m12 += q.weight * f2[0];
    direct.m22 += q.weight * f2[1];
    sym.m11 += q.weight * dot(f1, e1);
    sym.m12 += q.weight * dot(f2, e1);
    sym.m21 += q.weight * dot(f1, e2);
    sym.m22 += q.weight * dot(f2, e2);
  });
  const double scale = std::max(sym.max_abs(), 1e-300);
  const double diff = Mat2{direct.m11 - sym.m11, direct.m12 - sym.m12, direct.m21 - sym.m21, direct.m22 - sym.m22}.max_abs();
  if (diff > kCrossCheckTol * scale) {
    throw CrossCheckFailure("direct and symmetric effective tensors differ by " + std::to_string(diff / scale) +
                            " (relative) at x1 = " + std::to_string(x1));
  }
  sol.A_direct = direct;
  sol.A_eff = sym;
  sol.a_eff = sym.m11;
  sol.box_measure = cell_geometry(m, x1, 4 * sol.resolution.n1).box_measure;
  sol.c_bar = integrate_box(m, x1, [&](double y1, double y2) { return co.reaction(x1, y1, y2); }, 4 * sol.resolution.n1);
  sol.has_effective = true;
  return sol;
}

inline CellSolution cell_solve(const GeometryModel& m, const CoefficientSet& co, double x1, CellResolution res = {}) {
  CellSolution sol = solve_cell_problem(m, co, x1, res);
  effective_coefficients(sol, m, co);
  return sol;
}

/// int_Box [a (e1 + grad N1)]_1 psi(y) dy; psi = 1 gives a_eff.
inline double cell_flux_moment(const CellSolution& sol, const CoefficientSet& co, const Expr& psi) {
  double sum = 0.0;
  fem::for_each_quad_point(sol.mesh, [&](const fem::QuadPoint& q) {
    const Mat2 a = co.a(sol.x1, q.x[0], q.x[1]);
    const fem::FieldValue n1 = fem::field_at(q, sol.N1);
    const Vec2 flux = a * Vec2{1.0 + n1.grad[0], n1.grad[1]};
    sum += q.weight * flux[0] * psi(sol.x1, 0.0, q.x[0], q.x[1]);
  });
  return sum;
}

/// Zero-mean defect |int N_k dy| / |Box| for k = 1, 2.
inline double mean_defect(const CellSolution& sol) {
  double area = 0.0;
  for (double w : sol.mass) area += w;
  return std::max(std::fabs(fem::dot(sol.mass, sol.N1)), std::fabs(fem::dot(sol.mass, sol.N2))) / area;
}

// ---- effective profile --------------------------------------------------------

struct EffectiveData {
  double x1 = 0.0;
  double a_eff = 0.0;
  double c_bar = 0.0;
  double box_measure = 0.0;
  Mat2 A_eff{};
};

/// Cell solves keyed by (x1, resolution), computed at most once even when
/// requested concurrently.
class CellCache {
public:
  CellCache(GeometryModel model, CoefficientSet coeffs, CellResolution res = {})
      : model_(std::move(model)), coeffs_(std::move(coeffs)), res_(res) {}

  const GeometryModel& model() const { return model_; }
  const CoefficientSet& coefficients() const { return coeffs_; }
  CellResolution resolution() const { return res_; }

  EffectiveData get(double x1) {
    std::shared_future<EffectiveData> fut;
    std::promise<EffectiveData> promise;
    bool owner = false;
    {
      std::lock_guard lock(mutex_);
      auto it = cache_.find(x1);
      if (it == cache_.end()) {
        fut = promise.get_future().share();
        cache_.emplace(x1, fut);
        owner = true;
      } else {
        fut = it->second;
      }
    }
    if (owner) {
      try {
        const CellSolution s = cell_solve(model_, coeffs_, x1, res_);
        promise.set_value({x1, s.a_eff, s.c_bar, s.box_measure, s.A_eff});
        ++solves_;
      } catch (...) {
        promise.set_exception(std::current_exception());
      }
    }
    return fut.get();
  }

  std::vector<EffectiveData> get_all(const std::vector<double>& xs, int workers) {
    std::vector<EffectiveData> out(xs.size());
    parallel_for(xs.size(), workers, [&](std::size_t i) { out[i] = get(xs[i]); });
    return out;
  }

  std::size_t solves() const { return solves_.load(); }

private:
  GeometryModel model_;
  CoefficientSet coeffs_;
  CellResolution res_;
  std::mutex mutex_;
  std::map<double, std::shared_future<EffectiveData>> cache_;
  std::atomic<std::size_t> solves_{0};
};

/// Tabulated (a_eff, c_bar, |Box|)(x1) with piecewise-cubic interpolation.
struct EffectiveProfile {
  std::vector<EffectiveData> table;

  bool empty() const { return table.empty(); }

  EffectiveData interpolate(double x1) const {
    if (table.empty()) throw Error("empty effective profile");
    if (table.size() == 1) return table.front();
    const std::size_t n = table.size();
    if (x1 < table.front().x1 - 1e-12 || x1 > table.back().x1 + 1e-12) throw OutOfDomain("x1 outside the profile");
    std::size_t k = 0;
    while (k + 2 < n && table[k + 1].x1 < x1) ++k;
    // 4-point stencil around [x_k, x_k+1], clamped at the ends
    const std::size_t order = std::min<std::size_t>(4, n);
    std::size_t first = k >= 1 ? k - 1 : 0;
    first = std::min(first, n - order);
    EffectiveData out;
    out.x1 = x1;
    for (std::size_t i = first; i < first + order; ++i) {
      double w = 1.0;
      for (std::size_t j = first; j < first + order; ++j) {
        if (j != i) w *= (x1 - table[j].x1) / (table[i].x1 - table[j].x1);
      }
      out.a_eff += w * table[i].a_eff;
      out.c_bar += w * table[i].c_bar;
      out.box_measure += w * table[i].box_measure;
      out.A_eff = out.A_eff + table[i].A_eff * w;
    }
    return out;
  }

  /// Largest |jump| / dx between adjacent nodes, for each field.
  double max_slope() const {
    double worst = 0.0;
    for (std::size_t i = 1; i < table.size(); ++i) {
      const double dx = table[i].x1 - table[i - 1].x1;
      worst = std::max({worst, std::fabs(table[i].a_eff - table[i - 1].a_eff) / dx,
                        std::fabs(table[i].c_bar - table[i - 1].c_bar) / dx,
                        std::fabs(table[i].box_measure - table[i - 1].box_measure) / dx});
    }
    return worst;
  }
};

inline EffectiveProfile effective_profile(CellCache& cache, const std::vector<double>& x1_nodes, int workers = 1) {
  for (double x : x1_nodes) {
    if (x < -cache.model().L || x > cache.model().L) throw OutOfDomain("profile node outside [-L, L]");
  }
  for (std::size_t i = 1; i < x1_nodes.size(); ++i) {
    if (!(x1_nodes[i] > x1_nodes[i - 1])) throw Error("profile nodes must be increasing");
  }
  return {cache.get_all(x1_nodes, workers)};
}

inline EffectiveProfile effective_profile(const GeometryModel& m, const CoefficientSet& co,
                                          const std::vector<double>& x1_nodes, CellResolution res = {},
                                          int workers = 1) {
  CellCache cache(m, co, res);
  return effective_profile(cache, x1_nodes, workers);
}

inline std::vector<double> uniform_nodes(double a, double b, int n) {
  std::vector<double> x(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) x[static_cast<std::size_t>(i)] = n == 1 ? a : (i == n - 1 ? b : a + (b - a) * i / (n - 1));
  return x;
}

} // namespace thinhomog
