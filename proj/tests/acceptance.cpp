// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.
// Tolerances are fixed here, independent of the shipped config files.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "corpus.hpp"
#include "oracles.hpp"
#include "thinhomog/cell.hpp"
#include "thinhomog/epssolve.hpp"
#include "thinhomog/expr.hpp"
#include "thinhomog/fem/assembly.hpp"
#include "thinhomog/fem/cg.hpp"
#include "thinhomog/fem/constraints.hpp"
#include "thinhomog/limit1d.hpp"
#include "thinhomog/measure.hpp"
#include "thinhomog/study.hpp"

using namespace thinhomog;

namespace {

constexpr double kPi = std::numbers::pi;
const std::vector<double> kSweep{0.2, 0.1, 0.05, 0.025};

// 1
constexpr double kMeasureRatio = 1.8;
constexpr double kFlatMeasureGap = 1e-10;
constexpr double kMeasureSeconds = 10.0;
// 2
constexpr double kLayeredRel = 1e-3;
constexpr double kLayeredNodal = 1e-4;
constexpr double kLayeredSeconds = 5.0;
// 3
constexpr double kTrivialN1 = 1e-9;
constexpr double kTrivialAeff = 1e-8;
// 4
constexpr double kSymmetry = 1e-8;
constexpr double kEigenFloor = -1e-10;
constexpr double kSecondColumn = 5e-6;
// 5
constexpr double kCrossCheck = 1e-6;
// 6-8
constexpr double kL2Factor = 4.0;
constexpr double kFluxFactor = 3.0;
constexpr double kStepTolerance = 1.05;
constexpr double kAprioriVariation = 0.2;
constexpr double kSweepSeconds = 300.0;
// 9
constexpr double kRate = 3.5;
constexpr double kPatch = 1e-12;
// 10
constexpr double kDerivativeRel = 1e-6;
constexpr int kProbes = 100;

struct Case {
  GeometryModel model;
  CoefficientSet coeffs;
};

Case make_case(const corpus::Problem& p) {
  return {GeometryModel::make(parse(p.F), p.L),
          CoefficientSet::make(parse(p.a11), parse(p.a12), parse(p.a22), parse(p.c), parse(p.f))};
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int failures = 0;

void report(int id, bool ok, const std::string& what, const std::string& detail) {
  std::printf("%s  %2d  %s  [%s]\n", ok ? "PASS" : "FAIL", id, what.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

// ---- 1 ------------------------------------------------------------------------------

void measure_convergence() {
  const auto t0 = std::chrono::steady_clock::now();
  const GeometryModel osc = GeometryModel::make(parse(corpus::kOscillating.F), 1.0);
  bool ok = true;
  double worst_ratio = INFINITY;
  for (const char* phi : {"1 - x1^2", "exp(x1)", "cos(x1)*(1 + x2)"}) {
    const auto rows = measure_convergence_study(parse(phi), osc, kSweep);
    for (std::size_t i = 1; i < rows.size(); ++i) {
      const double ratio = rows[i - 1].gap / rows[i].gap;
      worst_ratio = std::min(worst_ratio, ratio);
      ok = ok && ratio >= kMeasureRatio;
    }
  }
  const GeometryModel flat = GeometryModel::make(parse(corpus::kFlat.F), 1.0);
  double flat_gap = 0.0;
  for (const char* phi : {"1 - x1^2", "exp(x1)", "cos(3*x1)"}) {
    for (const auto& r : measure_convergence_study(parse(phi), flat, kSweep)) flat_gap = std::max(flat_gap, r.gap);
  }
  ok = ok && flat_gap <= kFlatMeasureGap;
  const double t = seconds_since(t0);
  ok = ok && t <= kMeasureSeconds;
  report(1, ok, "measure convergence mu_eps -> mu_*",
         "min ratio per halving " + num(worst_ratio) + ", flat gap " + num(flat_gap) + ", " + num(t) + " s");
}

// ---- 2 ------------------------------------------------------------------------------

void layered_oracle() {
  const Case s = make_case(corpus::kLayered);
  const auto t0 = std::chrono::steady_clock::now();
  const CellSolution c = cell_solve(s.model, s.coeffs, 0.0, {64, 32});
  const double t = seconds_since(t0);
  const double rel = std::fabs(c.a_eff / std::sqrt(3.0) - 1.0);
  const double mean = oracle::periodic_trapezoid(oracle::layered_corrector_raw, 4096);
  double nodal = 0.0;
  for (std::size_t k = 0; k < c.N1.size(); ++k) {
    nodal = std::max(nodal, std::fabs(c.N1[k] - (oracle::layered_corrector_raw(c.mesh.coords[k][0]) - mean)));
  }
  report(2, rel <= kLayeredRel && nodal <= kLayeredNodal && t <= kLayeredSeconds, "layered cell oracle (64x32)",
         "a_eff rel err " + num(rel) + ", N1 nodal err " + num(nodal) + ", " + num(t) + " s");
}

// ---- 3 ------------------------------------------------------------------------------

void trivial_homogenization() {
  const Case s = make_case(corpus::kFlat);
  const CellSolution c = cell_solve(s.model, s.coeffs, 0.0);
  double n1 = 0.0;
  for (double v : c.N1) n1 = std::max(n1, std::fabs(v));
  const double gap = std::fabs(c.a_eff - c.box_measure);
  report(3, n1 <= kTrivialN1 && gap <= kTrivialAeff, "flat section, a = I",
         "max |N1| " + num(n1) + ", |a_eff - |Box|| " + num(gap));
}

// ---- 4, 5 ---------------------------------------------------------------------------

void structure_and_cross_check() {
  bool ok4 = true;
  bool ok5 = true;
  double sym = 0.0, eig = INFINITY, col2 = 0.0, amin = INFINITY, cross = 0.0;
  for (const auto& p : corpus::kProblems) {
    const Case s = make_case(p);
    for (double x1 : {-0.7, 0.0, 0.3}) {
      CellSolution c = solve_cell_problem(s.model, s.coeffs, x1);
      try {
        effective_coefficients(c, s.model, s.coeffs);
      } catch (const CrossCheckFailure&) {
        ok5 = false;
        continue;
      }
      const Mat2& A = c.A_eff;
      const Mat2& D = c.A_direct;
      const double scale = A.max_abs();
      sym = std::max(sym, std::fabs(A.m12 - A.m21) / scale);
      eig = std::min(eig, symmetric_eigenvalues(A)[0]);
      col2 = std::max({col2, std::fabs(A.m12), std::fabs(A.m22)});
      amin = std::min(amin, c.a_eff);
      cross = std::max({cross, std::fabs(D.m11 - A.m11) / scale, std::fabs(D.m12 - A.m12) / scale,
                        std::fabs(D.m21 - A.m21) / scale, std::fabs(D.m22 - A.m22) / scale});
    }
  }
  ok4 = sym <= kSymmetry && eig >= kEigenFloor && col2 <= kSecondColumn && amin > 0.0;
  ok5 = ok5 && cross <= kCrossCheck;
  report(4, ok4, "A_eff structure on the corpus",
         "asym " + num(sym) + ", min eig " + num(eig) + ", max |A[k,2]| " + num(col2) + ", min a_eff " + num(amin));
  report(5, ok5, "direct vs symmetric A_eff", "max rel diff " + num(cross));
}

// ---- 6, 7, 8 ------------------------------------------------------------------------

void corrugated_sweep() {
  StudyConfig cfg;
  cfg.name = "corrugated";
  cfg.F = corpus::kCorrugated.F;
  cfg.a11 = corpus::kCorrugated.a11;
  cfg.a12 = corpus::kCorrugated.a12;
  cfg.a22 = corpus::kCorrugated.a22;
  cfg.c = corpus::kCorrugated.c;
  cfg.f = corpus::kCorrugated.f;
  cfg.eps = kSweep;
  // the eps mesh carries the cell mesh in every period
  cfg.cell = {32, 16};
  cfg.eps_mesh.per_period = 32;
  cfg.eps_mesh.n_s = 16;
  cfg.elements = 256;
  cfg.profile_nodes = 33;
  cfg.flux_phi = "1 + 0.5*x1";
  cfg.psi = {"1", "cos(2*pi*y1)"};
  const auto t0 = std::chrono::steady_clock::now();
  const StudyReport r = run_study(cfg);
  const double t = seconds_since(t0);
  bool rows_ok = true;
  for (const auto& row : r.rows) rows_ok = rows_ok && row.ok();

  std::vector<double> l2, ap, flux[2];
  for (const auto& row : r.rows) {
    l2.push_back(row.l2_error);
    ap.push_back(row.apriori_norm);
    for (std::size_t k = 0; k < 2; ++k) flux[k].push_back(k < row.flux_by_psi.size() ? row.flux_by_psi[k] : NAN);
  }
  const CriterionResult c6 = detail::decay("l2", l2, kL2Factor, kStepTolerance, 0.0);
  report(6, rows_ok && c6.status == "pass" && t <= kSweepSeconds, "L2 error vs limit, corrugated problem",
         c6.detail + ", total factor " + num(l2.front() / l2.back()) + ", " + num(t) + " s");

  bool ok7 = rows_ok;
  std::string d7;
  for (std::size_t k = 0; k < 2; ++k) {
    const CriterionResult c = detail::decay("flux", flux[k], kFluxFactor, kStepTolerance, 0.0);
    ok7 = ok7 && c.status == "pass";
    d7 += (k ? "; psi=" : "psi=") + cfg.psi[k] + ": " + c.detail + " (x" + num(flux[k].front() / flux[k].back()) + ")";
  }
  report(7, ok7, "flux two-scale residual", d7);

  const auto [lo, hi] = std::minmax_element(ap.begin(), ap.end());
  const double variation = *hi / *lo - 1.0;
  report(8, rows_ok && variation <= kAprioriVariation, "a priori norm uniform in eps",
         detail::sequence(ap) + ", variation " + num(variation));
}

// ---- 9 ------------------------------------------------------------------------------

// cell solver: layered corrector against its closed form, refining in y1
double layered_l2_error(int n1) {
  const Case s = make_case(corpus::kLayered);
  const CellSolution c = solve_cell_problem(s.model, s.coeffs, 0.0, {n1, 8});
  const double mean = oracle::periodic_trapezoid(oracle::layered_corrector_raw, 4096);
  double err = 0.0;
  fem::for_each_quad_point(c.mesh, [&](const fem::QuadPoint& q) {
    const double d = fem::field_at(q, c.N1).value - (oracle::layered_corrector_raw(q.x[0]) - mean);
    err += q.weight * d * d;
  });
  return std::sqrt(err);
}

// 1D solver: u = sin(pi (x + 1) / 2) with variable coefficients
double limit_l2_error(int n) {
  auto u = [](double x) { return std::sin(kPi * (x + 1) / 2); };
  auto data = [](double x) { return EffectiveData{x, 2 + x * x, 1 + 0.5 * x, 1.5 + 0.25 * std::sin(x), {}}; };
  auto f = [&](double x) {
    const double du = kPi / 2 * std::cos(kPi * (x + 1) / 2);
    const double d2u = -kPi * kPi / 4 * u(x);
    const EffectiveData d = data(x);
    return (-(2 * x * du + d.a_eff * d2u) + d.c_bar * u(x)) / d.box_measure;
  };
  const EffectiveSolution s = solve_limit(1.0, n, std::function<EffectiveData(double)>(data), f);
  return std::sqrt(oracle::simpson([&](double x) { return std::pow(s.evaluate(x) - u(x), 2); }, -1, 1, 64 * n));
}

double patch_test() {
  const ReferenceMap wavy(0.0, 1.0, [](double t) {
    return Column{0.1 * std::sin(2 * kPi * t), 1.0 + 0.2 * std::cos(2 * kPi * t), 0.2 * kPi * std::cos(2 * kPi * t),
                  -0.4 * kPi * std::sin(2 * kPi * t)};
  });
  const fem::MappedMesh mm = fem::map_mesh(fem::build_mesh(0, 1, 7, 5, false), wavy);
  auto exact = [](Vec2 x) { return 1.0 + 2.0 * x[0] - 3.0 * x[1]; };
  const fem::CsrMatrix A = fem::assemble_matrix(mm, [](const fem::QuadPoint&) { return fem::Material{Mat2::identity(), 0.0}; });
  fem::ConstraintSet cs;
  const fem::Mesh& m = mm.mesh;
  for (std::size_t k = 0; k < m.num_grid_nodes(); ++k) {
    const int i = m.node_i(k);
    const int j = m.node_j(k);
    if (j == 0 || j == m.n2 || i == 0 || i == m.n1) cs.dirichlet.emplace_back(k, exact(mm.coords[k]));
  }
  const std::vector<double> uh = fem::solve(fem::constrain(A, std::vector<double>(A.n, 0.0), cs), nullptr, 1e-14);
  double worst = 0.0;
  for (std::size_t k = 0; k < uh.size(); ++k) worst = std::max(worst, std::fabs(uh[k] - exact(mm.coords[k])));
  return worst;
}

void fem_self_checks() {
  const double c1 = layered_l2_error(16), c2 = layered_l2_error(32), c3 = layered_l2_error(64);
  const double l1 = limit_l2_error(16), l2 = limit_l2_error(32), l3 = limit_l2_error(64);
  const double patch = patch_test();
  const double cell_rate = std::min(c1 / c2, c2 / c3);
  const double limit_rate = std::min(l1 / l2, l2 / l3);
  report(9, cell_rate >= kRate && limit_rate >= kRate && patch <= kPatch, "FEM self-checks",
         "cell L2 ratio " + num(cell_rate) + ", 1D L2 ratio " + num(limit_rate) + ", patch err " + num(patch));
}

// ---- 10 -----------------------------------------------------------------------------

void derivative_probes() {
  std::vector<std::string> exprs = corpus::kSmoothExpressions;
  for (const auto& p : corpus::kProblems) {
    for (const std::string* s : {&p.F, &p.a11, &p.a12, &p.a22, &p.c, &p.f}) {
      if (s->find("abs") == std::string::npos) exprs.push_back(*s); // abs has a kink
    }
  }
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.2, 1.2);
  double worst = 0.0;
  for (const auto& text : exprs) {
    const Expr e = parse(text);
    for (Var v : {Var::x1, Var::x2, Var::y1, Var::y2}) {
      const Expr d = differentiate(e, v);
      for (int i = 0; i < kProbes; ++i) {
        const Coords c(u(rng), u(rng), u(rng), u(rng));
        const double exact = d(c);
        const double fd = oracle::central_difference(
            [&](double t) {
              Coords p = c;
              p.set(v, t);
              return e(p);
            },
            c.get(v));
        worst = std::max(worst, std::fabs(fd - exact) / std::max(1.0, std::fabs(exact)));
      }
    }
  }
  report(10, worst <= kDerivativeRel, "symbolic derivative vs finite differences",
         std::to_string(exprs.size()) + " expressions x 4 variables x " + std::to_string(kProbes) +
             " probes, max rel err " + num(worst));
}

void guarded(int id, const char* what, void (*fn)()) {
  try {
    fn();
  } catch (const std::exception& e) {
    report(id, false, what, std::string("exception: ") + e.what());
  }
}

} // namespace

int main() {
  guarded(1, "measure convergence", measure_convergence);
  guarded(2, "layered cell oracle", layered_oracle);
  guarded(3, "flat section, a = I", trivial_homogenization);
  guarded(4, "A_eff structure / cross-check", structure_and_cross_check);
  guarded(6, "corrugated sweep", corrugated_sweep);
  guarded(9, "FEM self-checks", fem_self_checks);
  guarded(10, "symbolic derivatives", derivative_probes);
  std::printf("%s\n", failures == 0 ? "ALL PASS" : (std::to_string(failures) + " FAILED").c_str());
  return failures == 0 ? 0 : 1;
}
