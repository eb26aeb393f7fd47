#pragma once
// End-to-end convergence study: config ingestion, the eps sweep, decay
// criteria and report files (CSV, JSON, two-column .dat per metric).
//
// Config files are INI-style; expression values are double-quoted, lists are
// comma separated (commas inside quotes are kept). See configs/README.md.

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>

#include "thinhomog/cell.hpp"
#include "thinhomog/epssolve.hpp"
#include "thinhomog/error.hpp"
#include "thinhomog/expr.hpp"
#include "thinhomog/geometry.hpp"
#include "thinhomog/limit1d.hpp"
#include "thinhomog/measure.hpp"
#include "thinhomog/parallel.hpp"

namespace thinhomog {

// ---- config -------------------------------------------------------------------

struct Thresholds {
  double measure_rate = 1.8;     ///< gap ratio per halving of eps
  double l2_factor = 4.0;        ///< total decay, first to last eps
  double flux_factor = 3.0;
  double average_factor = 1.0 / 0.6;
  double step_tolerance = 1.05;  ///< allowed growth between consecutive eps
  double apriori_variation = 0.2;
  // values at or below a floor count as discretization noise
  double measure_floor = 1e-10;
  double l2_floor = 1e-10;
  double flux_floor = 1e-8;
  double average_floor = 1e-6;

  bool operator==(const Thresholds&) const = default;
};

struct StudyConfig {
  std::string name; ///< report file stem; defaults to the config file stem
  // geometry
  std::string F;
  double L = 1.0;
  double R = 4.0;
  bool unit_core = false;
  // coefficients
  std::string a11 = "1", a12 = "0", a22 = "1", c = "0", f = "1";
  // sweep
  std::vector<double> eps{0.2, 0.1, 0.05, 0.025};
  int workers = 1;
  std::uint64_t seed = 20240607;
  int validation_samples = 16;
  // resolutions
  CellResolution cell{64, 32};
  EpsOptions eps_mesh;
  int elements = 64;
  int profile_nodes = 33;
  int measure_n_x1 = 16;
  int measure_n_s = 8;
  // test functions
  std::vector<std::string> measure_phi{"1 - x1^2", "exp(x1)", "cos(x1)*(1 + x2)"};
  std::string flux_phi = "1";
  std::vector<std::string> psi{"1", "cos(2*pi*y1)"};
  Thresholds thresholds;
  // output
  std::string output_dir = "out";
  std::vector<std::string> formats{"csv", "json", "dat"};
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::string unquote(const std::string& raw) {
  const std::string s = trim(raw);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') return s.substr(1, s.size() - 2);
  return s;
}

/// Comma-separated items; commas inside double quotes do not split.
inline std::vector<std::string> split_list(const std::string& raw) {
  std::vector<std::string> items;
  std::string cur;
  bool quoted = false;
  for (char ch : raw) {
    if (ch == '"') quoted = !quoted;
    if (ch == ',' && !quoted) {
      items.push_back(unquote(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (quoted) throw ConfigError("unbalanced quote in list: " + raw);
  if (!trim(cur).empty() || !items.empty()) items.push_back(unquote(cur));
  return items;
}

inline double to_number(const std::string& key, const std::string& text) {
  const std::string s = trim(text);
  double v = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) throw ConfigError(key + ": not a number: '" + text + "'");
  return v;
}

inline int to_int(const std::string& key, const std::string& text) {
  const double v = to_number(key, text);
  if (v != std::floor(v) || std::fabs(v) > 1e9) throw ConfigError(key + ": not an integer: '" + text + "'");
  return static_cast<int>(v);
}

inline bool to_bool(const std::string& key, const std::string& text) {
  const std::string s = trim(text);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError(key + ": not a boolean: '" + text + "'");
}

inline std::string fmt_double(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

} // namespace detail

inline const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "study.name",           "study.eps",           "study.workers",        "study.seed",
      "study.validation_samples",
      "geometry.F",           "geometry.L",          "geometry.R",           "geometry.unit_core",
      "coefficients.a11",     "coefficients.a12",    "coefficients.a22",     "coefficients.c",
      "coefficients.f",
      "mesh.cell_n1",         "mesh.cell_n2",        "mesh.per_period",      "mesh.n_s",
      "mesh.elements",        "mesh.profile_nodes",  "mesh.measure_n_x1",    "mesh.measure_n_s",
      "mesh.dof_cap",         "mesh.cg_tol",
      "tests.measure_phi",    "tests.flux_phi",      "tests.psi",            "tests.measure_rate",
      "tests.l2_factor",      "tests.flux_factor",   "tests.average_factor", "tests.step_tolerance",
      "tests.apriori_variation", "tests.measure_floor", "tests.l2_floor",    "tests.flux_floor",
      "tests.average_floor",
      "output.dir",           "output.formats"};
  return keys;
}

inline StudyConfig parse_config(std::istream& in) {
  boost::property_tree::ptree pt;
  try {
    boost::property_tree::ini_parser::read_ini(in, pt);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(e.what());
  }
  const auto& keys = config_keys();
  for (const auto& [section, body] : pt) {
    if (body.empty() && !body.data().empty()) throw ConfigError("key outside a section: " + section);
    for (const auto& [key, _] : body) {
      const std::string full = section + "." + key;
      if (std::find(keys.begin(), keys.end(), full) == keys.end()) throw ConfigError("unknown config key: " + full);
    }
  }
  auto get = [&](const std::string& k) -> std::optional<std::string> {
    if (auto v = pt.get_optional<std::string>(boost::property_tree::ptree::path_type(k, '.'))) return *v;
    return std::nullopt;
  };

  StudyConfig c;
  if (auto v = get("study.name")) c.name = detail::unquote(*v);
  if (auto v = get("study.eps")) {
    c.eps.clear();
    for (const auto& s : detail::split_list(*v)) c.eps.push_back(detail::to_number("study.eps", s));
  }
  if (auto v = get("study.workers")) c.workers = detail::to_int("study.workers", *v);
  if (auto v = get("study.seed")) c.seed = static_cast<std::uint64_t>(detail::to_number("study.seed", *v));
  if (auto v = get("study.validation_samples")) c.validation_samples = detail::to_int("study.validation_samples", *v);

  auto F = get("geometry.F");
  if (!F) throw ConfigError("missing required key geometry.F");
  c.F = detail::unquote(*F);
  if (auto v = get("geometry.L")) c.L = detail::to_number("geometry.L", *v);
  if (auto v = get("geometry.R")) c.R = detail::to_number("geometry.R", *v);
  if (auto v = get("geometry.unit_core")) c.unit_core = detail::to_bool("geometry.unit_core", *v);

  if (auto v = get("coefficients.a11")) c.a11 = detail::unquote(*v);
  if (auto v = get("coefficients.a12")) c.a12 = detail::unquote(*v);
  if (auto v = get("coefficients.a22")) c.a22 = detail::unquote(*v);
  if (auto v = get("coefficients.c")) c.c = detail::unquote(*v);
  if (auto v = get("coefficients.f")) c.f = detail::unquote(*v);

  if (auto v = get("mesh.cell_n1")) c.cell.n1 = detail::to_int("mesh.cell_n1", *v);
  if (auto v = get("mesh.cell_n2")) c.cell.n2 = detail::to_int("mesh.cell_n2", *v);
  if (auto v = get("mesh.per_period")) c.eps_mesh.per_period = detail::to_int("mesh.per_period", *v);
  if (auto v = get("mesh.n_s")) c.eps_mesh.n_s = detail::to_int("mesh.n_s", *v);
  if (auto v = get("mesh.elements")) c.elements = detail::to_int("mesh.elements", *v);
  if (auto v = get("mesh.profile_nodes")) c.profile_nodes = detail::to_int("mesh.profile_nodes", *v);
  if (auto v = get("mesh.measure_n_x1")) c.measure_n_x1 = detail::to_int("mesh.measure_n_x1", *v);
  if (auto v = get("mesh.measure_n_s")) c.measure_n_s = detail::to_int("mesh.measure_n_s", *v);
  if (auto v = get("mesh.dof_cap")) c.eps_mesh.dof_cap = static_cast<std::size_t>(detail::to_number("mesh.dof_cap", *v));
  if (auto v = get("mesh.cg_tol")) c.eps_mesh.tol = detail::to_number("mesh.cg_tol", *v);

  if (auto v = get("tests.measure_phi")) c.measure_phi = detail::split_list(*v);
  if (auto v = get("tests.flux_phi")) c.flux_phi = detail::unquote(*v);
  if (auto v = get("tests.psi")) c.psi = detail::split_list(*v);
  Thresholds& t = c.thresholds;
  const std::pair<const char*, double*> numeric[] = {
      {"tests.measure_rate", &t.measure_rate},       {"tests.l2_factor", &t.l2_factor},
      {"tests.flux_factor", &t.flux_factor},         {"tests.average_factor", &t.average_factor},
      {"tests.step_tolerance", &t.step_tolerance},   {"tests.apriori_variation", &t.apriori_variation},
      {"tests.measure_floor", &t.measure_floor},     {"tests.l2_floor", &t.l2_floor},
      {"tests.flux_floor", &t.flux_floor},           {"tests.average_floor", &t.average_floor}};
  for (const auto& [key, dst] : numeric) {
    if (auto v = get(key)) *dst = detail::to_number(key, *v);
  }

  if (auto v = get("output.dir")) c.output_dir = detail::unquote(*v);
  if (auto v = get("output.formats")) c.formats = detail::split_list(*v);
  for (const auto& fmt : c.formats) {
    if (fmt != "csv" && fmt != "json" && fmt != "dat") throw ConfigError("unknown output format: " + fmt);
  }
  for (std::size_t i = 0; i < c.eps.size(); ++i) {
    if (!(c.eps[i] > 0.0)) throw ConfigError("eps values must be positive");
    if (i > 0 && !(c.eps[i] < c.eps[i - 1])) throw ConfigError("eps list must be strictly decreasing");
  }
  if (c.psi.empty()) throw ConfigError("tests.psi must name at least one cell weight");
  return c;
}

inline StudyConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  StudyConfig c = parse_config(in);
  if (c.name.empty()) c.name = path.stem().string();
  return c;
}

// ---- problem set-up -------------------------------------------------------------

struct Problem {
  GeometryModel model;
  CoefficientSet coeffs;
};

/// Parses every expression and builds the model; parse errors surface as ConfigError.
inline Problem build_problem(const StudyConfig& c) {
  auto expr = [](const std::string& what, const std::string& text) {
    try {
      return parse(text);
    } catch (const Error& e) {
      throw ConfigError(what + ": " + e.what());
    }
  };
  Problem p;
  p.model = GeometryModel::make(expr("geometry.F", c.F), c.L, c.R, 1e-10, c.unit_core);
  p.coeffs = CoefficientSet::make(expr("coefficients.a11", c.a11), expr("coefficients.a12", c.a12),
                                  expr("coefficients.a22", c.a22), expr("coefficients.c", c.c),
                                  expr("coefficients.f", c.f));
  for (const auto& s : c.measure_phi) expr("tests.measure_phi", s);
  expr("tests.flux_phi", c.flux_phi);
  for (const auto& s : c.psi) {
    const Expr psi = expr("tests.psi", s);
    if (psi.depends_on(Var::x1) || psi.depends_on(Var::x2)) throw ConfigError("tests.psi must depend on y1, y2 only: " + s);
  }
  return p;
}

/// Geometry (F1-F4) and coefficient (H1-H3) probes.
inline ValidationReport validate_problem(const Problem& p, const StudyConfig& c) {
  ValidationReport r = validate(p.model, c.validation_samples, c.seed);
  const ValidationReport h = validate_coefficients(p.model, p.coeffs, c.validation_samples, c.seed);
  r.conditions.insert(r.conditions.end(), h.conditions.begin(), h.conditions.end());
  for (const auto& s : c.psi) {
    const bool periodic = check_periodicity(parse(s), Var::y1, c.validation_samples, c.seed);
    r.conditions.push_back({"psi periodic", periodic, s});
  }
  return r;
}

// ---- report -----------------------------------------------------------------------

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

struct StudyRow {
  double eps = 0.0;
  double measure_gap = kMissing;   ///< max over the measure test functions
  double l2_error = kMissing;
  double flux_residual = kMissing; ///< max over psi
  double avg_gap = kMissing;
  double apriori_norm = kMissing;
  std::vector<double> measure_by_phi;
  std::vector<double> flux_by_psi;
  double poincare = kMissing;
  // resolution actually used
  int per_period = 0;
  int n_s = 0;
  int n1 = 0;
  std::size_t dofs = 0;
  std::size_t iterations = 0;
  double cg_residual = kMissing;
  std::string error; ///< empty when the row completed

  bool ok() const { return error.empty(); }
};

struct CriterionResult {
  std::string name;
  std::string status; ///< "pass", "fail" or "skipped"
  std::string detail;
  bool passed() const { return status != "fail"; }
};

struct StudyReport {
  StudyConfig config;
  std::vector<StudyRow> rows;
  std::vector<EffectiveSolution::Entry> effective; ///< at the 1D Gauss points
  std::vector<CriterionResult> criteria;
  double box_measure_min = 0.0;
  double box_measure_max = 0.0;

  bool passed() const {
    return std::all_of(criteria.begin(), criteria.end(), [](const auto& c) { return c.passed(); }) &&
           std::all_of(rows.begin(), rows.end(), [](const auto& r) { return r.ok(); });
  }
  const CriterionResult& criterion(const std::string& name) const {
    for (const auto& c : criteria) {
      if (c.name == name) return c;
    }
    throw Error("no criterion named " + name);
  }
};

// ---- criteria ---------------------------------------------------------------------

namespace detail {

inline std::string sequence(const std::vector<double>& v) {
  std::ostringstream os;
  os.precision(3);
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v[i];
  return os.str();
}

/// last <= first / factor (or at the floor), every step <= tol * previous
/// (steps ending at the floor are noise); all values at the floor pass.
inline CriterionResult decay(const std::string& name, const std::vector<double>& v, double factor, double tol,
                             double floor) {
  CriterionResult r{name, "pass", sequence(v)};
  if (std::any_of(v.begin(), v.end(), [](double x) { return !std::isfinite(x); })) return {name, "fail", "missing values: " + r.detail};
  if (v.size() < 2) return {name, "skipped", "fewer than two eps values"};
  if (*std::max_element(v.begin(), v.end()) <= floor) {
    r.detail += " (noise level)";
    return r;
  }
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > tol * v[i - 1] && v[i] > floor) return {name, "fail", r.detail + " (step " + std::to_string(i) + " grows)"};
  }
  if (!(v.back() * factor <= v.front() || v.back() <= floor)) {
    return {name, "fail", r.detail + " (total factor " + fmt_double(v.front() / v.back()) + ")"};
  }
  return r;
}

/// Ratio >= rate^(log2(eps_i / eps_{i+1})) for each consecutive pair.
inline CriterionResult rate(const std::string& name, const std::vector<double>& eps, const std::vector<double>& v,
                            double per_halving, double floor) {
  CriterionResult r{name, "pass", sequence(v)};
  if (std::any_of(v.begin(), v.end(), [](double x) { return !std::isfinite(x); })) return {name, "fail", "missing values: " + r.detail};
  if (v.size() < 2) return {name, "skipped", "fewer than two eps values"};
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] <= floor) continue;
    const double need = std::pow(per_halving, std::log2(eps[i - 1] / eps[i]));
    if (v[i - 1] < need * v[i]) return {name, "fail", r.detail + " (step " + std::to_string(i) + " ratio " + fmt_double(v[i - 1] / v[i]) + ")"};
  }
  return r;
}

} // namespace detail

/// Pass/fail flags as a pure function of the rows and the thresholds.
inline std::vector<CriterionResult> evaluate_criteria(const std::vector<StudyRow>& rows, const StudyConfig& c) {
  const Thresholds& t = c.thresholds;
  std::vector<double> eps;
  for (const auto& r : rows) eps.push_back(r.eps);
  auto column = [&](auto get) {
    std::vector<double> v;
    for (const auto& r : rows) v.push_back(r.ok() ? get(r) : kMissing);
    return v;
  };
  std::vector<CriterionResult> out;
  for (std::size_t k = 0; k < c.measure_phi.size(); ++k) {
    out.push_back(detail::rate("measure_gap[" + c.measure_phi[k] + "]", eps,
                               column([&](const StudyRow& r) { return k < r.measure_by_phi.size() ? r.measure_by_phi[k] : kMissing; }),
                               t.measure_rate, t.measure_floor));
  }
  out.push_back(detail::decay("l2_error", column([](const StudyRow& r) { return r.l2_error; }), t.l2_factor,
                              t.step_tolerance, t.l2_floor));
  for (std::size_t k = 0; k < c.psi.size(); ++k) {
    out.push_back(detail::decay("flux_residual[" + c.psi[k] + "]",
                                column([&](const StudyRow& r) { return k < r.flux_by_psi.size() ? r.flux_by_psi[k] : kMissing; }),
                                t.flux_factor, t.step_tolerance, t.flux_floor));
  }
  out.push_back(detail::decay("avg_gap", column([](const StudyRow& r) { return r.avg_gap; }), t.average_factor,
                              t.step_tolerance, t.average_floor));

  const std::vector<double> ap = column([](const StudyRow& r) { return r.apriori_norm; });
  CriterionResult a{"apriori_norm", "pass", detail::sequence(ap)};
  if (std::any_of(ap.begin(), ap.end(), [](double x) { return !std::isfinite(x); })) {
    a.status = "fail";
  } else if (ap.size() < 2) {
    a.status = "skipped";
  } else {
    const auto [lo, hi] = std::minmax_element(ap.begin(), ap.end());
    const double variation = *lo > 0.0 ? *hi / *lo - 1.0 : (*hi > 0.0 ? INFINITY : 0.0);
    a.detail += " (variation " + detail::fmt_double(variation) + ")";
    if (variation > t.apriori_variation) a.status = "fail";
  }
  out.push_back(a);
  return out;
}

// ---- pipeline ------------------------------------------------------------------------

struct StudyTiming {
  double total = 0.0;
  double effective = 0.0;
  std::vector<double> per_eps;
};

/// Validates, solves the effective problem once, then fills one row per eps.
/// Rows that fail keep their error message; the remaining rows still run.
inline StudyReport run_study(const StudyConfig& cfg, StudyTiming* timing = nullptr) {
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  const Problem p = build_problem(cfg);
  const ValidationReport v = validate_problem(p, cfg);
  if (!v.ok()) {
    std::string msg = "validation failed:";
    for (const auto& c : v.conditions) {
      if (!c.passed) msg += " " + c.name + " (" + c.detail + ")";
    }
    throw ValidationFailure(msg);
  }
  const int workers = resolve_workers(cfg.workers);

  StudyReport report;
  report.config = cfg;
  CellCache cache(p.model, p.coeffs, cfg.cell);
  const EffectiveSolution u = solve_effective(cache, {cfg.elements, workers, cfg.profile_nodes});
  report.effective = u.table;
  report.box_measure_min = INFINITY;
  report.box_measure_max = 0.0;
  for (const auto& e : u.table) {
    report.box_measure_min = std::min(report.box_measure_min, e.box_measure);
    report.box_measure_max = std::max(report.box_measure_max, e.box_measure);
  }
  std::vector<Expr> psis;
  for (const auto& s : cfg.psi) psis.push_back(parse(s));
  const int moment_nodes = cfg.profile_nodes > 0 ? cfg.profile_nodes : 33;
  const FluxMomentProfile moments = flux_moment_profile(p.model, p.coeffs, psis, moment_nodes, cfg.cell, workers);
  std::vector<Expr> phis;
  std::vector<double> limits;
  for (const auto& s : cfg.measure_phi) {
    phis.push_back(parse(s));
    limits.push_back(integrate_mu_star(phis.back(), p.model));
  }
  const Expr flux_phi = parse(cfg.flux_phi);
  const auto t1 = clock::now();

  report.rows.resize(cfg.eps.size());
  std::vector<double> row_time(cfg.eps.size(), 0.0);
  parallel_for(cfg.eps.size(), workers, [&](std::size_t i) {
    const auto start = clock::now();
    StudyRow& row = report.rows[i];
    row.eps = cfg.eps[i];
    row.per_period = cfg.eps_mesh.per_period;
    row.n_s = cfg.eps_mesh.n_s;
    try {
      const MeasureQuadrature q = measure_quadrature(p.model, row.eps, cfg.measure_n_x1, cfg.measure_n_s);
      row.measure_gap = 0.0;
      for (std::size_t k = 0; k < phis.size(); ++k) {
        row.measure_by_phi.push_back(std::fabs(integrate_mu_eps(phis[k], q) - limits[k]));
        row.measure_gap = std::max(row.measure_gap, row.measure_by_phi.back());
      }
      const EpsSolution s = solve_eps_problem(p.model, p.coeffs, row.eps, cfg.eps_mesh);
      row.n1 = s.mesh.mesh.n1;
      row.dofs = s.dofs();
      row.iterations = s.info.iterations;
      row.cg_residual = s.info.residual;
      row.l2_error = l2_error_vs_limit(s, u);
      row.flux_residual = 0.0;
      for (std::size_t k = 0; k < psis.size(); ++k) {
        row.flux_by_psi.push_back(flux_two_scale_residual(s, moments, k, u, flux_phi, psis[k]));
        row.flux_residual = std::max(row.flux_residual, row.flux_by_psi.back());
      }
      row.avg_gap = average_gap(s, u);
      row.apriori_norm = eps_norms(s).apriori();
      row.poincare = poincare_constant(s);
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    row_time[i] = std::chrono::duration<double>(clock::now() - start).count();
  });
  report.criteria = evaluate_criteria(report.rows, cfg);
  if (timing) {
    timing->effective = std::chrono::duration<double>(t1 - t0).count();
    timing->per_eps = row_time;
    timing->total = std::chrono::duration<double>(clock::now() - t0).count();
  }
  return report;
}

// ---- serialization ----------------------------------------------------------------

namespace detail {

inline nlohmann::json num(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }
inline double num(const nlohmann::json& j) { return j.is_null() ? kMissing : j.get<double>(); }

} // namespace detail

inline nlohmann::json to_json(const StudyConfig& c) {
  const Thresholds& t = c.thresholds;
  return {{"name", c.name},
          {"geometry", {{"F", c.F}, {"L", c.L}, {"R", c.R}, {"unit_core", c.unit_core}}},
          {"coefficients", {{"a11", c.a11}, {"a12", c.a12}, {"a22", c.a22}, {"c", c.c}, {"f", c.f}}},
          {"eps", c.eps},
          {"workers", c.workers},
          {"seed", c.seed},
          {"validation_samples", c.validation_samples},
          {"mesh",
           {{"cell_n1", c.cell.n1},
            {"cell_n2", c.cell.n2},
            {"per_period", c.eps_mesh.per_period},
            {"n_s", c.eps_mesh.n_s},
            {"dof_cap", c.eps_mesh.dof_cap},
            {"cg_tol", c.eps_mesh.tol},
            {"elements", c.elements},
            {"profile_nodes", c.profile_nodes},
            {"measure_n_x1", c.measure_n_x1},
            {"measure_n_s", c.measure_n_s}}},
          {"tests",
           {{"measure_phi", c.measure_phi},
            {"flux_phi", c.flux_phi},
            {"psi", c.psi},
            {"measure_rate", t.measure_rate},
            {"l2_factor", t.l2_factor},
            {"flux_factor", t.flux_factor},
            {"average_factor", t.average_factor},
            {"step_tolerance", t.step_tolerance},
            {"apriori_variation", t.apriori_variation},
            {"measure_floor", t.measure_floor},
            {"l2_floor", t.l2_floor},
            {"flux_floor", t.flux_floor},
            {"average_floor", t.average_floor}}},
          {"output", {{"dir", c.output_dir}, {"formats", c.formats}}}};
}

inline StudyConfig config_from_json(const nlohmann::json& j) {
  StudyConfig c;
  c.name = j.at("name").get<std::string>();
  const auto& g = j.at("geometry");
  c.F = g.at("F").get<std::string>();
  c.L = g.at("L").get<double>();
  c.R = g.at("R").get<double>();
  c.unit_core = g.at("unit_core").get<bool>();
  const auto& co = j.at("coefficients");
  c.a11 = co.at("a11").get<std::string>();
  c.a12 = co.at("a12").get<std::string>();
  c.a22 = co.at("a22").get<std::string>();
  c.c = co.at("c").get<std::string>();
  c.f = co.at("f").get<std::string>();
  c.eps = j.at("eps").get<std::vector<double>>();
  c.workers = j.at("workers").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.validation_samples = j.at("validation_samples").get<int>();
  const auto& m = j.at("mesh");
  c.cell = {m.at("cell_n1").get<int>(), m.at("cell_n2").get<int>()};
  c.eps_mesh.per_period = m.at("per_period").get<int>();
  c.eps_mesh.n_s = m.at("n_s").get<int>();
  c.eps_mesh.dof_cap = m.at("dof_cap").get<std::size_t>();
  c.eps_mesh.tol = m.at("cg_tol").get<double>();
  c.elements = m.at("elements").get<int>();
  c.profile_nodes = m.at("profile_nodes").get<int>();
  c.measure_n_x1 = m.at("measure_n_x1").get<int>();
  c.measure_n_s = m.at("measure_n_s").get<int>();
  const auto& t = j.at("tests");
  c.measure_phi = t.at("measure_phi").get<std::vector<std::string>>();
  c.flux_phi = t.at("flux_phi").get<std::string>();
  c.psi = t.at("psi").get<std::vector<std::string>>();
  Thresholds& th = c.thresholds;
  th.measure_rate = t.at("measure_rate").get<double>();
  th.l2_factor = t.at("l2_factor").get<double>();
  th.flux_factor = t.at("flux_factor").get<double>();
  th.average_factor = t.at("average_factor").get<double>();
  th.step_tolerance = t.at("step_tolerance").get<double>();
  th.apriori_variation = t.at("apriori_variation").get<double>();
  th.measure_floor = t.at("measure_floor").get<double>();
  th.l2_floor = t.at("l2_floor").get<double>();
  th.flux_floor = t.at("flux_floor").get<double>();
  th.average_floor = t.at("average_floor").get<double>();
  c.output_dir = j.at("output").at("dir").get<std::string>();
  c.formats = j.at("output").at("formats").get<std::vector<std::string>>();
  return c;
}

inline nlohmann::json to_json(const StudyReport& r) {
  using detail::num;
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows) {
    nlohmann::json mb = nlohmann::json::array(), fb = nlohmann::json::array();
    for (double x : row.measure_by_phi) mb.push_back(num(x));
    for (double x : row.flux_by_psi) fb.push_back(num(x));
    rows.push_back({{"eps", row.eps},
                    {"measure_gap", num(row.measure_gap)},
                    {"l2_error", num(row.l2_error)},
                    {"flux_residual", num(row.flux_residual)},
                    {"avg_gap", num(row.avg_gap)},
                    {"apriori_norm", num(row.apriori_norm)},
                    {"measure_by_phi", mb},
                    {"flux_by_psi", fb},
                    {"poincare", num(row.poincare)},
                    {"resolution",
                     {{"per_period", row.per_period},
                      {"n_s", row.n_s},
                      {"n1", row.n1},
                      {"dofs", row.dofs},
                      {"cg_iterations", row.iterations},
                      {"cg_residual", num(row.cg_residual)}}},
                    {"error", row.error}});
  }
  nlohmann::json eff = nlohmann::json::array();
  for (const auto& e : r.effective) {
    eff.push_back({{"x1", e.x1}, {"weight", e.weight}, {"a_eff", e.a_eff}, {"c_bar", e.c_bar}, {"box_measure", e.box_measure}, {"f", e.f}});
  }
  nlohmann::json crit = nlohmann::json::array();
  for (const auto& c : r.criteria) crit.push_back({{"name", c.name}, {"status", c.status}, {"detail", c.detail}});
  return {{"metadata",
           {{"config", to_json(r.config)},
            {"cell_resolution", {r.config.cell.n1, r.config.cell.n2}},
            {"cg_tolerance", r.config.eps_mesh.tol},
            {"cross_check_tolerance", kCrossCheckTol},
            {"box_measure_range", {r.box_measure_min, r.box_measure_max}}}},
          {"rows", rows},
          {"effective", eff},
          {"criteria", crit},
          {"passed", r.passed()}};
}

inline StudyReport report_from_json(const nlohmann::json& j) {
  using detail::num;
  StudyReport r;
  r.config = config_from_json(j.at("metadata").at("config"));
  const auto& range = j.at("metadata").at("box_measure_range");
  r.box_measure_min = range.at(0).get<double>();
  r.box_measure_max = range.at(1).get<double>();
  for (const auto& x : j.at("rows")) {
    StudyRow row;
    row.eps = x.at("eps").get<double>();
    row.measure_gap = num(x.at("measure_gap"));
    row.l2_error = num(x.at("l2_error"));
    row.flux_residual = num(x.at("flux_residual"));
    row.avg_gap = num(x.at("avg_gap"));
    row.apriori_norm = num(x.at("apriori_norm"));
    for (const auto& v : x.at("measure_by_phi")) row.measure_by_phi.push_back(num(v));
    for (const auto& v : x.at("flux_by_psi")) row.flux_by_psi.push_back(num(v));
    row.poincare = num(x.at("poincare"));
    const auto& res = x.at("resolution");
    row.per_period = res.at("per_period").get<int>();
    row.n_s = res.at("n_s").get<int>();
    row.n1 = res.at("n1").get<int>();
    row.dofs = res.at("dofs").get<std::size_t>();
    row.iterations = res.at("cg_iterations").get<std::size_t>();
    row.cg_residual = num(res.at("cg_residual"));
    row.error = x.at("error").get<std::string>();
    r.rows.push_back(std::move(row));
  }
  for (const auto& e : j.at("effective")) {
    r.effective.push_back({e.at("x1").get<double>(), e.at("weight").get<double>(), e.at("a_eff").get<double>(), e.at("c_bar").get<double>(), e.at("box_measure").get<double>(), e.at("f").get<double>()});
  }
  for (const auto& c : j.at("criteria")) r.criteria.push_back({c.at("name").get<std::string>(), c.at("status").get<std::string>(), c.at("detail").get<std::string>()});
  return r;
}

inline const char* kCsvHeader = "eps,measure_gap,l2_error,flux_residual,avg_gap,apriori_norm";

inline std::string to_csv(const StudyReport& r) {
  using detail::fmt_double;
  std::string out = std::string(kCsvHeader) + "\n";
  for (const auto& row : r.rows) {
    out += fmt_double(row.eps) + "," + fmt_double(row.measure_gap) + "," + fmt_double(row.l2_error) + "," +
           fmt_double(row.flux_residual) + "," + fmt_double(row.avg_gap) + "," + fmt_double(row.apriori_norm) + "\n";
  }
  return out;
}

inline std::string effective_csv(const StudyReport& r) {
  using detail::fmt_double;
  std::string out = "x1,a_eff,c_bar,box_measure\n";
  for (const auto& e : r.effective) {
    out += fmt_double(e.x1) + "," + fmt_double(e.a_eff) + "," + fmt_double(e.c_bar) + "," + fmt_double(e.box_measure) + "\n";
  }
  return out;
}

/// Writes the report in the configured formats; returns the files written.
inline std::vector<std::filesystem::path> emit(const StudyReport& r, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create output directory " + dir.string() + ": " + ec.message());
  std::vector<fs::path> written;
  auto write = [&](const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) throw Error("cannot write " + path.string());
    written.push_back(path);
  };
  const std::string stem = r.config.name.empty() ? "study" : r.config.name;
  const auto& formats = r.config.formats;
  auto wants = [&](const char* f) { return std::find(formats.begin(), formats.end(), f) != formats.end(); };
  if (wants("csv")) {
    write(dir / (stem + ".csv"), to_csv(r));
    write(dir / (stem + "_effective.csv"), effective_csv(r));
  }
  if (wants("json")) write(dir / (stem + ".json"), to_json(r).dump(2) + "\n");
  if (wants("dat")) {
    using detail::fmt_double;
    const std::pair<const char*, double StudyRow::*> metrics[] = {{"measure_gap", &StudyRow::measure_gap},
                                                                  {"l2_error", &StudyRow::l2_error},
                                                                  {"flux_residual", &StudyRow::flux_residual},
                                                                  {"avg_gap", &StudyRow::avg_gap},
                                                                  {"apriori_norm", &StudyRow::apriori_norm}};
    for (const auto& [name, member] : metrics) {
      std::string text = std::string("# eps ") + name + "\n";
      for (const auto& row : r.rows) text += fmt_double(row.eps) + " " + fmt_double(row.*member) + "\n";
      write(dir / (stem + "_" + name + ".dat"), text);
    }
  }
  return written;
}

} // namespace thinhomog
