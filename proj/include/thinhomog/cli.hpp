#pragma once
// Command-line front end. Exit codes: 0 success, 1 validation failure,
// 2 solver failure, 64 usage error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "thinhomog/study.hpp"

namespace thinhomog {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitSolver = 2;
inline constexpr int kExitUsage = 64;

namespace detail {

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error("cannot write " + path.string());
}

inline nlohmann::json mat_json(const Mat2& m) { return {{m.m11, m.m12}, {m.m21, m.m22}}; }

} // namespace detail

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Thin-domain homogenization toolkit"};
  app.require_subcommand(1);
  std::string config_path;
  std::string out_path;

  auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "study config file")->required();
  };

  CLI::App* validate_cmd = app.add_subcommand("validate", "check geometry (F1-F4) and coefficients (H1-H3)");
  add_config(validate_cmd);

  double cell_x1 = 0.0;
  int cell_n1 = 0, cell_n2 = 0;
  CLI::App* cell_cmd = app.add_subcommand("cell", "solve the cell problem at one x1");
  add_config(cell_cmd);
  cell_cmd->add_option("--x1", cell_x1, "slow variable")->required();
  cell_cmd->add_option("--n1", cell_n1, "cell elements in y1 (default from config)");
  cell_cmd->add_option("--n2", cell_n2, "cell elements across the section (default from config)");

  int eff_elements = 0;
  int eff_profile = -1;
  CLI::App* eff_cmd = app.add_subcommand("effective", "solve the homogenized 1D problem");
  add_config(eff_cmd);
  eff_cmd->add_option("--elements", eff_elements, "1D elements (default from config)");
  eff_cmd->add_option("--profile-interp", eff_profile, "interpolate coefficients from this many cell solves (0: one per Gauss point)");
  eff_cmd->add_option("--out", out_path, "CSV file for (x1, u)");

  double solve_eps = 0.0;
  CLI::App* eps_cmd = app.add_subcommand("solve-eps", "solve the full problem at one eps");
  add_config(eps_cmd);
  eps_cmd->add_option("--eps", solve_eps, "period/thickness scale")->required()->check(CLI::PositiveNumber);
  eps_cmd->add_option("--out", out_path, "output directory (default from config)");

  CLI::App* measure_cmd = app.add_subcommand("verify-measure", "gaps between mu_eps and mu_* integrals");
  add_config(measure_cmd);

  CLI::App* study_cmd = app.add_subcommand("study", "full eps sweep and report files");
  add_config(study_cmd);
  study_cmd->add_option("--out", out_path, "output directory (default from config)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }
  if (!std::filesystem::is_regular_file(config_path)) {
    err << "error: config file not found: " << config_path << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    StudyConfig cfg = load_config(config_path);
    const std::filesystem::path out_dir = out_path.empty() ? std::filesystem::path(cfg.output_dir) : std::filesystem::path(out_path);

    if (*validate_cmd) {
      const Problem p = build_problem(cfg);
      const ValidationReport r = validate_problem(p, cfg);
      for (const auto& c : r.conditions) out << (c.passed ? "ok   " : "FAIL ") << c.name << "  " << c.detail << "\n";
      return r.ok() ? kExitOk : kExitValidation;
    }

    const Problem p = build_problem(cfg);
    if (const ValidationReport r = validate_problem(p, cfg); !r.ok()) {
      for (const auto& c : r.conditions) {
        if (!c.passed) err << "validation failed: " << c.name << "  " << c.detail << "\n";
      }
      return kExitValidation;
    }
    const int workers = resolve_workers(cfg.workers);

    if (*cell_cmd) {
      CellResolution res = cfg.cell;
      if (cell_n1 > 0) res.n1 = cell_n1;
      if (cell_n2 > 0) res.n2 = cell_n2;
      const CellSolution s = cell_solve(p.model, p.coeffs, cell_x1, res);
      const nlohmann::json j = {{"x1", s.x1},
                                {"resolution", {res.n1, res.n2}},
                                {"A_eff", detail::mat_json(s.A_eff)},
                                {"A_direct", detail::mat_json(s.A_direct)},
                                {"a_eff", s.a_eff},
                                {"c_bar", s.c_bar},
                                {"box_measure", s.box_measure},
                                {"mean_defect", mean_defect(s)},
                                {"cg_iterations", {s.info[0].iterations, s.info[1].iterations}}};
      out << j.dump(2) << "\n";
      return kExitOk;
    }

    if (*eff_cmd) {
      LimitOptions opt{eff_elements > 0 ? eff_elements : cfg.elements, workers,
                       eff_profile >= 0 ? eff_profile : cfg.profile_nodes};
      CellCache cache(p.model, p.coeffs, cfg.cell);
      const EffectiveSolution u = solve_effective(cache, opt);
      std::string csv = "x1,u\n";
      for (std::size_t i = 0; i < u.nodes.size(); ++i) csv += detail::fmt_double(u.nodes[i]) + "," + detail::fmt_double(u.u[i]) + "\n";
      if (!out_path.empty()) detail::write_file(out_path, csv);
      else out << csv;
      err << "effective: " << opt.n_elements << " elements, " << cache.solves() << " cell solves, energy "
          << detail::fmt_double(u.energy()) << "\n";
      return kExitOk;
    }

    if (*eps_cmd) {
      const EpsSolution s = solve_eps_problem(p.model, p.coeffs, solve_eps, cfg.eps_mesh);
      const fem::Mesh& m = s.mesh.mesh;
      std::string csv = "x1,s,x2,u\n";
      for (int j = 0; j <= m.n2; ++j) {
        for (int i = 0; i <= m.n1; ++i) {
          const std::size_t n = m.node(i, j);
          csv += detail::fmt_double(s.mesh.coords[n][0]) + "," + detail::fmt_double(m.s(j)) + "," +
                 detail::fmt_double(s.mesh.coords[n][1]) + "," + detail::fmt_double(s.u[n]) + "\n";
        }
      }
      const std::string stem = cfg.name + "_eps_" + detail::fmt_double(solve_eps);
      detail::write_file(out_dir / (stem + ".csv"), csv);
      const EpsNorms n = eps_norms(s);
      const nlohmann::json j = {{"eps", s.eps},
                                {"per_period", s.options.per_period},
                                {"n_s", s.options.n_s},
                                {"n1", m.n1},
                                {"dofs", s.dofs()},
                                {"cg_iterations", s.info.iterations},
                                {"cg_residual", s.info.residual},
                                {"l2", n.l2},
                                {"h1_semi", n.h1_semi},
                                {"apriori_norm", n.apriori()},
                                {"poincare", poincare_constant(s)}};
      detail::write_file(out_dir / (stem + ".json"), j.dump(2) + "\n");
      out << j.dump(2) << "\n";
      return kExitOk;
    }

    if (*measure_cmd) {
      out << "phi,eps,mu_eps,mu_star,gap\n";
      for (const auto& text : cfg.measure_phi) {
        for (const auto& row : measure_convergence_study(parse(text), p.model, cfg.eps, cfg.measure_n_x1, cfg.measure_n_s)) {
          out << '"' << text << "\"," << detail::fmt_double(row.eps) << "," << detail::fmt_double(row.value) << ","
              << detail::fmt_double(row.limit) << "," << detail::fmt_double(row.gap) << "\n";
        }
      }
      return kExitOk;
    }

    if (*study_cmd) {
      StudyTiming timing;
      const StudyReport r = run_study(cfg, &timing);
      for (const auto& f : emit(r, out_dir)) err << "wrote " << f.string() << "\n";
      out << to_csv(r);
      for (const auto& c : r.criteria) out << c.status << "  " << c.name << "  " << c.detail << "\n";
      for (const auto& row : r.rows) {
        if (!row.ok()) err << "eps = " << row.eps << " failed: " << row.error << "\n";
      }
      err << "wall time " << timing.total << " s (effective stage " << timing.effective << " s)\n";
      const bool rows_ok = std::all_of(r.rows.begin(), r.rows.end(), [](const StudyRow& row) { return row.ok(); });
      return rows_ok ? kExitOk : kExitSolver;
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const ValidationFailure& e) {
    err << e.what() << "\n";
    return kExitValidation;
  } catch (const GeometryError& e) {
    // raised while building the model or sampling sections
    err << "geometry error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "solver failure: " << e.what() << "\n";
    return kExitSolver;
  }
  return kExitUsage;
}

} // namespace thinhomog
