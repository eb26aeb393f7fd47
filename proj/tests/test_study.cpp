#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "thinhomog/study.hpp"

using namespace thinhomog;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = fs::path(THINHOMOG_SOURCE_DIR) / "configs";

StudyConfig from_text(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

// small, fast flat study
StudyConfig small_flat() {
  StudyConfig c = from_text(R"cfg(
[study]
name = small
eps = 0.2, 0.1

[geometry]
F = "1 - y2^2"

[coefficients]
c = "1"
f = "1"

[mesh]
cell_n1 = 16
cell_n2 = 8
elements = 1024
profile_nodes = 5

[tests]
measure_phi = "1 - x1^2"
flux_phi = "1 + 0.5*x1"
psi = "1", "cos(2*pi*y1)"
)cfg");
  return c;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("thinhomog_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

} // namespace

TEST(Config, ParsesQuotedExpressionsAndLists) {
  const StudyConfig c = from_text(R"cfg(
[study]
eps = 0.3, 0.15 ,0.075
workers = 3
seed = 11

[geometry]
F = "1 + 0.5*cos(2*pi*y1) - abs(y2)"
L = 2
unit_core = true

[coefficients]
a11 = "2 + cos(2*pi*y1)"

[tests]
psi = "cos(2*pi*y1)", "1"
measure_phi = "exp(x1)"

[output]
dir = "some/where"
formats = json
)cfg");
  EXPECT_EQ(c.F, "1 + 0.5*cos(2*pi*y1) - abs(y2)");
  EXPECT_DOUBLE_EQ(c.L, 2.0);
  EXPECT_TRUE(c.unit_core);
  EXPECT_EQ(c.eps, (std::vector<double>{0.3, 0.15, 0.075}));
  EXPECT_EQ(c.workers, 3);
  EXPECT_EQ(c.seed, 11u);
  EXPECT_EQ(c.a11, "2 + cos(2*pi*y1)");
  EXPECT_EQ(c.a12, "0"); // default
  EXPECT_EQ(c.psi, (std::vector<std::string>{"cos(2*pi*y1)", "1"}));
  EXPECT_EQ(c.output_dir, "some/where");
  EXPECT_EQ(c.formats, std::vector<std::string>{"json"});
  EXPECT_TRUE(c.name.empty());

  EXPECT_EQ(detail::split_list(R"("a, b", c)"), (std::vector<std::string>{"a, b", "c"}));
}

TEST(Config, RejectsBadInput) {
  EXPECT_THROW(from_text("[geometry]\nL = 1\n"), ConfigError);                                   // no F
  EXPECT_THROW(from_text("[geometry]\nF = \"1 - y2^2\"\nwidth = 3\n"), ConfigError);            // unknown key
  EXPECT_THROW(from_text("[geometry]\nF = \"1 - y2^2\"\n[study]\neps = 0.1, 0.2\n"), ConfigError); // increasing
  EXPECT_THROW(from_text("[geometry]\nF = \"1 - y2^2\"\n[study]\neps = 0.1, x\n"), ConfigError);
  EXPECT_THROW(from_text("[geometry]\nF = \"1 - y2^2\"\n[mesh]\nn_s = 8.5\n"), ConfigError);
  EXPECT_THROW(from_text("[geometry]\nF = \"1 - y2^2\"\n[output]\nformats = xml\n"), ConfigError);
  EXPECT_THROW(from_text("stray = 1\n[geometry]\nF = \"1 - y2^2\"\n"), ConfigError);

  StudyConfig bad_expr = small_flat();
  bad_expr.a11 = "2 + (y1";
  EXPECT_THROW(build_problem(bad_expr), ConfigError);
  StudyConfig bad_psi = small_flat();
  bad_psi.psi = {"x1*cos(2*pi*y1)"};
  EXPECT_THROW(build_problem(bad_psi), ConfigError);
}

TEST(Config, ShippedConfigsLoadAndValidate) {
  int seen = 0;
  for (const auto& entry : fs::directory_iterator(kConfigs)) {
    if (entry.path().extension() != ".cfg") continue;
    ++seen;
    const StudyConfig c = load_config(entry.path());
    EXPECT_EQ(c.name, entry.path().stem().string());
    const Problem p = build_problem(c);
    const ValidationReport r = validate_problem(p, c);
    EXPECT_TRUE(r.ok()) << entry.path();
  }
  EXPECT_GE(seen, 5);
  EXPECT_THROW(load_config(kConfigs / "does_not_exist.cfg"), ConfigError);
}

TEST(Criteria, DecayRule) {
  using detail::decay;
  EXPECT_EQ(decay("m", {1.0, 0.5, 0.3, 0.2}, 4.0, 1.05, 0.0).status, "pass");
  EXPECT_EQ(decay("m", {1.0, 0.5, 0.3, 0.26}, 4.0, 1.05, 0.0).status, "fail");  // total factor
  EXPECT_EQ(decay("m", {1.0, 0.2, 0.21, 0.1}, 4.0, 1.05, 0.0).status, "pass");  // 5% growth allowed
  EXPECT_EQ(decay("m", {1.0, 0.2, 0.22, 0.1}, 4.0, 1.05, 0.0).status, "fail");
  EXPECT_EQ(decay("m", {1e-12, 3e-12, 2e-12}, 4.0, 1.05, 1e-10).status, "pass"); // noise level
  EXPECT_EQ(decay("m", {1.0, NAN}, 4.0, 1.05, 0.0).status, "fail");
  EXPECT_EQ(decay("m", {1.0}, 4.0, 1.05, 0.0).status, "skipped");

  using detail::rate;
  EXPECT_EQ(rate("g", {0.2, 0.1, 0.05}, {4.0, 2.0, 1.0}, 1.8, 0.0).status, "pass");
  EXPECT_EQ(rate("g", {0.2, 0.1, 0.05}, {4.0, 2.0, 1.2}, 1.8, 0.0).status, "fail");
  EXPECT_EQ(rate("g", {0.4, 0.1}, {4.0, 1.0}, 1.8, 0.0).status, "pass"); // two halvings need 3.24
  EXPECT_EQ(rate("g", {0.4, 0.1}, {3.0, 1.0}, 1.8, 0.0).status, "fail");
  EXPECT_EQ(rate("g", {0.2, 0.1}, {1e-15, 2e-15}, 1.8, 1e-10).status, "pass");
}

TEST(Study, EmptyEpsListGivesHeaderOnlyCsv) {
  StudyConfig c = small_flat();
  c.eps.clear();
  const StudyReport r = run_study(c);
  EXPECT_TRUE(r.rows.empty());
  EXPECT_EQ(to_csv(r), std::string(kCsvHeader) + "\n");
  for (const auto& crit : r.criteria) EXPECT_EQ(crit.status, "skipped") << crit.name;
}

TEST(Study, FlatRowsAtNoiseLevelAndFilesWritten) {
  StudyConfig c = small_flat();
  StudyTiming timing;
  const StudyReport r = run_study(c, &timing);
  ASSERT_EQ(r.rows.size(), 2u);
  for (const auto& row : r.rows) {
    ASSERT_TRUE(row.ok()) << row.error;
    EXPECT_LE(row.measure_gap, 1e-12);
    EXPECT_LE(row.l2_error, 1e-9);
    EXPECT_EQ(row.per_period, 16);
    EXPECT_EQ(row.n_s, 8);
    EXPECT_EQ(row.n1, static_cast<int>(std::lround(2.0 / row.eps * 16)));
    EXPECT_GT(row.iterations, 0u);
  }
  for (const auto& crit : r.criteria) EXPECT_TRUE(crit.passed()) << crit.name << ": " << crit.detail;
  EXPECT_GT(timing.total, 0.0);
  EXPECT_EQ(timing.per_eps.size(), 2u);

  const fs::path dir = scratch("flat");
  const auto files = emit(r, dir);
  EXPECT_EQ(files.size(), 2u + 1u + 5u);
  const std::string csv = slurp(dir / "small.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), kCsvHeader);
  const std::string dat = slurp(dir / "small_l2_error.dat");
  EXPECT_EQ(dat.substr(0, 12), "# eps l2_err");
  EXPECT_EQ(std::count(dat.begin(), dat.end(), '\n'), 3);
  fs::remove_all(dir);
}

TEST(Study, JsonRoundTripAndRecomputableFlags) {
  const StudyReport r = run_study(small_flat());
  const nlohmann::json j = to_json(r);
  const StudyReport back = report_from_json(nlohmann::json::parse(j.dump()));
  EXPECT_EQ(to_json(back), j);
  ASSERT_EQ(back.rows.size(), r.rows.size());
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    EXPECT_EQ(back.rows[i].l2_error, r.rows[i].l2_error);
    EXPECT_EQ(back.rows[i].flux_by_psi, r.rows[i].flux_by_psi);
  }
  EXPECT_EQ(back.config.thresholds, r.config.thresholds);
  // the flags follow from the rows and thresholds alone
  const auto again = evaluate_criteria(back.rows, back.config);
  ASSERT_EQ(again.size(), r.criteria.size());
  for (std::size_t i = 0; i < again.size(); ++i) {
    EXPECT_EQ(again[i].name, r.criteria[i].name);
    EXPECT_EQ(again[i].status, r.criteria[i].status);
  }
}

TEST(Study, DeterministicAcrossRunsAndWorkers) {
  StudyConfig c = small_flat();
  c.F = "1 + 0.5*cos(2*pi*y1) - abs(y2)";
  c.cell = {16, 8};
  const std::string first = to_json(run_study(c)).dump();
  EXPECT_EQ(to_json(run_study(c)).dump(), first);
  c.workers = 2;
  nlohmann::json j = to_json(run_study(c));
  j["metadata"]["config"]["workers"] = 1;
  EXPECT_EQ(j.dump(), first);
}

TEST(Study, FailedRowDoesNotAbortOthers) {
  StudyConfig c = small_flat();
  c.eps = {0.2, 0.1, 0.001};
  c.eps_mesh.dof_cap = 20'000;
  const StudyReport r = run_study(c);
  ASSERT_EQ(r.rows.size(), 3u);
  EXPECT_TRUE(r.rows[0].ok());
  EXPECT_TRUE(r.rows[1].ok());
  EXPECT_FALSE(r.rows[2].ok());
  EXPECT_NE(r.rows[2].error.find("cap"), std::string::npos);
  EXPECT_TRUE(std::isnan(r.rows[2].l2_error));
  EXPECT_EQ(r.criterion("l2_error").status, "fail");
  EXPECT_FALSE(r.passed());
  // failed values serialize as nan (CSV) / null (JSON) and survive the round trip
  EXPECT_NE(to_csv(r).find("0.001,"), std::string::npos);
  EXPECT_EQ(to_json(report_from_json(to_json(r))), to_json(r));
}

TEST(Study, ValidationRunsBeforeAnySolve) {
  StudyConfig c = small_flat();
  c.a12 = "2"; // indefinite tensor
  EXPECT_THROW(run_study(c), ValidationFailure);
}

TEST(Study, LayeredEffectiveColumnIsHarmonicMean) {
  StudyConfig c = load_config(kConfigs / "layered.cfg");
  c.eps = {0.2};
  const StudyReport r = run_study(c);
  ASSERT_FALSE(r.effective.empty());
  for (const auto& e : r.effective) {
    EXPECT_NEAR(e.a_eff / (std::sqrt(3.0) * e.box_measure), 1.0, 1e-3);
    EXPECT_NEAR(e.box_measure, 1.0, 1e-9);
  }
}
