#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include "thinhomog/cli.hpp"

using namespace thinhomog;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = fs::path(THINHOMOG_SOURCE_DIR) / "configs";

struct CliRun {
  int code = -1;
  std::string out;
  std::string err;
};

CliRun cli(std::initializer_list<std::string> args) {
  std::vector<std::string> storage{"thinhomog"};
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& s : storage) argv.push_back(s.c_str());
  std::ostringstream out, err;
  CliRun r;
  r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

fs::path write_config(const std::string& name, const std::string& text) {
  const fs::path p = fs::temp_directory_path() / ("thinhomog_cli_" + name + ".cfg");
  std::ofstream(p) << text;
  return p;
}

const std::string kFlat = (kConfigs / "flat.cfg").string();

} // namespace

TEST(Cli, UsageErrors) {
  EXPECT_EQ(cli({}).code, kExitUsage);
  EXPECT_EQ(cli({"validate"}).code, kExitUsage);
  EXPECT_EQ(cli({"validate", "--config", "/nonexistent/flat.cfg"}).code, kExitUsage);
  EXPECT_EQ(cli({"frobnicate", "--config", kFlat}).code, kExitUsage);
  EXPECT_EQ(cli({"cell", "--config", kFlat}).code, kExitUsage); // --x1 missing
  EXPECT_EQ(cli({"solve-eps", "--config", kFlat, "--eps", "-1"}).code, kExitUsage);
  const CliRun help = cli({"--help"});
  EXPECT_EQ(help.code, kExitOk);
  EXPECT_NE(help.out.find("solve-eps"), std::string::npos);
}

TEST(Cli, ValidateExitCodes) {
  const CliRun ok = cli({"validate", "--config", kFlat});
  EXPECT_EQ(ok.code, kExitOk) << ok.err;
  EXPECT_NE(ok.out.find("H2"), std::string::npos);

  const fs::path bad = write_config("indefinite", "[geometry]\nF = \"1 - y2^2\"\n[coefficients]\na12 = \"2\"\n");
  const CliRun r = cli({"validate", "--config", bad.string()});
  EXPECT_EQ(r.code, kExitValidation);
  EXPECT_NE(r.out.find("FAIL H2"), std::string::npos);
  EXPECT_EQ(cli({"cell", "--config", bad.string(), "--x1", "0"}).code, kExitValidation);

  const fs::path malformed = write_config("malformed", "[geometry]\nF = \"1 - y2^2\"\n[study]\neps = 0.1, 0.2\n");
  EXPECT_EQ(cli({"validate", "--config", malformed.string()}).code, kExitValidation);
  fs::remove(bad);
  fs::remove(malformed);
}

TEST(Cli, CellPrintsCoefficients) {
  const CliRun r = cli({"cell", "--config", kFlat, "--x1", "0.25"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_NEAR(j["a_eff"].get<double>(), 2.0, 1e-10);
  EXPECT_NEAR(j["box_measure"].get<double>(), 2.0, 1e-10);
  EXPECT_EQ(cli({"cell", "--config", kFlat, "--x1", "3"}).code, kExitSolver); // outside [-L, L]
}

TEST(Cli, EffectiveAndSolveEps) {
  const fs::path dir = fs::temp_directory_path() / "thinhomog_cli_out";
  fs::remove_all(dir);
  const CliRun e = cli({"effective", "--config", kFlat, "--elements", "16", "--profile-interp", "0"});
  ASSERT_EQ(e.code, kExitOk) << e.err;
  EXPECT_EQ(std::count(e.out.begin(), e.out.end(), '\n'), 18);

  const CliRun s = cli({"solve-eps", "--config", kFlat, "--eps", "0.25", "--out", dir.string()});
  ASSERT_EQ(s.code, kExitOk) << s.err;
  EXPECT_TRUE(fs::exists(dir / "flat_eps_0.25.csv"));
  EXPECT_TRUE(fs::exists(dir / "flat_eps_0.25.json"));
  EXPECT_GT(nlohmann::json::parse(s.out)["dofs"].get<int>(), 0);

  const fs::path capped = write_config("capped", "[geometry]\nF = \"1 - y2^2\"\n[mesh]\ndof_cap = 1000\n");
  EXPECT_EQ(cli({"solve-eps", "--config", capped.string(), "--eps", "0.01", "--out", dir.string()}).code, kExitSolver);
  fs::remove(capped);
  fs::remove_all(dir);
}

TEST(Cli, VerifyMeasure) {
  const CliRun r = cli({"verify-measure", "--config", kFlat});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(r.out.substr(0, r.out.find('\n')), "phi,eps,mu_eps,mu_star,gap");
}

TEST(Cli, StudyOnLayeredWritesReport) {
  const fs::path dir = fs::temp_directory_path() / "thinhomog_cli_layered";
  fs::remove_all(dir);
  const fs::path cfg = write_config("layered_short", R"cfg([study]
name = layered
eps = 0.2, 0.1

[geometry]
F = "0.25 - y2^2"

[coefficients]
a11 = "2 + cos(2*pi*y1)"
a22 = "2 + cos(2*pi*y1)"
c = "1"

[mesh]
cell_n1 = 16
cell_n2 = 8
profile_nodes = 5
)cfg");
  const CliRun r = cli({"study", "--config", cfg.string(), "--out", dir.string()});
  EXPECT_EQ(r.code, kExitOk) << r.err;
  for (const char* f : {"layered.csv", "layered.json", "layered_effective.csv", "layered_l2_error.dat"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  std::ifstream in(dir / "layered.json");
  const auto j = nlohmann::json::parse(in);
  EXPECT_EQ(j["rows"].size(), 2u);
  fs::remove(cfg);
  fs::remove_all(dir);
}
