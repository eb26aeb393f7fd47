#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "corpus.hpp"
#include "oracles.hpp"
#include "thinhomog/geometry.hpp"

using namespace thinhomog;

namespace {

GeometryModel model(const std::string& F, double L = 1.0) { return GeometryModel::make(parse(F), L); }

const double kPi = std::numbers::pi;

} // namespace

TEST(CrossSection, FlatModel) {
  const auto m = model("1 - y2^2");
  for (double x1 : {-1.0, 0.0, 0.7}) {
    for (double y1 : {0.0, 0.3}) {
      const CrossSection cs = cross_section(m, x1, y1);
      EXPECT_NEAR(cs.g_minus, -1.0, 1e-12);
      EXPECT_NEAR(cs.g_plus, 1.0, 1e-12);
      EXPECT_NEAR(cs.thickness(), 2.0, 1e-12);
    }
  }
}

TEST(CrossSection, CorrugatedAtOrigin) {
  const auto m = model(corpus::kCorrugatedF);
  const CrossSection cs = cross_section(m, 0.0, 0.0);
  // independent bisection oracle on the same function
  const double root = oracle::bisect([](double y) { return 2.0 - 1.5 * y * y; }, 0.0, 3.0);
  EXPECT_NEAR(root, std::sqrt(4.0 / 3.0), 1e-14);
  EXPECT_NEAR(cs.g_plus, root, 1e-11);
  EXPECT_NEAR(cs.g_minus, -root, 1e-11);
}

TEST(CrossSection, Errors) {
  EXPECT_THROW(cross_section(model("-1 - y2^2"), 0.0, 0.0), EmptySection);
  EXPECT_THROW(cross_section(model("cos(2*y2)"), 0.0, 0.0), MultiComponent);
  // positive everywhere: not contained in the bracket
  EXPECT_THROW(cross_section(model("1 + y2^2"), 0.0, 0.0), EmptySection);
}

TEST(CrossSection, RootsSatisfyToleranceOnCorpus) {
  for (const std::string& F : {corpus::kCorrugatedF, std::string("1 - y2^2"), std::string("1 + 0.5*cos(2*pi*y1) - abs(y2)"),
                              std::string("1 + 0.3*sin(2*pi*y1) - (y2 - 0.2*cos(2*pi*y1))^2")}) {
    const auto m = model(F);
    for (double x1 : {-0.9, -0.2, 0.4}) {
      for (double y1 : {0.0, 0.17, 0.5, 0.81}) {
        const CrossSection cs = cross_section(m, x1, y1);
        EXPECT_LE(std::fabs(m(x1, y1, cs.g_minus)), m.root_tol) << F;
        EXPECT_LE(std::fabs(m(x1, y1, cs.g_plus)), m.root_tol) << F;
      }
    }
  }
}

TEST(CellGeometry, FlatAndOscillatingWidth) {
  EXPECT_NEAR(cell_geometry(model("1 - y2^2"), 0.4, 16).box_measure, 2.0, 1e-12);
  const CellGeometry g = cell_geometry(model("1 + 0.5*cos(2*pi*y1) - abs(y2)"), 0.0, 64);
  EXPECT_NEAR(g.box_measure, 2.0, 1e-10);
  EXPECT_NEAR(g.thickness_at_0, 3.0, 1e-11);
  EXPECT_NEAR(g.thickness_at_0, g.thickness_at_1, g.model.root_tol);
}

TEST(CellGeometry, CorrugatedBoxMeasureMatchesOracle) {
  const double x1 = 0.3;
  const double s = 2.0 + std::sin(2.0 * kPi * x1);
  const double expected =
      oracle::periodic_trapezoid([&](double t) { return 2.0 * std::sqrt(s / (1.0 + 0.5 * std::cos(2.0 * kPi * t))); }, 4096);
  const CellGeometry g = cell_geometry(model(corpus::kCorrugatedF), x1, 512);
  EXPECT_NEAR(g.box_measure, expected, 1e-10 * expected);
}

TEST(CellGeometry, QuadratureConverges) {
  for (const std::string& F : {corpus::kCorrugatedF, std::string("1 + 0.3*sin(2*pi*y1) - (y2 - 0.2*cos(2*pi*y1))^2")}) {
    const auto m = model(F);
    const double a = cell_geometry(m, 0.1, 64).box_measure;
    const double b = cell_geometry(m, 0.1, 128).box_measure;
    EXPECT_LE(std::fabs(a - b), 1e-8 * std::fabs(b)) << F;
  }
}

TEST(Validate, FlatPassesEverything) {
  auto m = GeometryModel::make(parse("1 - y2^2"), 1.0, 4.0, 1e-10, true);
  const ValidationReport r = validate(m, 8);
  EXPECT_TRUE(r.ok());
  for (const auto& c : r.conditions) EXPECT_TRUE(c.passed) << c.name << ": " << c.detail;
}

TEST(Validate, DoubleRootFailsF2) {
  const ValidationReport r = validate(model("(1 - y2^2)^2"), 8);
  EXPECT_FALSE(r.get("F2").passed) << r.get("F2").detail;
  EXPECT_TRUE(r.get("F1").passed);
}

TEST(Validate, NonPeriodicFailsF1) {
  const ValidationReport r = validate(model("1 - y1/2 - y2^2"), 8);
  EXPECT_FALSE(r.get("F1").passed);
  EXPECT_TRUE(r.get("F2").passed) << r.get("F2").detail;
}

TEST(Validate, CorrugatedPassesWithOpenEnds) {
  const ValidationReport r = validate(model(corpus::kCorrugatedF), 10);
  EXPECT_TRUE(r.ok());
  EXPECT_NE(r.get("F3").detail.find("nonempty"), std::string::npos);
}

TEST(Validate, UnitCoreDeclarationChecked) {
  auto m = GeometryModel::make(parse(corpus::kCorrugatedF), 1.0, 4.0, 1e-10, true);
  EXPECT_FALSE(validate(m, 8).get("F3").passed);
}

TEST(ReferenceMap, ThinFlatIsAffine) {
  const auto m = model("1 - y2^2");
  const double eps = 0.1;
  const ReferenceMap map = reference_map_thin(m, eps);
  for (double x1 : {-0.8, 0.0, 0.33}) {
    for (double s : {0.0, 0.5, 1.0}) {
      EXPECT_NEAR(map.det(x1, s), 2.0 * eps, 1e-12);
      const Vec2 p = map.map(x1, s);
      EXPECT_NEAR(p[1], eps * (-1.0 + 2.0 * s), 1e-12);
    }
  }
}

TEST(ReferenceMap, CellDeterminantIsThickness) {
  const ReferenceMap map = reference_map_cell(model("1 + 0.5*cos(2*pi*y1) - abs(y2)"), 0.0);
  EXPECT_NEAR(map.det(0.0, 0.3), 3.0, 1e-11);
  EXPECT_NEAR(map.det(0.5, 0.7), 1.0, 1e-11);
}

TEST(ReferenceMap, ThinJacobianMatchesFiniteDifferences) {
  const auto m = model(corpus::kCorrugatedF);
  const double eps = 0.05;
  const ReferenceMap map = reference_map_thin(m, eps);
  for (double x1 : {-0.61, -0.07, 0.23, 0.58}) {
    for (double s : {0.1, 0.5, 0.9}) {
      const Mat2 J = map.jacobian(x1, s);
      const double h = 1e-6;
      const Vec2 px = map.map(x1 + h, s);
      const Vec2 mx = map.map(x1 - h, s);
      const Vec2 ps = map.map(x1, s + h);
      const Vec2 ms = map.map(x1, s - h);
      const double fd_t = (px[1] - mx[1]) / (2 * h);
      const double fd_s = (ps[1] - ms[1]) / (2 * h);
      EXPECT_NEAR(J.m21, fd_t, 1e-6 * std::max(1.0, std::fabs(fd_t)));
      EXPECT_NEAR(J.m22, fd_s, 1e-6 * std::max(1.0, std::fabs(fd_s)));
      // scaling identity: thin thickness equals eps * cell thickness at y1 = x1 / eps
      EXPECT_NEAR(map.column(x1).thickness, eps * cross_section(m, x1, x1 / eps).thickness(), 1e-15);
    }
  }
}
