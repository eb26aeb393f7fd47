#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace thinhomog {

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  std::size_t size() const { return nodes.size(); }
};

/// n-point Gauss-Legendre rule on [a, b] (Newton on the three-term recurrence).
inline QuadratureRule gauss_legendre(int n, double a = -1.0, double b = 1.0) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: n must be positive");
  QuadratureRule rule;
  rule.nodes.resize(static_cast<std::size_t>(n));
  rule.weights.resize(static_cast<std::size_t>(n));
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = 0.0;
      for (int k = 1; k <= n; ++k) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::fabs(dz) < 1e-16) break;
    }
    // recompute derivative at the converged node
    double p0 = 1.0;
    double p1 = 0.0;
    for (int k = 1; k <= n; ++k) {
      const double p2 = p1;
      p1 = p0;
      p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
    }
    dp = n * (z * p0 - p1) / (z * z - 1.0);
    const double w = 2.0 / ((1.0 - z * z) * dp * dp);
    const auto lo = static_cast<std::size_t>(i);
    const auto hi = static_cast<std::size_t>(n - 1 - i);
    rule.nodes[lo] = mid - half * z;
    rule.nodes[hi] = mid + half * z;
    rule.weights[lo] = half * w;
    rule.weights[hi] = half * w;
  }
  return rule;
}

/// Composite Gauss-Legendre over the panels delimited by `breaks` (sorted).
inline QuadratureRule composite_gauss(const std::vector<double>& breaks, int points_per_panel) {
  QuadratureRule out;
  const QuadratureRule ref = gauss_legendre(points_per_panel, 0.0, 1.0);
  for (std::size_t p = 0; p + 1 < breaks.size(); ++p) {
    const double a = breaks[p];
    const double len = breaks[p + 1] - a;
    if (len <= 0.0) continue;
    for (std::size_t k = 0; k < ref.size(); ++k) {
      out.nodes.push_back(a + len * ref.nodes[k]);
      out.weights.push_back(len * ref.weights[k]);
    }
  }
  return out;
}

/// Composite Gauss-Legendre with `panels` equal panels on [a, b].
inline QuadratureRule composite_gauss(double a, double b, int panels, int points_per_panel) {
  std::vector<double> breaks(static_cast<std::size_t>(panels) + 1);
  for (int i = 0; i <= panels; ++i) breaks[static_cast<std::size_t>(i)] = a + (b - a) * i / panels;
  breaks.back() = b;
  return composite_gauss(breaks, points_per_panel);
}

} // namespace thinhomog
