#pragma once
// Bilinear (Q1) isoparametric elements with 2 x 2 Gauss quadrature.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "thinhomog/error.hpp"
#include "thinhomog/fem/mesh.hpp"
#include "thinhomog/fem/sparse.hpp"
#include "thinhomog/linalg.hpp"

namespace thinhomog::fem {

/// Everything known at one quadrature point of one element.
struct QuadPoint {
  int ei = 0;
  int ej = 0;
  std::array<std::size_t, 4> nodes{};
  Vec2 ref{};    ///< reference coordinates (t, s)
  Vec2 x{};      ///< physical coordinates
  double weight = 0.0; ///< Gauss weight times det J
  double det = 0.0;
  std::array<double, 4> shape{};
  std::array<Vec2, 4> grad{}; ///< physical gradients of the shape functions
};

namespace detail {

inline constexpr std::array<double, 2> kGauss2{0.5 - 0.5 / 1.7320508075688772, 0.5 + 0.5 / 1.7320508075688772};

inline void fill_shape(double xi, double eta, std::array<double, 4>& N, std::array<Vec2, 4>& dN) {
  N = {(1 - xi) * (1 - eta), xi * (1 - eta), xi * eta, (1 - xi) * eta};
  dN = {Vec2{-(1 - eta), -(1 - xi)}, Vec2{(1 - eta), -xi}, Vec2{eta, xi}, Vec2{-eta, (1 - xi)}};
}

// Evaluates shape data at local (xi, eta) in [0, 1]^2 of element (ei, ej).
inline QuadPoint local_point(const MappedMesh& mm, int ei, int ej, double xi, double eta, double gauss_weight) {
  const Mesh& m = mm.mesh;
  QuadPoint q;
  q.ei = ei;
  q.ej = ej;
  q.nodes = m.element_nodes(ei, ej);
  std::array<Vec2, 4> dN{};
  fill_shape(xi, eta, q.shape, dN);
  Mat2 J{}; // d(x)/d(xi, eta)
  q.x = {0.0, 0.0};
  for (int a = 0; a < 4; ++a) {
    const Vec2& p = mm.coords[q.nodes[static_cast<std::size_t>(a)]];
    const double Na = q.shape[static_cast<std::size_t>(a)];
    q.x[0] += Na * p[0];
    q.x[1] += Na * p[1];
    J.m11 += p[0] * dN[static_cast<std::size_t>(a)][0];
    J.m12 += p[0] * dN[static_cast<std::size_t>(a)][1];
    J.m21 += p[1] * dN[static_cast<std::size_t>(a)][0];
    J.m22 += p[1] * dN[static_cast<std::size_t>(a)][1];
  }
  q.det = J.det();
  if (!(q.det > 0.0)) {
    throw DegenerateMap("element (" + std::to_string(ei) + ", " + std::to_string(ej) + ") has det J <= 0");
  }
  const Mat2 JinvT = J.inverse().transpose();
  for (std::size_t a = 0; a < 4; ++a) q.grad[a] = JinvT * dN[a];
  q.weight = gauss_weight * q.det;
  q.ref = {m.t(ei) + xi * m.h1(), m.s(ej) + eta * m.h2()};
  return q;
}

} // namespace detail

/// Calls f(q) for all 4 Gauss points of every element.
template <class F>
void for_each_quad_point(const MappedMesh& mm, F&& f) {
  const Mesh& m = mm.mesh;
  for (int ej = 0; ej < m.n2; ++ej) {
    for (int ei = 0; ei < m.n1; ++ei) {
      for (double eta : detail::kGauss2) {
        for (double xi : detail::kGauss2) f(detail::local_point(mm, ei, ej, xi, eta, 0.25));
      }
    }
  }
}

/// Diffusion tensor and reaction coefficient at a quadrature point.
struct Material {
  Mat2 a = Mat2::identity();
  double c = 0.0;
};

/// Right-hand side density: contributes f v + g . grad v.
struct Load {
  double f = 0.0;
  Vec2 g{0.0, 0.0};
};

using MaterialFn = std::function<Material(const QuadPoint&)>;
using LoadFn = std::function<Load(const QuadPoint&)>;

inline void check_material(const Material& mat, const QuadPoint& q) {
  const double asym = std::fabs(mat.a.m12 - mat.a.m21);
  const double scale = mat.a.max_abs();
  if (asym > 1e-12 * (1.0 + scale)) throw NonSPD("diffusion tensor is not symmetric at x = (" +
                                                 std::to_string(q.x[0]) + ", " + std::to_string(q.x[1]) + ")");
  if (!(symmetric_eigenvalues(mat.a)[0] > 0.0)) {
    throw NonSPD("diffusion tensor has a non-positive eigenvalue at x = (" + std::to_string(q.x[0]) + ", " +
                 std::to_string(q.x[1]) + ")");
  }
  if (mat.c < 0.0) throw NonSPD("negative reaction coefficient");
}

inline CsrMatrix assemble_matrix(const MappedMesh& mm, const MaterialFn& material) {
  std::vector<Triplet> trip;
  trip.reserve(mm.mesh.num_elements() * 16);
  std::array<double, 16> ke{};
  int last_ei = -1, last_ej = -1;
  std::array<std::size_t, 4> nodes{};
  auto flush = [&] {
    if (last_ei < 0) return;
    for (std::size_t a = 0; a < 4; ++a) {
      for (std::size_t b = 0; b < 4; ++b) trip.push_back({nodes[a], nodes[b], ke[4 * a + b]});
    }
  };
  for_each_quad_point(mm, [&](const QuadPoint& q) {
    if (q.ei != last_ei || q.ej != last_ej) {
      flush();
      ke.fill(0.0);
      last_ei = q.ei;
      last_ej = q.ej;
      nodes = q.nodes;
    }
    const Material mat = material(q);
    check_material(mat, q);
    for (std::size_t a = 0; a < 4; ++a) {
      const Vec2 flux = mat.a * q.grad[a];
      for (std::size_t b = 0; b < 4; ++b) {
        ke[4 * a + b] += q.weight * (dot(flux, q.grad[b]) + mat.c * q.shape[a] * q.shape[b]);
      }
    }
  });
  flush();
  return CsrMatrix::from_triplets(mm.mesh.num_grid_nodes(), std::move(trip));
}

inline std::vector<double> assemble_load(const MappedMesh& mm, const LoadFn& load) {
  std::vector<double> rhs(mm.mesh.num_grid_nodes(), 0.0);
  for_each_quad_point(mm, [&](const QuadPoint& q) {
    const Load l = load(q);
    for (std::size_t a = 0; a < 4; ++a) rhs[q.nodes[a]] += q.weight * (l.f * q.shape[a] + dot(l.g, q.grad[a]));
  });
  return rhs;
}

/// Row sums of the consistent mass matrix: integral of each shape function.
inline std::vector<double> lumped_mass(const MappedMesh& mm) {
  std::vector<double> m(mm.mesh.num_grid_nodes(), 0.0);
  for_each_quad_point(mm, [&](const QuadPoint& q) {
    for (std::size_t a = 0; a < 4; ++a) m[q.nodes[a]] += q.weight * q.shape[a];
  });
  return m;
}

struct AssembledSystem {
  CsrMatrix matrix;
  std::vector<double> rhs;
  std::vector<double> mass; ///< lumped mass, used by zero-mean constraints
};

inline AssembledSystem assemble(const MappedMesh& mm, const MaterialFn& material,
                                const std::function<double(const QuadPoint&)>& source) {
  return {assemble_matrix(mm, material),
          assemble_load(mm, [&](const QuadPoint& q) { return Load{source(q), {0.0, 0.0}}; }), lumped_mass(mm)};
}

// ---- fields -----------------------------------------------------------------

struct FieldValue {
  double value = 0.0;
  Vec2 grad{0.0, 0.0};
};

inline FieldValue field_at(const QuadPoint& q, const std::vector<double>& field) {
  FieldValue out;
  for (std::size_t a = 0; a < 4; ++a) {
    const double u = field[q.nodes[a]];
    out.value += u * q.shape[a];
    out.grad[0] += u * q.grad[a][0];
    out.grad[1] += u * q.grad[a][1];
  }
  return out;
}

/// Value and physical gradient at reference coordinates (t, s).
inline FieldValue evaluate_field(const MappedMesh& mm, const std::vector<double>& field, double t, double s) {
  const Mesh& m = mm.mesh;
  const double ft = (t - m.a1) / m.h1();
  const double fs = s / m.h2();
  const int ei = std::clamp(static_cast<int>(std::floor(ft)), 0, m.n1 - 1);
  const int ej = std::clamp(static_cast<int>(std::floor(fs)), 0, m.n2 - 1);
  const QuadPoint q = detail::local_point(mm, ei, ej, ft - ei, fs - ej, 0.0);
  return field_at(q, field);
}

struct FieldNorms {
  double l2_weighted = 0.0;
  double h1_semi = 0.0;
};

/// L2 norm and H1 seminorm; `weight` scales the measure (1/eps for mu_eps).
inline FieldNorms norms(const MappedMesh& mm, const std::vector<double>& field, double weight = 1.0) {
  double l2 = 0.0;
  double h1 = 0.0;
  for_each_quad_point(mm, [&](const QuadPoint& q) {
    const FieldValue v = field_at(q, field);
    l2 += q.weight * v.value * v.value;
    h1 += q.weight * dot(v.grad, v.grad);
  });
  return {std::sqrt(weight * l2), std::sqrt(weight * h1)};
}

} // namespace thinhomog::fem
