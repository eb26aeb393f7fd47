#pragma once
// Structured n1 x n2 quadrilateral grid on [a1, b1] x [0, 1]. Nodes are
// numbered row by row, node(i, j) = j * (n1 + 1) + i. A periodic mesh keeps
// every grid node (the right column has its own coordinates after mapping)
// and reports the (left, right) pairs that are glued together.

#include <array>
#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "thinhomog/error.hpp"
#include "thinhomog/geometry.hpp"
#include "thinhomog/linalg.hpp"

namespace thinhomog::fem {

struct Mesh {
  double a1 = 0.0;
  double b1 = 1.0;
  int n1 = 0;
  int n2 = 0;
  bool periodic_in_dir1 = false;

  double h1() const { return (b1 - a1) / n1; }
  double h2() const { return 1.0 / n2; }

  std::size_t num_grid_nodes() const { return static_cast<std::size_t>(n1 + 1) * static_cast<std::size_t>(n2 + 1); }
  std::size_t num_independent_nodes() const {
    return static_cast<std::size_t>(n1 + 1 - (periodic_in_dir1 ? 1 : 0)) * static_cast<std::size_t>(n2 + 1);
  }
  std::size_t num_elements() const { return static_cast<std::size_t>(n1) * static_cast<std::size_t>(n2); }

  std::size_t node(int i, int j) const {
    return static_cast<std::size_t>(j) * static_cast<std::size_t>(n1 + 1) + static_cast<std::size_t>(i);
  }
  int node_i(std::size_t node) const { return static_cast<int>(node % static_cast<std::size_t>(n1 + 1)); }
  int node_j(std::size_t node) const { return static_cast<int>(node / static_cast<std::size_t>(n1 + 1)); }

  double t(int i) const { return i == n1 ? b1 : a1 + (b1 - a1) * i / n1; }
  double s(int j) const { return static_cast<double>(j) / n2; }

  /// Counter-clockwise: (i, j), (i+1, j), (i+1, j+1), (i, j+1).
  std::array<std::size_t, 4> element_nodes(int ei, int ej) const {
    return {node(ei, ej), node(ei + 1, ej), node(ei + 1, ej + 1), node(ei, ej + 1)};
  }

  /// (master, slave) pairs glued by periodicity in direction 1.
  std::vector<std::pair<std::size_t, std::size_t>> periodic_pairs() const {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    if (!periodic_in_dir1) return out;
    for (int j = 0; j <= n2; ++j) out.emplace_back(node(0, j), node(n1, j));
    return out;
  }

  std::vector<std::size_t> column_nodes(int i) const {
    std::vector<std::size_t> out;
    for (int j = 0; j <= n2; ++j) out.push_back(node(i, j));
    return out;
  }
};

inline Mesh build_mesh(double a1, double b1, int n1, int n2, bool periodic_in_dir1) {
  if (n1 < 2 || n2 < 2) throw Error("build_mesh needs n1, n2 >= 2");
  if (!(b1 > a1)) throw Error("build_mesh needs b1 > a1");
  return Mesh{a1, b1, n1, n2, periodic_in_dir1};
}

/// Mesh plus physical node coordinates (isoparametric Q1 geometry).
struct MappedMesh {
  Mesh mesh;
  std::vector<Vec2> coords;
};

inline MappedMesh map_mesh(const Mesh& mesh, const std::function<Vec2(double, double)>& to_physical) {
  MappedMesh out{mesh, std::vector<Vec2>(mesh.num_grid_nodes())};
  for (int j = 0; j <= mesh.n2; ++j) {
    for (int i = 0; i <= mesh.n1; ++i) out.coords[mesh.node(i, j)] = to_physical(mesh.t(i), mesh.s(j));
  }
  return out;
}

/// Identity geometry: physical = reference.
inline MappedMesh map_mesh(const Mesh& mesh) {
  return map_mesh(mesh, [](double t, double s) { return Vec2{t, s}; });
}

/// Places the nodes with a boundary-fitted map, one column evaluation per i.
inline MappedMesh map_mesh(const Mesh& mesh, const ReferenceMap& map) {
  MappedMesh out{mesh, std::vector<Vec2>(mesh.num_grid_nodes())};
  for (int i = 0; i <= mesh.n1; ++i) {
    const double t = mesh.t(i);
    const Column c = map.column(t);
    if (!(c.thickness > 0.0)) throw DegenerateMap("non-positive thickness at t = " + std::to_string(t));
    for (int j = 0; j <= mesh.n2; ++j) out.coords[mesh.node(i, j)] = {t, c.lower + mesh.s(j) * c.thickness};
  }
  return out;
}

} // namespace thinhomog::fem
