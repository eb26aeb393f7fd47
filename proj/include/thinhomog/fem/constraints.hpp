#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "thinhomog/error.hpp"
#include "thinhomog/fem/sparse.hpp"

namespace thinhomog::fem {

/// Periodic (master, slave) pairs, Dirichlet values, and an optional
/// zero-mean condition with weights sum_i w_i u_i = 0.
struct ConstraintSet {
  std::vector<std::pair<std::size_t, std::size_t>> periodic;
  std::vector<std::pair<std::size_t, double>> dirichlet;
  bool zero_mean = false;
  std::vector<double> mean_weights; ///< full-size; the lumped mass for integral means
};

/// System on the independent unknowns. Slave rows are folded into their
/// masters and Dirichlet unknowns are eliminated with a right-hand-side lift.
struct ReducedSystem {
  CsrMatrix matrix;
  std::vector<double> rhs;
  std::vector<std::ptrdiff_t> full_to_reduced; ///< -1 for Dirichlet nodes
  std::vector<double> dirichlet_value;          ///< full-size
  std::vector<double> lift;                     ///< reduced, A_{free,D} g
  std::vector<double> mean_weights;             ///< reduced; empty unless zero_mean

  bool zero_mean() const { return !mean_weights.empty(); }
  std::size_t size() const { return matrix.n; }

  /// Folds a full-size load vector and subtracts the Dirichlet lift.
  std::vector<double> reduce_rhs(const std::vector<double>& full) const {
    std::vector<double> out(matrix.n, 0.0);
    for (std::size_t i = 0; i < full.size(); ++i) {
      const std::ptrdiff_t r = full_to_reduced[i];
      if (r >= 0) out[static_cast<std::size_t>(r)] += full[i];
    }
    for (std::size_t r = 0; r < out.size(); ++r) out[r] -= lift[r];
    return out;
  }

  std::vector<double> expand(const std::vector<double>& reduced) const {
    std::vector<double> out(full_to_reduced.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
      const std::ptrdiff_t r = full_to_reduced[i];
      out[i] = r >= 0 ? reduced[static_cast<std::size_t>(r)] : dirichlet_value[i];
    }
    return out;
  }

  /// [[A, w], [w^T, 0]] for the zero-mean case.
  CsrMatrix bordered() const {
    if (!zero_mean()) throw Error("bordered() needs a zero-mean constraint");
    std::vector<Triplet> t;
    for (std::size_t r = 0; r < matrix.n; ++r) {
      for (std::size_t k = matrix.row_ptr[r]; k < matrix.row_ptr[r + 1]; ++k) t.push_back({r, matrix.col[k], matrix.val[k]});
      t.push_back({r, matrix.n, mean_weights[r]});
      t.push_back({matrix.n, r, mean_weights[r]});
    }
    return CsrMatrix::from_triplets(matrix.n + 1, std::move(t));
  }
};

inline ReducedSystem constrain(const CsrMatrix& A, const std::vector<double>& b, const ConstraintSet& cs) {
  const std::size_t n = A.n;
  if (b.size() != n) throw Error("constrain: rhs size mismatch");
  enum class Kind { free, master, slave, dirichlet };
  std::vector<Kind> kind(n, Kind::free);
  std::vector<std::size_t> master_of(n);
  for (std::size_t i = 0; i < n; ++i) master_of[i] = i;

  ReducedSystem out;
  out.dirichlet_value.assign(n, 0.0);

  for (const auto& [node, value] : cs.dirichlet) {
    if (node >= n) throw ConflictingConstraints("Dirichlet node out of range");
    if (kind[node] == Kind::dirichlet && out.dirichlet_value[node] != value) {
      throw ConflictingConstraints("node " + std::to_string(node) + " has two Dirichlet values");
    }
    kind[node] = Kind::dirichlet;
    out.dirichlet_value[node] = value;
  }
  for (const auto& [master, slave] : cs.periodic) {
    if (master >= n || slave >= n || master == slave) throw ConflictingConstraints("invalid periodic pair");
    // a glued corner pinned on both sides is consistent when the values agree
    if (kind[master] == Kind::dirichlet && kind[slave] == Kind::dirichlet &&
        std::fabs(out.dirichlet_value[master] - out.dirichlet_value[slave]) <=
            1e-12 * (1.0 + std::fabs(out.dirichlet_value[master]))) {
      continue;
    }
    if (kind[master] == Kind::dirichlet || kind[slave] == Kind::dirichlet) {
      throw ConflictingConstraints("node " + std::to_string(kind[master] == Kind::dirichlet ? master : slave) +
                                   " is both periodic and Dirichlet");
    }
    if (kind[slave] != Kind::free || kind[master] == Kind::slave) {
      throw ConflictingConstraints("node " + std::to_string(slave) + " appears in more than one periodic pair");
    }
    kind[master] = Kind::master;
    kind[slave] = Kind::slave;
    master_of[slave] = master;
  }
  if (cs.zero_mean) {
    if (!cs.dirichlet.empty()) throw ConflictingConstraints("zero-mean and Dirichlet constraints together");
    if (cs.mean_weights.size() != n) throw ConflictingConstraints("zero-mean weights have the wrong size");
  }

  out.full_to_reduced.assign(n, -1);
  std::ptrdiff_t next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (kind[i] == Kind::free || kind[i] == Kind::master) out.full_to_reduced[i] = next++;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (kind[i] == Kind::slave) out.full_to_reduced[i] = out.full_to_reduced[master_of[i]];
  }
  const auto m = static_cast<std::size_t>(next);

  std::vector<Triplet> t;
  t.reserve(A.nonzeros());
  out.lift.assign(m, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::ptrdiff_t ri = out.full_to_reduced[i];
    if (ri < 0) continue;
    for (std::size_t k = A.row_ptr[i]; k < A.row_ptr[i + 1]; ++k) {
      const std::size_t j = A.col[k];
      const std::ptrdiff_t rj = out.full_to_reduced[j];
      if (rj >= 0) {
        t.push_back({static_cast<std::size_t>(ri), static_cast<std::size_t>(rj), A.val[k]});
      } else {
        out.lift[static_cast<std::size_t>(ri)] += A.val[k] * out.dirichlet_value[j];
      }
    }
  }
  out.matrix = CsrMatrix::from_triplets(m, std::move(t));
  if (cs.zero_mean) {
    out.mean_weights.assign(m, 0.0);
    for (std::size_t i = 0; i < n; ++i) out.mean_weights[static_cast<std::size_t>(out.full_to_reduced[i])] += cs.mean_weights[i];
  }
  out.rhs = out.reduce_rhs(b);
  return out;
}

} // namespace thinhomog::fem
