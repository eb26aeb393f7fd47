#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace thinhomog::fem {

struct Triplet {
  std::size_t row;
  std::size_t col;
  double value;
};

/// Compressed sparse row matrix (square).
struct CsrMatrix {
  std::size_t n = 0;
  std::vector<std::size_t> row_ptr{0};
  std::vector<std::size_t> col;
  std::vector<double> val;

  /// Duplicates are summed.
  static CsrMatrix from_triplets(std::size_t n, std::vector<Triplet> triplets) {
    std::sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
      return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    CsrMatrix m;
    m.n = n;
    m.row_ptr.assign(n + 1, 0);
    m.col.reserve(triplets.size());
    m.val.reserve(triplets.size());
    std::size_t k = 0;
    for (std::size_t r = 0; r < n; ++r) {
      while (k < triplets.size() && triplets[k].row == r) {
        const std::size_t c = triplets[k].col;
        double v = 0.0;
        while (k < triplets.size() && triplets[k].row == r && triplets[k].col == c) v += triplets[k++].value;
        m.col.push_back(c);
        m.val.push_back(v);
      }
      m.row_ptr[r + 1] = m.col.size();
    }
    return m;
  }

  static CsrMatrix identity(std::size_t n) {
    std::vector<Triplet> t;
    for (std::size_t i = 0; i < n; ++i) t.push_back({i, i, 1.0});
    return from_triplets(n, std::move(t));
  }

  void multiply(std::span<const double> x, std::span<double> y) const {
    for (std::size_t r = 0; r < n; ++r) {
      double s = 0.0;
      for (std::size_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k) s += val[k] * x[col[k]];
      y[r] = s;
    }
  }

  std::vector<double> operator*(const std::vector<double>& x) const {
    std::vector<double> y(n);
    multiply(x, y);
    return y;
  }

  double at(std::size_t r, std::size_t c) const {
    const auto first = col.begin() + static_cast<std::ptrdiff_t>(row_ptr[r]);
    const auto last = col.begin() + static_cast<std::ptrdiff_t>(row_ptr[r + 1]);
    const auto it = std::lower_bound(first, last, c);
    return (it != last && *it == c) ? val[static_cast<std::size_t>(it - col.begin())] : 0.0;
  }

  std::vector<double> diagonal() const {
    std::vector<double> d(n, 0.0);
    for (std::size_t r = 0; r < n; ++r) d[r] = at(r, r);
    return d;
  }

  double frobenius_norm() const {
    double s = 0.0;
    for (double v : val) s += v * v;
    return std::sqrt(s);
  }

  std::size_t nonzeros() const { return val.size(); }
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

/// Largest |x.Ay - y.Ax| / (|A|_F |x| |y|) over random probes.
inline double symmetry_defect(const CsrMatrix& A, int probes = 8, std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<double> x(A.n), y(A.n), Ax(A.n), Ay(A.n);
  const double norm = A.frobenius_norm();
  double worst = 0.0;
  for (int p = 0; p < probes; ++p) {
    for (std::size_t i = 0; i < A.n; ++i) {
      x[i] = g(rng);
      y[i] = g(rng);
    }
    A.multiply(x, Ax);
    A.multiply(y, Ay);
    const double scale = norm * norm2(x) * norm2(y);
    if (scale > 0.0) worst = std::max(worst, std::fabs(dot(x, Ay) - dot(y, Ax)) / scale);
  }
  return worst;
}

} // namespace thinhomog::fem
