#pragma once

#include <array>
#include <cmath>

namespace thinhomog {

using Vec2 = std::array<double, 2>;

/// Row-major 2x2 matrix.
struct Mat2 {
  double m11 = 0.0, m12 = 0.0, m21 = 0.0, m22 = 0.0;

  static Mat2 identity() { return {1.0, 0.0, 0.0, 1.0}; }

  double det() const { return m11 * m22 - m12 * m21; }
  Mat2 transpose() const { return {m11, m21, m12, m22}; }
  Mat2 inverse() const {
    const double d = det();
    return {m22 / d, -m12 / d, -m21 / d, m11 / d};
  }
  Vec2 operator*(const Vec2& v) const { return {m11 * v[0] + m12 * v[1], m21 * v[0] + m22 * v[1]}; }
  Mat2 operator*(const Mat2& o) const {
    return {m11 * o.m11 + m12 * o.m21, m11 * o.m12 + m12 * o.m22,
            m21 * o.m11 + m22 * o.m21, m21 * o.m12 + m22 * o.m22};
  }
  Mat2 operator+(const Mat2& o) const { return {m11 + o.m11, m12 + o.m12, m21 + o.m21, m22 + o.m22}; }
  Mat2 operator*(double s) const { return {m11 * s, m12 * s, m21 * s, m22 * s}; }
  double operator()(int i, int j) const {
    return i == 0 ? (j == 0 ? m11 : m12) : (j == 0 ? m21 : m22);
  }
  double& operator()(int i, int j) {
    return i == 0 ? (j == 0 ? m11 : m12) : (j == 0 ? m21 : m22);
  }
  double max_abs() const {
    return std::fmax(std::fmax(std::fabs(m11), std::fabs(m12)), std::fmax(std::fabs(m21), std::fabs(m22)));
  }
};

/// Eigenvalues (ascending) of the symmetric part of `a`.
inline Vec2 symmetric_eigenvalues(const Mat2& a) {
  const double off = 0.5 * (a.m12 + a.m21);
  const double mean = 0.5 * (a.m11 + a.m22);
  const double rad = std::hypot(0.5 * (a.m11 - a.m22), off);
  return {mean - rad, mean + rad};
}

inline double dot(const Vec2& a, const Vec2& b) { return a[0] * b[0] + a[1] * b[1]; }

} // namespace thinhomog
