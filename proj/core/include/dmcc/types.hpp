#pragma once

#include <cmath>
#include <stdexcept>

namespace dmcc {

// Malformed or inconsistent input data (files, manifests, argument values).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numerical failure: divergence, singular systems, degenerate vectors.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// 3-channel value in linear sensor space, R/G/B order.
struct Vec3 {
  double r = 0.0;
  double g = 0.0;
  double b = 0.0;

  double operator[](int i) const { return i == 0 ? r : i == 1 ? g : b; }
  double& operator[](int i) { return i == 0 ? r : i == 1 ? g : b; }

  Vec3 operator+(const Vec3& o) const { return {r + o.r, g + o.g, b + o.b}; }
  Vec3 operator-(const Vec3& o) const { return {r - o.r, g - o.g, b - o.b}; }
  Vec3 operator*(double s) const { return {r * s, g * s, b * s}; }
  Vec3 operator/(double s) const { return {r / s, g / s, b / s}; }

  double sum() const { return r + g + b; }
  double dot(const Vec3& o) const { return r * o.r + g * o.g + b * o.b; }
  Vec3 cross(const Vec3& o) const {
    return {g * o.b - b * o.g, b * o.r - r * o.b, r * o.g - g * o.r};
  }
  double norm() const { return std::sqrt(dot(*this)); }
  bool finite() const { return std::isfinite(r) && std::isfinite(g) && std::isfinite(b); }
  bool all_positive() const { return r > 0.0 && g > 0.0 && b > 0.0; }
  bool all_non_negative() const { return r >= 0.0 && g >= 0.0 && b >= 0.0; }
};

inline Vec3 cwise_mul(const Vec3& a, const Vec3& b) { return {a.r * b.r, a.g * b.g, a.b * b.b}; }
inline Vec3 cwise_div(const Vec3& a, const Vec3& b) { return {a.r / b.r, a.g / b.g, a.b / b.b}; }

}  // namespace dmcc
