#pragma once

// Small 2-d vector type used throughout the library.

#include <cmath>

namespace permon {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double k, Vec2 a) { return {k * a.x, k * a.y}; }
inline Vec2 operator*(Vec2 a, double k) { return {k * a.x, k * a.y}; }
inline Vec2 operator/(Vec2 a, double k) { return {a.x / k, a.y / k}; }
inline Vec2& operator+=(Vec2& a, Vec2 b) { a.x += b.x; a.y += b.y; return a; }
inline Vec2& operator-=(Vec2& a, Vec2 b) { a.x -= b.x; a.y -= b.y; return a; }

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double norm_sq(Vec2 a) { return dot(a, a); }
inline double norm(Vec2 a) { return std::sqrt(norm_sq(a)); }
inline double distance(Vec2 a, Vec2 b) { return norm(a - b); }

// Unit vector; returns fallback for near-zero input.
inline Vec2 unit(Vec2 a, Vec2 fallback = {1.0, 0.0}) {
  double n = norm(a);
  if (n < 1e-300) return fallback;
  return a / n;
}

inline Vec2 from_angle(double theta) { return {std::cos(theta), std::sin(theta)}; }
inline double polar_angle(Vec2 a) { return std::atan2(a.y, a.x); }

// Tangent of the circle parameterization c + rho*(cos t, sin t), d/dt without rho.
inline Vec2 angle_tangent(double theta) { return {-std::sin(theta), std::cos(theta)}; }

}  // namespace permon
