#pragma once

#include <algorithm>
#include <cmath>

namespace finslerlab
{
/// Point or vector in the plane. Points of the torus are represented by any
/// lift; reduce with wrap() when a fundamental-domain representative is needed.
struct Vec2
{
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2& operator+=(const Vec2& o)
  {
    x += o.x;
    y += o.y;
    return *this;
  }
  constexpr Vec2& operator-=(const Vec2& o)
  {
    x -= o.x;
    y -= o.y;
    return *this;
  }
  constexpr Vec2& operator*=(double s)
  {
    x *= s;
    y *= s;
    return *this;
  }

  friend constexpr Vec2 operator+(Vec2 a, const Vec2& b) { return a += b; }
  friend constexpr Vec2 operator-(Vec2 a, const Vec2& b) { return a -= b; }
  friend constexpr Vec2 operator-(const Vec2& a) { return {-a.x, -a.y}; }
  friend constexpr Vec2 operator*(Vec2 a, double s) { return a *= s; }
  friend constexpr Vec2 operator*(double s, Vec2 a) { return a *= s; }
  friend constexpr bool operator==(const Vec2&, const Vec2&) = default;
};

constexpr double dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }

/// Euclidean norm, i.e. the norm of the fixed reference metric.
inline double norm(const Vec2& v) { return std::hypot(v.x, v.y); }

inline bool is_finite(const Vec2& v) { return std::isfinite(v.x) && std::isfinite(v.y); }

/// Representative in [0,1)^2.
inline Vec2 wrap(const Vec2& p)
{
  auto w = [](double s) {
    double r = s - std::floor(s);
    return r >= 1.0 ? 0.0 : r;
  };
  return {w(p.x), w(p.y)};
}

/// Flat distance on T^2 = R^2 / Z^2.
inline double torus_distance(const Vec2& a, const Vec2& b)
{
  auto d = [](double s) {
    s -= std::floor(s);
    return std::min(s, 1.0 - s);
  };
  return std::hypot(d(a.x - b.x), d(a.y - b.y));
}

}  // namespace finslerlab
