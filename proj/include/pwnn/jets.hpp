#pragma once

#include <array>
#include <cmath>
#include <stdexcept>

#include "pwnn/specfun.hpp"

namespace pwnn {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  double operator[](int i) const { return i == 0 ? x : y; }
  double norm() const { return std::hypot(x, y); }
  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend bool operator==(const Vec2&, const Vec2&) = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }

/// Truncated second-order Taylor number along one direction: value,
/// first and second directional derivatives.
struct Jet2 {
  Cplx v{};
  Cplx d{};
  Cplx dd{};

  static Jet2 constant(Cplx c) { return {c, 0.0, 0.0}; }

  friend Jet2 operator+(const Jet2& a, const Jet2& b) { return {a.v + b.v, a.d + b.d, a.dd + b.dd}; }
  friend Jet2 operator-(const Jet2& a, const Jet2& b) { return {a.v - b.v, a.d - b.d, a.dd - b.dd}; }
  friend Jet2 operator-(const Jet2& a) { return {-a.v, -a.d, -a.dd}; }
  friend Jet2 operator*(const Jet2& a, const Jet2& b) {
    return {a.v * b.v, a.d * b.v + a.v * b.d, a.dd * b.v + 2.0 * a.d * b.d + a.v * b.dd};
  }
  friend Jet2 operator*(Cplx s, const Jet2& a) { return {s * a.v, s * a.d, s * a.dd}; }
  friend Jet2 operator*(const Jet2& a, Cplx s) { return s * a; }

  Jet2& operator+=(const Jet2& o) { return *this = *this + o; }
};

/// Lifts a holomorphic f through a jet given f, f', f'' at the value.
inline Jet2 chain(const Jet2& a, Cplx f0, Cplx f1, Cplx f2) {
  return {f0, f1 * a.d, f2 * a.d * a.d + f1 * a.dd};
}

inline Jet2 tanh(const Jet2& a) {
  const Cplx t = std::tanh(a.v);
  const Cplx t1 = 1.0 - t * t;
  return chain(a, t, t1, -2.0 * t * t1);
}

inline Jet2 sin(const Jet2& a) {
  const Cplx s = std::sin(a.v);
  return chain(a, s, std::cos(a.v), -s);
}

/// z -> e^{iz}; for z = a + bi this is e^{-b}(cos a + i sin a).
inline Jet2 exp_i(const Jet2& a) {
  const Cplx e = std::exp(kI * a.v);
  return chain(a, e, kI * e, -e);
}

/// Seeds the two input coordinates for a pass along `direction`.
inline std::array<Jet2, 2> jet_seed(Vec2 p, int direction) {
  if (direction != 0 && direction != 1)
    throw std::invalid_argument("jet_seed: direction must be 0 or 1");
  std::array<Jet2, 2> out{Jet2{p.x, 0.0, 0.0}, Jet2{p.y, 0.0, 0.0}};
  out[direction].d = 1.0;
  return out;
}

}  // namespace pwnn
