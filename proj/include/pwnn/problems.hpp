#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "pwnn/jets.hpp"
#include "pwnn/specfun.hpp"

namespace pwnn {

/// xorshift64* generator. Seeds pass through splitmix64 so that small or
/// neighbouring seeds give unrelated streams.
class Xorshift64Star {
 public:
  explicit Xorshift64Star(std::uint64_t seed) : state_(splitmix(seed)) {
    if (state_ == 0) state_ = 0x9E3779B97F4A7C15ull;
  }

  std::uint64_t next() {
    state_ ^= state_ >> 12;
    state_ ^= state_ << 25;
    state_ ^= state_ >> 27;
    return state_ * 0x2545F4914F6CDD1Dull;
  }

  /// Uniform on [0, 1).
  double uniform() { return double(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  static std::uint64_t splitmix(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

/// Independent sub-stream seed for a given purpose tag.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
  return Xorshift64Star::splitmix(seed ^ Xorshift64Star::splitmix(tag + 0x51ED270B27D1ull));
}

struct RectDomain {
  double x_min = 0.0;
  double x_max = 1.0;
  double y_min = -0.5;
  double y_max = 0.5;

  RectDomain() = default;
  RectDomain(double x0, double x1, double y0, double y1) : x_min(x0), x_max(x1), y_min(y0), y_max(y1) {
    if (!(x_min < x_max) || !(y_min < y_max)) throw std::invalid_argument("RectDomain: empty rectangle");
  }

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double diameter() const { return std::hypot(width(), height()); }

  bool contains(Vec2 p, double tol = 0.0) const {
    return p.x >= x_min - tol && p.x <= x_max + tol && p.y >= y_min - tol && p.y <= y_max + tol;
  }

  // Edge order: bottom, right, top, left.
  static Vec2 edge_normal(int edge) {
    switch (edge) {
      case 0: return {0.0, -1.0};
      case 1: return {1.0, 0.0};
      case 2: return {0.0, 1.0};
      default: return {-1.0, 0.0};
    }
  }
  /// Start point and end point of an edge, counter-clockwise.
  std::pair<Vec2, Vec2> edge(int e) const {
    switch (e) {
      case 0: return {{x_min, y_min}, {x_max, y_min}};
      case 1: return {{x_max, y_min}, {x_max, y_max}};
      case 2: return {{x_max, y_max}, {x_min, y_max}};
      default: return {{x_min, y_max}, {x_min, y_min}};
    }
  }

  static RectDomain kd_default() { return {0.0, 1.0, -0.5, 0.5}; }
  static RectDomain ud_default() { return {-1.0, 1.0, -1.0, 1.0}; }
};

/// Circular wave J_order(kr) e^{i order theta}.
struct KnownDirections {
  int order = 1;
};

/// Superposition of unit-amplitude plane waves e^{i k_j . x}.
struct UnknownDirections {
  std::vector<Vec2> wavevectors;
};

struct HelmholtzProblem {
  RectDomain domain;
  double k = 1.0;
  std::variant<KnownDirections, UnknownDirections> exact;

  HelmholtzProblem(RectDomain dom, double wavenumber, std::variant<KnownDirections, UnknownDirections> sol)
      : domain(dom), k(wavenumber), exact(std::move(sol)) {
    if (!(k > 0.0)) throw std::invalid_argument("HelmholtzProblem: k must be positive");
    if (auto* ud = std::get_if<UnknownDirections>(&exact)) {
      if (ud->wavevectors.empty()) throw std::invalid_argument("HelmholtzProblem: no wavevectors");
      for (const auto& w : ud->wavevectors)
        if (std::abs(w.norm() - k) > 1e-12 * std::max(1.0, k))
          throw std::invalid_argument("HelmholtzProblem: wavevector norm differs from k");
    } else if (auto* kd = std::get_if<KnownDirections>(&exact)) {
      if (kd->order < 0 || kd->order > kMaxBesselOrder)
        throw std::invalid_argument("HelmholtzProblem: unsupported Bessel order");
    }
  }

  bool is_kd() const { return std::holds_alternative<KnownDirections>(exact); }
};

struct ExactEval {
  Cplx value;
  Cplx dx;
  Cplx dy;
};

namespace detail {

inline void check_point(const HelmholtzProblem& p, Vec2 x) {
  if (!std::isfinite(x.x) || !std::isfinite(x.y) || !p.domain.contains(x, 1e-9))
    throw std::domain_error("exact solution evaluated outside the domain");
}

}  // namespace detail

/// Exact value and Cartesian gradient.
inline ExactEval exact_eval(const HelmholtzProblem& p, Vec2 x) {
  detail::check_point(p, x);
  if (const auto* ud = std::get_if<UnknownDirections>(&p.exact)) {
    ExactEval r{0.0, 0.0, 0.0};
    for (const auto& w : ud->wavevectors) {
      const double ph = dot(w, x);
      const Cplx e{std::cos(ph), std::sin(ph)};
      r.value += e;
      r.dx += kI * w.x * e;
      r.dy += kI * w.y * e;
    }
    return r;
  }
  const int n = std::get<KnownDirections>(p.exact).order;
  const double r = x.norm();
  const double theta = std::atan2(x.y, x.x);
  const Cplx phase = std::polar(1.0, n * theta);
  const auto b = bessel_j_triple(n, p.k * r);
  const double c = std::cos(theta), s = std::sin(theta);
  // grad = e^{in theta} [k J'(kr) rhat + i n (J(kr)/r) thetahat],
  // J(kr)/r = k * (J/x)(kr); zero when n == 0.
  const Cplx radial = p.k * b.derivative;
  const Cplx angular = n == 0 ? Cplx{0.0} : kI * double(n) * p.k * b.over_x;
  return {b.value * phase, phase * (radial * c - angular * s), phase * (radial * s + angular * c)};
}

inline Cplx exact_value(const HelmholtzProblem& p, Vec2 x) { return exact_eval(p, x).value; }

inline std::pair<Cplx, Cplx> exact_gradient(const HelmholtzProblem& p, Vec2 x) {
  const auto e = exact_eval(p, x);
  return {e.dx, e.dy};
}

/// Impedance data du/dn + i k u of the exact solution.
inline Cplx boundary_g(const HelmholtzProblem& p, Vec2 x, Vec2 normal) {
  const auto e = exact_eval(p, x);
  return e.dx * normal.x + e.dy * normal.y + kI * p.k * e.value;
}

struct BoundarySample {
  Vec2 point;
  Vec2 normal;
};

struct SampleSet {
  std::vector<Vec2> interior;
  std::vector<BoundarySample> boundary;
  std::uint64_t seed = 0;
};

/// Interior points i.i.d. uniform; boundary points equispaced per edge at
/// cell midpoints, so corners are never sampled.
inline SampleSet sample(const HelmholtzProblem& p, int n_interior, int n_per_edge, std::uint64_t seed) {
  if (n_interior < 0) throw std::invalid_argument("sample: negative interior count");
  if (n_per_edge < 1) throw std::invalid_argument("sample: need at least one point per edge");
  SampleSet s;
  s.seed = seed;
  const auto& d = p.domain;
  Xorshift64Star rng(seed);
  s.interior.reserve(std::size_t(n_interior));
  for (int i = 0; i < n_interior; ++i) {
    Vec2 q;
    // Open interval: resample the (measure zero) edge hits.
    do {
      q = {rng.uniform(d.x_min, d.x_max), rng.uniform(d.y_min, d.y_max)};
    } while (q.x <= d.x_min || q.y <= d.y_min);
    s.interior.push_back(q);
  }
  s.boundary.reserve(std::size_t(4 * n_per_edge));
  for (int e = 0; e < 4; ++e) {
    const auto [a, b] = d.edge(e);
    const Vec2 n = RectDomain::edge_normal(e);
    for (int i = 0; i < n_per_edge; ++i) {
      const double t = (i + 0.5) / n_per_edge;
      s.boundary.push_back({a + t * (b - a), n});
    }
  }
  return s;
}

/// `count` wavevectors of norm k at i.i.d. uniform angles.
inline std::vector<Vec2> random_directions(int count, double k, std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("random_directions: count must be >= 1");
  Xorshift64Star rng(seed);
  std::vector<Vec2> out;
  out.reserve(std::size_t(count));
  for (int i = 0; i < count; ++i) {
    const double phi = 2.0 * kPi * rng.uniform();
    out.push_back({k * std::cos(phi), k * std::sin(phi)});
  }
  return out;
}

}  // namespace pwnn
