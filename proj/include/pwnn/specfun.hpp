#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>

namespace pwnn {

using Cplx = std::complex<double>;

inline constexpr Cplx kI{0.0, 1.0};
inline constexpr double kPi = 3.14159265358979323846;

/// Largest Bessel order accepted by the public entry points.
inline constexpr int kMaxBesselOrder = 5;

namespace detail {

// Orders 0..N of J_n(x), x >= 0. Power series for small arguments, Miller's
// backward recurrence normalized by J_0 + 2*sum J_2m = 1 otherwise.
template <int N>
std::array<double, N + 1> bessel_j_table(double x) {
  std::array<double, N + 1> out{};
  if (x == 0.0) {
    out[0] = 1.0;
    return out;
  }
  if (x < 1.0) {
    const double q = -0.25 * x * x;
    double lead = 1.0;  // (x/2)^n / n!
    for (int n = 0; n <= N; ++n) {
      double term = lead;
      double sum = term;
      for (int m = 1; m < 60; ++m) {
        term *= q / (double(m) * double(m + n));
        sum += term;
        if (std::abs(term) < 1e-18 * std::abs(sum)) break;
      }
      out[n] = sum;
      lead *= 0.5 * x / double(n + 1);
    }
    return out;
  }

  const double top = std::max(double(N), x);
  int start = 2 * ((int(top) + 16 + int(std::sqrt(40.0 * top))) / 2);
  constexpr double kBig = 1e250;
  constexpr double kSmall = 1e-250;

  double jp = 0.0;  // J_{n+1}
  double j = 1e-300; // J_n
  double norm = 0.0;
  const double two_over_x = 2.0 / x;
  for (int n = start; n > 0; --n) {
    const double jm = double(n) * two_over_x * j - jp;
    jp = j;
    j = jm;
    // j now holds J_{n-1}
    if (n - 1 <= N) out[n - 1] = j;
    if ((n - 1) % 2 == 0 && n - 1 > 0) norm += 2.0 * j;
    if (std::abs(j) > kBig) {
      j *= kSmall;
      jp *= kSmall;
      norm *= kSmall;
      for (auto& v : out) v *= kSmall;
    }
  }
  norm += j;
  for (auto& v : out) v /= norm;
  return out;
}

inline void check_bessel_args(int order, double x) {
  if (order < 0 || order > kMaxBesselOrder)
    throw std::domain_error("bessel: unsupported order " + std::to_string(order));
  if (!(x >= 0.0))
    throw std::domain_error("bessel: argument must be nonnegative");
}

}  // namespace detail

/// Bessel function of the first kind J_order(x) for 0 <= order <= 5, x >= 0.
inline double bessel_j(int order, double x) {
  detail::check_bessel_args(order, x);
  return detail::bessel_j_table<kMaxBesselOrder>(x)[order];
}

/// J_order'(x), from J_0' = -J_1 and J_n' = (J_{n-1} - J_{n+1}) / 2.
inline double bessel_j_prime(int order, double x) {
  detail::check_bessel_args(order, x);
  const auto t = detail::bessel_j_table<kMaxBesselOrder + 1>(x);
  if (order == 0) return -t[1];
  return 0.5 * (t[order - 1] - t[order + 1]);
}

/// J_n(x), J_n'(x) and J_n(x)/x (finite at x = 0) from one table evaluation.
struct BesselTriple {
  double value;
  double derivative;
  double over_x;
};

inline BesselTriple bessel_j_triple(int order, double x) {
  detail::check_bessel_args(order, x);
  const auto t = detail::bessel_j_table<kMaxBesselOrder + 1>(x);
  BesselTriple r{};
  r.value = t[order];
  if (order == 0) {
    r.derivative = -t[1];
    r.over_x = x > 0.0 ? t[0] / x : HUGE_VAL;
  } else {
    r.derivative = 0.5 * (t[order - 1] - t[order + 1]);
    // J_n(x)/x = (J_{n-1} + J_{n+1}) / (2n)
    r.over_x = (t[order - 1] + t[order + 1]) / (2.0 * order);
  }
  return r;
}

}  // namespace pwnn
