#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "pwnn/problems.hpp"

namespace {

using namespace pwnn;

void expect_cnear(Cplx a, Cplx b, double tol) {
  EXPECT_NEAR(a.real(), b.real(), tol);
  EXPECT_NEAR(a.imag(), b.imag(), tol);
}

HelmholtzProblem single_wave(double k, RectDomain d = RectDomain::ud_default()) {
  return {d, k, UnknownDirections{{{k, 0.0}}}};
}

TEST(Problems, RejectsInvalidDefinitions) {
  EXPECT_THROW(RectDomain(1, 0, 0, 1), std::invalid_argument);
  EXPECT_THROW(HelmholtzProblem(RectDomain::ud_default(), -1.0, KnownDirections{1}), std::invalid_argument);
  EXPECT_THROW(HelmholtzProblem(RectDomain::ud_default(), 5.0, UnknownDirections{{{4.0, 0.0}}}),
               std::invalid_argument);
}

TEST(Problems, SinglePlaneWaveAtOrigin) {
  const double k = 7.0;
  const auto p = single_wave(k);
  expect_cnear(exact_value(p, {0, 0}), 1.0, 1e-15);
  const auto [gx, gy] = exact_gradient(p, {0, 0});
  expect_cnear(gx, Cplx(0, k), 1e-15);
  expect_cnear(gy, 0.0, 1e-15);
}

TEST(Problems, KdValueOnAxis) {
  const double k = 10.0;
  HelmholtzProblem p(RectDomain::kd_default(), k, KnownDirections{1});
  expect_cnear(exact_value(p, {1.0 / k, 0.0}), 0.4400505857449335, 1e-13);
}

TEST(Problems, KdGradientAtOriginIsTheSeriesLimit) {
  const double k = 10.0;
  HelmholtzProblem p(RectDomain::kd_default(), k, KnownDirections{1});
  const auto [gx, gy] = exact_gradient(p, {0.0, 0.0});
  // J_1(kr) e^{i theta} ~ (k/2)(x + i y) near the origin.
  expect_cnear(gx, k / 2, 1e-14);
  expect_cnear(gy, Cplx(0, k / 2), 1e-14);
  HelmholtzProblem p2(RectDomain::kd_default(), k, KnownDirections{2});
  const auto [hx, hy] = exact_gradient(p2, {0.0, 0.0});
  expect_cnear(hx, 0.0, 1e-14);
  expect_cnear(hy, 0.0, 1e-14);
}

TEST(Problems, GradientMatchesFiniteDifferences) {
  Xorshift64Star rng(5);
  const double h = 1e-6;
  for (int order : {0, 1, 3}) {
    HelmholtzProblem p(RectDomain::kd_default(), 10.0, KnownDirections{order});
    for (int i = 0; i < 100; ++i) {
      const Vec2 x{rng.uniform(0.01, 0.99), rng.uniform(-0.49, 0.49)};
      const auto [gx, gy] = exact_gradient(p, x);
      const Cplx fx = (exact_value(p, {x.x + h, x.y}) - exact_value(p, {x.x - h, x.y})) / (2 * h);
      const Cplx fy = (exact_value(p, {x.x, x.y + h}) - exact_value(p, {x.x, x.y - h})) / (2 * h);
      const double scale = std::max({std::abs(gx), std::abs(gy), 1.0});
      EXPECT_LE(std::abs(gx - fx), 1e-6 * scale);
      EXPECT_LE(std::abs(gy - fy), 1e-6 * scale);
    }
  }
}

TEST(Problems, RejectsPointsOutsideTheDomain) {
  HelmholtzProblem p(RectDomain::kd_default(), 10.0, KnownDirections{1});
  EXPECT_THROW(exact_value(p, {-0.1, 0.0}), std::domain_error);
  EXPECT_NO_THROW(exact_value(p, {-1e-12, 0.0}));
}

TEST(Problems, BoundaryDataForSinglePlaneWave) {
  const double k = 3.0;
  const auto p = single_wave(k);
  const Vec2 right{1.0, 0.0};
  const Cplx e = std::polar(1.0, k * 1.0);
  expect_cnear(boundary_g(p, right, {1, 0}), 2.0 * kI * k * e, 1e-14);
  const Vec2 top{0.3, 1.0};
  expect_cnear(boundary_g(p, top, {0, 1}), kI * k * std::polar(1.0, k * 0.3), 1e-14);
}

TEST(Problems, KdBoundaryDataMatchesFiniteDifferences) {
  const double k = 10.0;
  HelmholtzProblem p(RectDomain::kd_default(), k, KnownDirections{1});
  const auto s = sample(p, 0, 7, 1);
  const double h = 1e-6;
  for (const auto& b : s.boundary) {
    // One-sided into the domain along -n.
    const Vec2 x = b.point, n = b.normal;
    const Cplx dn = (3.0 * exact_value(p, x) - 4.0 * exact_value(p, x - h * n) + exact_value(p, x - 2 * h * n)) /
                    (2 * h);
    const Cplx ref = dn + kI * k * exact_value(p, x);
    EXPECT_LE(std::abs(boundary_g(p, x, n) - ref), 1e-6 * std::max(1.0, std::abs(ref)));
  }
}

TEST(Problems, ExactSolutionSatisfiesImpedanceCondition) {
  // B(u*) - g with u* evaluated directly is identically zero.
  for (auto p : {HelmholtzProblem(RectDomain::kd_default(), 10.0, KnownDirections{1}),
                 HelmholtzProblem(RectDomain::ud_default(), 5.0, UnknownDirections{random_directions(6, 5.0, 3)})}) {
    const auto s = sample(p, 0, 13, 2);
    for (const auto& b : s.boundary) {
      const auto e = exact_eval(p, b.point);
      const Cplx r = e.dx * b.normal.x + e.dy * b.normal.y + kI * p.k * e.value - boundary_g(p, b.point, b.normal);
      EXPECT_LE(std::abs(r), 1e-12);
    }
  }
}

TEST(Problems, UdSolutionSatisfiesPde) {
  const double k = 10.0;
  HelmholtzProblem p(RectDomain::ud_default(), k, UnknownDirections{random_directions(5, k, 11)});
  Xorshift64Star rng(8);
  const double h = 1e-3;
  for (int i = 0; i < 50; ++i) {
    const Vec2 x{rng.uniform(-0.9, 0.9), rng.uniform(-0.9, 0.9)};
    auto u = [&](double dx, double dy) { return exact_value(p, {x.x + dx, x.y + dy}); };
    // Fourth-order 9-point stencil along each axis.
    auto d2 = [&](double ex, double ey) {
      return (-u(2 * h * ex, 2 * h * ey) + 16.0 * u(h * ex, h * ey) - 30.0 * u(0, 0) + 16.0 * u(-h * ex, -h * ey) -
              u(-2 * h * ex, -2 * h * ey)) /
             (12 * h * h);
    };
    EXPECT_LE(std::abs(d2(1, 0) + d2(0, 1) + k * k * u(0, 0)), 1e-6 * k * k);
  }
}

TEST(Problems, SamplingBoundaryLayout) {
  HelmholtzProblem p(RectDomain::kd_default(), 5.0, KnownDirections{1});
  const auto s = sample(p, 0, 1, 9);
  ASSERT_EQ(s.boundary.size(), 4u);
  EXPECT_TRUE(s.interior.empty());
  EXPECT_EQ(s.boundary[0].point, (Vec2{0.5, -0.5}));
  EXPECT_EQ(s.boundary[1].point, (Vec2{1.0, 0.0}));
  EXPECT_EQ(s.boundary[2].point, (Vec2{0.5, 0.5}));
  EXPECT_EQ(s.boundary[3].point, (Vec2{0.0, 0.0}));
  EXPECT_EQ(s.boundary[1].normal, (Vec2{1.0, 0.0}));
  EXPECT_EQ(s.boundary[3].normal, (Vec2{-1.0, 0.0}));
}

TEST(Problems, SamplingInvariants) {
  HelmholtzProblem p(RectDomain::kd_default(), 5.0, KnownDirections{1});
  const auto s = sample(p, 300, 10, 42);
  EXPECT_EQ(s.interior.size(), 300u);
  EXPECT_EQ(s.boundary.size(), 40u);
  for (const auto& x : s.interior) {
    EXPECT_GT(x.x, 0.0);
    EXPECT_LT(x.x, 1.0);
    EXPECT_GT(x.y, -0.5);
    EXPECT_LT(x.y, 0.5);
  }
  for (const auto& b : s.boundary) {
    const bool on_edge = b.point.x == 0.0 || b.point.x == 1.0 || b.point.y == -0.5 || b.point.y == 0.5;
    EXPECT_TRUE(on_edge);
    EXPECT_DOUBLE_EQ(b.normal.norm(), 1.0);
  }
  const auto again = sample(p, 300, 10, 42);
  for (std::size_t i = 0; i < s.interior.size(); ++i) EXPECT_EQ(s.interior[i], again.interior[i]);
  const auto other = sample(p, 300, 10, 43);
  EXPECT_NE(s.interior[0], other.interior[0]);
}

TEST(Problems, InteriorSamplesAreUniform) {
  // Mean of U(0,1) x U(-0.5,0.5) within 3 sigma; sigma = sqrt(1/12 / N).
  HelmholtzProblem p(RectDomain::kd_default(), 5.0, KnownDirections{1});
  const int n = 500;
  const auto s = sample(p, n, 1, 1234);
  double mx = 0, my = 0;
  for (const auto& x : s.interior) {
    mx += x.x;
    my += x.y;
  }
  mx /= n;
  my /= n;
  const double sigma = std::sqrt(1.0 / 12.0 / n);
  EXPECT_LE(std::abs(mx - 0.5), 3 * sigma);
  EXPECT_LE(std::abs(my - 0.0), 3 * sigma);
}

TEST(Problems, RandomDirections) {
  const auto one = random_directions(1, 5.0, 77);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_NEAR(one[0].norm(), 5.0, 1e-14);
  const auto a = random_directions(10, 3.0, 5), b = random_directions(10, 3.0, 5);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
  EXPECT_THROW(random_directions(0, 1.0, 1), std::invalid_argument);
}

TEST(Problems, RandomDirectionAnglesPassChiSquare) {
  const int n = 10000, bins = 20;
  const auto w = random_directions(n, 2.0, 99);
  std::vector<int> count(bins, 0);
  for (const auto& v : w) {
    double a = std::atan2(v.y, v.x);
    if (a < 0) a += 2 * kPi;
    count[std::min(bins - 1, int(a / (2 * kPi) * bins))]++;
  }
  const double expected = double(n) / bins;
  double chi2 = 0;
  for (int c : count) chi2 += (c - expected) * (c - expected) / expected;
  // 99th percentile of chi-square with 19 degrees of freedom.
  EXPECT_LT(chi2, 36.19);
}

}  // namespace
