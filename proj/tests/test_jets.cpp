#include <cmath>
#include <functional>

#include <gtest/gtest.h>

#include "pwnn/jets.hpp"
#include "pwnn/problems.hpp"

namespace {

using pwnn::Cplx;
using pwnn::Jet2;
using pwnn::Vec2;

void expect_cnear(Cplx a, Cplx b, double tol) {
  EXPECT_NEAR(a.real(), b.real(), tol);
  EXPECT_NEAR(a.imag(), b.imag(), tol);
}

TEST(Jets, Seed) {
  auto s = pwnn::jet_seed({3, 5}, 0);
  expect_cnear(s[0].v, 3, 0);
  expect_cnear(s[0].d, 1, 0);
  expect_cnear(s[0].dd, 0, 0);
  expect_cnear(s[1].v, 5, 0);
  expect_cnear(s[1].d, 0, 0);

  s = pwnn::jet_seed({0, 0}, 1);
  expect_cnear(s[0].d, 0, 0);
  expect_cnear(s[1].d, 1, 0);
  EXPECT_THROW(pwnn::jet_seed({0, 0}, 2), std::invalid_argument);
}

TEST(Jets, SquareAfterSeed) {
  const auto s = pwnn::jet_seed({3, 7}, 0);
  const Jet2 f = s[0] * s[0];
  expect_cnear(f.v, 9, 0);
  expect_cnear(f.d, 6, 0);
  expect_cnear(f.dd, 2, 0);
}

TEST(Jets, ElementaryAtKnownPoints) {
  const Jet2 e = pwnn::exp_i(Jet2{0.0, 1.0, 0.0});
  expect_cnear(e.v, 1.0, 1e-15);
  expect_cnear(e.d, Cplx(0, 1), 1e-15);
  expect_cnear(e.dd, -1.0, 1e-15);

  const Jet2 t = pwnn::tanh(Jet2{0.0, 1.0, 0.0});
  expect_cnear(t.v, 0.0, 1e-15);
  expect_cnear(t.d, 1.0, 1e-15);
  expect_cnear(t.dd, 0.0, 1e-15);

  const Jet2 s = pwnn::sin(Jet2{pwnn::kPi / 2, 1.0, 0.0});
  const double h = 1e-5;
  const double fd1 = (std::sin(pwnn::kPi / 2 + h) - std::sin(pwnn::kPi / 2 - h)) / (2 * h);
  expect_cnear(s.v, 1.0, 1e-15);
  expect_cnear(s.d, fd1, 1e-8);
  expect_cnear(s.dd, -1.0, 1e-8);
}

TEST(Jets, ExpIOnComplexArgument) {
  const Cplx z{0.3, 0.7};
  const Jet2 e = pwnn::exp_i(Jet2{z, 0.0, 0.0});
  expect_cnear(e.v, std::exp(-0.7) * Cplx(std::cos(0.3), std::sin(0.3)), 1e-15);
}

// Compare jets against central differences of the plain function along a
// complex line t -> z0 + t * dz, for random seeds.
TEST(Jets, MatchFiniteDifferencesOnRandomSeeds) {
  using Fn = std::function<Cplx(Cplx)>;
  using JetFn = std::function<Jet2(const Jet2&)>;
  struct Case {
    Fn f;
    JetFn j;
  };
  const Case cases[] = {
      {[](Cplx z) { return std::tanh(z); }, [](const Jet2& a) { return pwnn::tanh(a); }},
      {[](Cplx z) { return std::sin(z); }, [](const Jet2& a) { return pwnn::sin(a); }},
      {[](Cplx z) { return std::exp(pwnn::kI * z); }, [](const Jet2& a) { return pwnn::exp_i(a); }},
      {[](Cplx z) { return z * z * z; }, [](const Jet2& a) { return a * a * a; }},
  };
  pwnn::Xorshift64Star rng(2024);
  for (const auto& c : cases) {
    for (int i = 0; i < 200; ++i) {
      const Cplx z0{rng.uniform(-1.5, 1.5), rng.uniform(-0.5, 0.5)};
      const Cplx dz{rng.uniform(-1, 1), rng.uniform(-1, 1)};
      // A seed with nonzero second component exercises the dd chain term.
      const Cplx ddz{rng.uniform(-1, 1), rng.uniform(-1, 1)};
      const Jet2 out = c.j(Jet2{z0, dz, ddz});
      auto path = [&](double t) { return c.f(z0 + t * dz + 0.5 * t * t * ddz); };
      const double h1 = 1e-5, h2 = 1e-4;
      const Cplx d1 = (path(h1) - path(-h1)) / (2 * h1);
      const Cplx d2 = (path(h2) - 2.0 * path(0) + path(-h2)) / (h2 * h2);
      EXPECT_LE(std::abs(out.d - d1), 1e-6 * std::max(1.0, std::abs(d1)));
      EXPECT_LE(std::abs(out.dd - d2), 1e-6 * std::max(1.0, std::abs(d2)) + 2e-6);
    }
  }
}

TEST(Jets, LaplacianByTwoPassesIsExactOnPolynomials) {
  using Poly = std::function<Jet2(const Jet2&, const Jet2&)>;
  struct Case {
    Poly f;
    std::function<double(Vec2)> lap;
  };
  const Case cases[] = {
      {[](const Jet2& x, const Jet2& y) { return x * x + y * y; }, [](Vec2) { return 4.0; }},
      {[](const Jet2& x, const Jet2& y) { return x * y; }, [](Vec2) { return 0.0; }},
      {[](const Jet2& x, const Jet2&) { return x * x * x; }, [](Vec2 p) { return 6.0 * p.x; }},
  };
  for (const auto& c : cases) {
    for (Vec2 p : {Vec2{0.3, -0.2}, Vec2{1.5, 2.5}, Vec2{-3, 0.125}}) {
      Cplx lap{};
      for (int dir = 0; dir < 2; ++dir) {
        const auto s = pwnn::jet_seed(p, dir);
        lap += c.f(s[0], s[1]).dd;
      }
      EXPECT_NEAR(lap.real(), c.lap(p), 1e-12);
      EXPECT_NEAR(lap.imag(), 0.0, 1e-12);
    }
  }
}

}  // namespace
