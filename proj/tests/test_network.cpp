#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "pwnn/network.hpp"

namespace {

using namespace pwnn;

// Plain re-implementation of the forward map, used as an oracle.
Cplx naive_forward(const std::vector<double>& theta, const NetSpec& spec, Vec2 x) {
  std::vector<Cplx> z{x.x, x.y};
  std::size_t at = 0;
  for (int l = 0; l < spec.hidden_layers; ++l) {
    const int cols = int(z.size());
    std::vector<Cplx> a(std::size_t(spec.units));
    for (int i = 0; i < spec.units; ++i)
      for (int j = 0; j < cols; ++j) a[std::size_t(i)] += theta[at + std::size_t(i * cols + j)] * z[std::size_t(j)];
    at += std::size_t(spec.units * cols);
    for (int i = 0; i < spec.units; ++i) {
      const Cplx s = a[std::size_t(i)] + theta[at++];
      switch (spec.activation) {
        case Activation::Tanh: a[std::size_t(i)] = std::tanh(s); break;
        case Activation::Sin: a[std::size_t(i)] = std::sin(s); break;
        case Activation::ExpI: a[std::size_t(i)] = std::exp(Cplx(0, 1) * s); break;
      }
    }
    z = a;
  }
  Cplx h{};
  for (int j = 0; j < spec.units; ++j, at += 2) h += Cplx(theta[at], theta[at + 1]) * z[std::size_t(j)];
  return h + Cplx(theta[at], theta[at + 1]);
}

HelmholtzProblem kd(double k) { return {RectDomain::kd_default(), k, KnownDirections{1}}; }

TEST(Network, ParamCount) {
  EXPECT_EQ((NetSpec{1, 10, Activation::ExpI}).param_count(), 52u);
  EXPECT_EQ((NetSpec{2, 4, Activation::Tanh}).param_count(), 12u + 20u + 10u);
  EXPECT_THROW((NetSpec{0, 4, Activation::Tanh}).validate(), std::invalid_argument);
}

TEST(Network, ActivationNames) {
  for (auto a : {Activation::Tanh, Activation::Sin, Activation::ExpI}) EXPECT_EQ(activation_from_string(to_string(a)), a);
  EXPECT_THROW(activation_from_string("relu"), std::invalid_argument);
}

TEST(Network, FlattenRoundTrip) {
  const NetSpec spec{3, 5, Activation::Sin};
  const auto p = init_params(spec, 9, 4.0);
  const auto theta = p.flatten();
  EXPECT_EQ(theta.size(), spec.param_count());
  EXPECT_EQ(NetParams::unflatten(spec, theta).flatten(), theta);
  std::vector<double> short_theta(theta.begin(), theta.end() - 1);
  EXPECT_THROW(NetParams::unflatten(spec, short_theta), std::invalid_argument);
}

TEST(Network, SinglePlaneWaveUnit) {
  const double k = 5.0;
  const NetSpec spec{1, 1, Activation::ExpI};
  auto p = NetParams::zeros(spec);
  p.hidden[0].w(0, 0) = k;
  p.out_weights[0] = 1.0;
  const Vec2 x{0.3, 0.1};
  const Cplx h = forward(p, spec, x);
  EXPECT_NEAR(std::abs(h - std::polar(1.0, k * 0.3)), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(helmholtz_residual(p, spec, x, k)), 0.0, 1e-12);
  const Cplx g = 2.0 * kI * k * std::polar(1.0, k * 1.0);
  EXPECT_NEAR(std::abs(boundary_residual(p, spec, {1.0, 0.0}, {1.0, 0.0}, k, g)), 0.0, 1e-12);
}

TEST(Network, ExpIInitSitsOnWavenumberCircle) {
  const NetSpec spec{1, 12, Activation::ExpI};
  const auto p = init_params(spec, 3, 7.0);
  for (int i = 0; i < spec.units; ++i) EXPECT_NEAR(std::hypot(p.hidden[0].w(i, 0), p.hidden[0].w(i, 1)), 7.0, 1e-13);
  Xorshift64Star rng(1);
  for (int i = 0; i < 20; ++i) {
    const Vec2 x{rng.uniform(), rng.uniform(-0.5, 0.5)};
    EXPECT_LE(std::abs(helmholtz_residual(p, spec, x, 7.0)), 1e-11);
  }
}

TEST(Network, InitIsDeterministic) {
  const NetSpec spec{2, 6, Activation::Tanh};
  EXPECT_EQ(init_params(spec, 5, 1.0).flatten(), init_params(spec, 5, 1.0).flatten());
  EXPECT_NE(init_params(spec, 5, 1.0).flatten(), init_params(spec, 6, 1.0).flatten());
}

class NetworkByActivation : public ::testing::TestWithParam<std::tuple<Activation, int>> {};

TEST_P(NetworkByActivation, ForwardMatchesNaiveImplementation) {
  const auto [act, layers] = GetParam();
  const NetSpec spec{layers, 7, act};
  const auto p = init_params(spec, 11, 6.0);
  const auto theta = p.flatten();
  Xorshift64Star rng(3);
  for (int i = 0; i < 25; ++i) {
    const Vec2 x{rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const Cplx a = forward(p, spec, x), b = naive_forward(theta, spec, x);
    EXPECT_LE(std::abs(a - b), 1e-12 * std::max(1.0, std::abs(b)));
  }
}

TEST_P(NetworkByActivation, ResidualsMatchFiniteDifferences) {
  const auto [act, layers] = GetParam();
  const NetSpec spec{layers, 6, act};
  const double k = 4.0;
  const auto p = init_params(spec, 21, k);
  const auto theta = p.flatten();
  auto u = [&](double x, double y) { return naive_forward(theta, spec, {x, y}); };
  Xorshift64Star rng(4);
  for (int i = 0; i < 10; ++i) {
    const Vec2 x{rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const double h = 1e-3;
    auto d2 = [&](double ex, double ey) {
      return (-u(x.x + 2 * h * ex, x.y + 2 * h * ey) + 16.0 * u(x.x + h * ex, x.y + h * ey) - 30.0 * u(x.x, x.y) +
              16.0 * u(x.x - h * ex, x.y - h * ey) - u(x.x - 2 * h * ex, x.y - 2 * h * ey)) /
             (12 * h * h);
    };
    const Cplx ref = d2(1, 0) + d2(0, 1) + k * k * u(x.x, x.y);
    const Cplx got = helmholtz_residual(p, spec, x, k);
    EXPECT_LE(std::abs(got - ref), 1e-6 * std::max(1.0, std::abs(ref)));

    const Vec2 n{0.6, -0.8};
    const double hb = 1e-6;
    const Cplx dn = (u(x.x + hb * n.x, x.y + hb * n.y) - u(x.x - hb * n.x, x.y - hb * n.y)) / (2 * hb);
    const Cplx g{0.25, -1.5};
    const Cplx bref = dn + kI * k * u(x.x, x.y) - g;
    EXPECT_LE(std::abs(boundary_residual(p, spec, x, n, k, g) - bref), 1e-7 * std::max(1.0, std::abs(bref)));
  }
}

TEST_P(NetworkByActivation, GradientMatchesCentralDifferences) {
  const auto [act, layers] = GetParam();
  const NetSpec spec{layers, 5, act};
  const double k = 3.0;
  const auto problem = kd(k);
  const auto t = TrainingSet::from(problem, sample(problem, 20, 4, 8));
  const auto p = init_params(spec, 31, k);
  LossOptions opt;
  opt.lambda = 0.7;
  opt.shard_size = 7;
  const auto lg = loss_and_grad(p, spec, t, opt);
  auto theta = p.flatten();
  ASSERT_EQ(lg.grad.size(), theta.size());
  auto loss_at = [&](const std::vector<double>& th) {
    const auto parts = loss_parts(NetParams::unflatten(spec, th), spec, t);
    return parts.interior + opt.lambda * parts.boundary;
  };
  EXPECT_NEAR(loss_at(theta), lg.loss, 1e-12 * lg.loss);
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double h = 1e-6 * std::max(1.0, std::abs(theta[i]));
    auto tp = theta, tm = theta;
    tp[i] += h;
    tm[i] -= h;
    const double fd = (loss_at(tp) - loss_at(tm)) / (2 * h);
    EXPECT_LE(std::abs(fd - lg.grad[i]), 1e-6 * std::max(1.0, std::abs(fd))) << "param " << i;
  }
}

INSTANTIATE_TEST_SUITE_P(All, NetworkByActivation,
                         ::testing::Combine(::testing::Values(Activation::Tanh, Activation::Sin, Activation::ExpI),
                                            ::testing::Values(1, 2, 3)));

TEST(Network, ExactPlaneWaveNetHasZeroLoss) {
  const double k = 6.0;
  const auto dirs = random_directions(3, k, 12);
  HelmholtzProblem problem(RectDomain::ud_default(), k, UnknownDirections{dirs});
  const NetSpec spec{1, 3, Activation::ExpI};
  auto p = NetParams::zeros(spec);
  for (int i = 0; i < 3; ++i) {
    p.hidden[0].w(i, 0) = dirs[std::size_t(i)].x;
    p.hidden[0].w(i, 1) = dirs[std::size_t(i)].y;
    p.out_weights[std::size_t(i)] = 1.0;
  }
  const auto t = TrainingSet::from(problem, sample(problem, 200, 20, 2));
  const auto parts = loss_parts(p, spec, t);
  EXPECT_LE(parts.interior, 1e-20);
  EXPECT_LE(parts.boundary, 1e-20);
  const auto lg = loss_and_grad(p, spec, t, {});
  for (double g : lg.grad) EXPECT_LE(std::abs(g), 1e-9);
}

TEST(Network, ReductionIsIndependentOfWorkerCount) {
  const double k = 8.0;
  const auto problem = kd(k);
  const auto t = TrainingSet::from(problem, sample(problem, 1500, 100, 5));
  const NetSpec spec{2, 8, Activation::Tanh};
  const auto p = init_params(spec, 1, k);
  LossOptions one, four;
  four.workers = 4;
  const auto a = loss_and_grad(p, spec, t, one), b = loss_and_grad(p, spec, t, four);
  EXPECT_EQ(a.loss, b.loss);
  EXPECT_EQ(a.grad, b.grad);
}

TEST(Network, PlaneWaveFastPathMatchesJets) {
  const double k = 9.0;
  const auto problem = kd(k);
  const auto t = TrainingSet::from(problem, sample(problem, 300, 30, 7));
  const NetSpec spec{1, 11, Activation::ExpI};
  auto p = init_params(spec, 6, k);
  // Move off the wavenumber circle and switch on the biases so every term is live.
  auto theta = p.flatten();
  Xorshift64Star rng(9);
  for (auto& v : theta) v += rng.uniform(-0.3, 0.3);
  p = NetParams::unflatten(spec, theta);
  LossOptions fast, jets;
  fast.lambda = jets.lambda = 2.5;
  jets.plane_wave_fast_path = false;
  const auto a = loss_and_grad(p, spec, t, fast), b = loss_and_grad(p, spec, t, jets);
  EXPECT_NEAR(a.loss, b.loss, 1e-12 * b.loss);
  for (std::size_t i = 0; i < a.grad.size(); ++i)
    EXPECT_NEAR(a.grad[i], b.grad[i], 1e-10 * std::max(1.0, std::abs(b.grad[i]))) << i;
}

TEST(Network, LossRejectsBadInput) {
  const auto problem = kd(2.0);
  const NetSpec spec{1, 3, Activation::Sin};
  const auto p = init_params(spec, 1, 2.0);
  const auto t = TrainingSet::from(problem, sample(problem, 10, 2, 5));
  LossOptions bad;
  bad.lambda = 0.0;
  EXPECT_THROW(loss_and_grad(p, spec, t, bad), std::invalid_argument);
  const auto empty = TrainingSet::from(problem, sample(problem, 0, 2, 5));
  EXPECT_THROW(loss_parts(p, spec, empty), std::invalid_argument);
}

TEST(Network, AutoLambda) {
  const double k = 10.0;
  const auto problem = kd(k);
  const auto t = TrainingSet::from(problem, sample(problem, 300, 25, 5));
  const NetSpec tann{2, 10, Activation::Tanh};
  const auto p = init_params(tann, 4, k);
  const auto parts = loss_parts(p, tann, t);
  EXPECT_DOUBLE_EQ(auto_lambda(p, tann, t), parts.interior / parts.boundary);
  const NetSpec pwnn{1, 10, Activation::ExpI};
  EXPECT_EQ(auto_lambda(init_params(pwnn, 4, k), pwnn, t), 1.0);
}

}  // namespace
