#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "pwnn/jets.hpp"
#include "pwnn/problems.hpp"
#include "pwnn/specfun.hpp"

namespace pwnn {

enum class Activation { Tanh, Sin, ExpI };

inline std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::Tanh: return "tanh";
    case Activation::Sin: return "sin";
    case Activation::ExpI: return "expi";
  }
  return "?";
}

inline Activation activation_from_string(std::string_view s) {
  if (s == "tanh") return Activation::Tanh;
  if (s == "sin") return Activation::Sin;
  if (s == "expi") return Activation::ExpI;
  throw std::invalid_argument("unknown activation '" + std::string(s) + "'");
}

struct NetSpec {
  int hidden_layers = 1;
  int units = 10;
  Activation activation = Activation::ExpI;

  static constexpr int kInputDim = 2;

  void validate() const {
    if (hidden_layers < 1) throw std::invalid_argument("NetSpec: hidden_layers must be >= 1");
    if (units < 1) throw std::invalid_argument("NetSpec: units must be >= 1");
  }
  int fan_in(int layer) const { return layer == 0 ? kInputDim : units; }

  /// Number of real parameters; the complex output layer counts twice.
  std::size_t param_count() const {
    std::size_t p = 0;
    for (int l = 0; l < hidden_layers; ++l) p += std::size_t(units) * std::size_t(fan_in(l) + 1);
    return p + 2 * std::size_t(units + 1);
  }
  friend bool operator==(const NetSpec&, const NetSpec&) = default;
};

/// Real hidden transform; weights row-major (units x fan_in).
struct HiddenLayer {
  int rows = 0;
  int cols = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  double w(int i, int j) const { return weights[std::size_t(i) * std::size_t(cols) + std::size_t(j)]; }
  double& w(int i, int j) { return weights[std::size_t(i) * std::size_t(cols) + std::size_t(j)]; }
};

struct NetParams {
  std::vector<HiddenLayer> hidden;
  std::vector<Cplx> out_weights;
  Cplx out_bias{};

  static NetParams zeros(const NetSpec& spec) {
    spec.validate();
    NetParams p;
    for (int l = 0; l < spec.hidden_layers; ++l) {
      HiddenLayer h;
      h.rows = spec.units;
      h.cols = spec.fan_in(l);
      h.weights.assign(std::size_t(h.rows) * std::size_t(h.cols), 0.0);
      h.bias.assign(std::size_t(h.rows), 0.0);
      p.hidden.push_back(std::move(h));
    }
    p.out_weights.assign(std::size_t(spec.units), Cplx{});
    return p;
  }

  /// Layout: per hidden layer W (row-major) then b; then output weights as
  /// interleaved (re, im) pairs; then output bias (re, im).
  std::vector<double> flatten() const {
    std::vector<double> theta;
    for (const auto& h : hidden) {
      theta.insert(theta.end(), h.weights.begin(), h.weights.end());
      theta.insert(theta.end(), h.bias.begin(), h.bias.end());
    }
    for (const auto& w : out_weights) {
      theta.push_back(w.real());
      theta.push_back(w.imag());
    }
    theta.push_back(out_bias.real());
    theta.push_back(out_bias.imag());
    return theta;
  }

  static NetParams unflatten(const NetSpec& spec, std::span<const double> theta) {
    if (theta.size() != spec.param_count())
      throw std::invalid_argument("unflatten: expected " + std::to_string(spec.param_count()) + " parameters, got " +
                                  std::to_string(theta.size()));
    NetParams p = zeros(spec);
    std::size_t at = 0;
    for (auto& h : p.hidden) {
      for (auto& w : h.weights) w = theta[at++];
      for (auto& b : h.bias) b = theta[at++];
    }
    for (auto& w : p.out_weights) {
      w = {theta[at], theta[at + 1]};
      at += 2;
    }
    p.out_bias = {theta[at], theta[at + 1]};
    return p;
  }
};

/// Deterministic initialization. Tanh/Sin: Glorot-uniform weights, zero
/// biases, and for Sin a first layer scaled by k. ExpI: first-layer rows are
/// wavevectors of norm k at uniform random angles, remaining weights uniform
/// on +-0.1.
inline NetParams init_params(const NetSpec& spec, std::uint64_t seed, double k) {
  NetParams p = NetParams::zeros(spec);
  Xorshift64Star rng(seed);
  auto glorot = [&](double fan_in, double fan_out) {
    const double a = std::sqrt(6.0 / (fan_in + fan_out));
    return rng.uniform(-a, a);
  };
  for (int l = 0; l < spec.hidden_layers; ++l) {
    auto& h = p.hidden[std::size_t(l)];
    if (spec.activation == Activation::ExpI) {
      if (l == 0) {
        for (int i = 0; i < h.rows; ++i) {
          const double phi = 2.0 * kPi * rng.uniform();
          h.w(i, 0) = k * std::cos(phi);
          h.w(i, 1) = k * std::sin(phi);
        }
      } else {
        for (auto& w : h.weights) w = rng.uniform(-0.1, 0.1);
      }
    } else {
      const double scale = (spec.activation == Activation::Sin && l == 0) ? k : 1.0;
      for (auto& w : h.weights) w = scale * glorot(h.cols, h.rows);
    }
  }
  for (auto& w : p.out_weights) {
    if (spec.activation == Activation::ExpI) {
      const double re = rng.uniform(-0.1, 0.1);
      w = {re, rng.uniform(-0.1, 0.1)};
    } else {
      const double re = glorot(spec.units, 1);
      w = {re, glorot(spec.units, 1)};
    }
  }
  return p;
}

namespace detail {

struct ActDerivs {
  Cplx f, f1, f2, f3;
};

// Activation and its first three derivatives; the third is needed by the
// reverse pass through second-order jets.
inline ActDerivs activate(Activation act, Cplx z) {
  const bool real = z.imag() == 0.0;
  switch (act) {
    case Activation::Tanh: {
      const Cplx t = real ? Cplx{std::tanh(z.real())} : std::tanh(z);
      const Cplx t1 = 1.0 - t * t;
      return {t, t1, -2.0 * t * t1, -2.0 * t1 * (t1 - 2.0 * t * t)};
    }
    case Activation::Sin: {
      Cplx s, c;
      if (real) {
        s = std::sin(z.real());
        c = std::cos(z.real());
      } else {
        s = std::sin(z);
        c = std::cos(z);
      }
      return {s, c, -s, -c};
    }
    case Activation::ExpI: {
      const Cplx e = real ? std::polar(1.0, z.real()) : std::exp(kI * z);
      const Cplx ie = kI * e;
      return {e, ie, -e, -ie};
    }
  }
  return {};
}

inline Cplx cmul_conj(Cplx a, Cplx b) {  // conj(a) * b
  return {a.real() * b.real() + a.imag() * b.imag(), a.real() * b.imag() - a.imag() * b.real()};
}

// Per-layer jet storage for one point: value shared by both directional
// passes, first and second derivatives along x (index 0) and y (index 1).
struct JetLayer {
  std::vector<Cplx> v, d0, d1, dd0, dd1;
  void resize(int n) {
    for (auto* a : {&v, &d0, &d1, &dd0, &dd1}) a->assign(std::size_t(n), Cplx{});
  }
};

struct OutJet {
  Cplx v, d0, d1, dd0, dd1;
};

struct Workspace {
  std::vector<JetLayer> pre;   // pre-activation per hidden layer
  std::vector<JetLayer> post;  // post-activation per hidden layer
  std::vector<std::vector<ActDerivs>> acts;
  JetLayer g_post, g_pre;
  std::vector<std::size_t> offset;  // start of each layer in the flat gradient

  explicit Workspace(const NetSpec& spec) {
    std::size_t at = 0;
    for (int l = 0; l < spec.hidden_layers; ++l) {
      offset.push_back(at);
      at += std::size_t(spec.units) * std::size_t(spec.fan_in(l) + 1);
    }
    offset.push_back(at);
    pre.resize(std::size_t(spec.hidden_layers));
    post.resize(std::size_t(spec.hidden_layers));
    acts.resize(std::size_t(spec.hidden_layers));
    for (int l = 0; l < spec.hidden_layers; ++l) {
      pre[std::size_t(l)].resize(spec.units);
      post[std::size_t(l)].resize(spec.units);
      acts[std::size_t(l)].resize(std::size_t(spec.units));
    }
    g_post.resize(spec.units);
    g_pre.resize(spec.units);
  }
};

// Forward pass carrying the two directional jets. With second_order false the
// dd components are left untouched (zero) and skipped.
inline OutJet forward_jets(const NetParams& p, const NetSpec& spec, Vec2 x, bool second_order, Workspace& ws) {
  const int n = spec.units;
  for (int l = 0; l < spec.hidden_layers; ++l) {
    const auto& layer = p.hidden[std::size_t(l)];
    auto& a = ws.pre[std::size_t(l)];
    if (l == 0) {
      for (int i = 0; i < n; ++i) {
        a.v[i] = layer.w(i, 0) * x.x + layer.w(i, 1) * x.y + layer.bias[std::size_t(i)];
        a.d0[i] = layer.w(i, 0);
        a.d1[i] = layer.w(i, 1);
        a.dd0[i] = 0.0;
        a.dd1[i] = 0.0;
      }
    } else {
      const auto& z = ws.post[std::size_t(l - 1)];
      for (int i = 0; i < n; ++i) {
        Cplx v = layer.bias[std::size_t(i)], d0{}, d1{}, dd0{}, dd1{};
        for (int j = 0; j < n; ++j) {
          const double w = layer.w(i, j);
          v += w * z.v[j];
          d0 += w * z.d0[j];
          d1 += w * z.d1[j];
          if (second_order) {
            dd0 += w * z.dd0[j];
            dd1 += w * z.dd1[j];
          }
        }
        a.v[i] = v;
        a.d0[i] = d0;
        a.d1[i] = d1;
        a.dd0[i] = dd0;
        a.dd1[i] = dd1;
      }
    }
    auto& z = ws.post[std::size_t(l)];
    auto& acts = ws.acts[std::size_t(l)];
    for (int i = 0; i < n; ++i) {
      const auto ad = activate(spec.activation, a.v[i]);
      acts[std::size_t(i)] = ad;
      z.v[i] = ad.f;
      z.d0[i] = ad.f1 * a.d0[i];
      z.d1[i] = ad.f1 * a.d1[i];
      if (second_order) {
        z.dd0[i] = ad.f2 * a.d0[i] * a.d0[i] + ad.f1 * a.dd0[i];
        z.dd1[i] = ad.f2 * a.d1[i] * a.d1[i] + ad.f1 * a.dd1[i];
      }
    }
  }
  const auto& z = ws.post.back();
  OutJet h{p.out_bias, 0.0, 0.0, 0.0, 0.0};
  for (int j = 0; j < n; ++j) {
    const Cplx w = p.out_weights[std::size_t(j)];
    h.v += w * z.v[j];
    h.d0 += w * z.d0[j];
    h.d1 += w * z.d1[j];
    if (second_order) {
      h.dd0 += w * z.dd0[j];
      h.dd1 += w * z.dd1[j];
    }
  }
  return h;
}

// Reverse accumulation of a real loss whose cotangents with respect to the
// output jet components are `g` (convention: g = dL/dRe + i dL/dIm). Adds
// into grad, laid out as NetParams::flatten.
inline void backward_jets(const NetParams& p, const NetSpec& spec, Vec2 x, bool second_order, const OutJet& g,
                          Workspace& ws, std::span<double> grad) {
  const int n = spec.units;
  const int layers = spec.hidden_layers;

  const auto& offset = ws.offset;
  const std::size_t at = offset[std::size_t(layers)];

  // Output layer.
  {
    const auto& z = ws.post.back();
    auto& gz = ws.g_post;
    for (int j = 0; j < n; ++j) {
      Cplx gw = g.v * std::conj(z.v[j]) + g.d0 * std::conj(z.d0[j]) + g.d1 * std::conj(z.d1[j]);
      if (second_order) gw += g.dd0 * std::conj(z.dd0[j]) + g.dd1 * std::conj(z.dd1[j]);
      grad[at + 2 * std::size_t(j)] += gw.real();
      grad[at + 2 * std::size_t(j) + 1] += gw.imag();
      const Cplx wc = std::conj(p.out_weights[std::size_t(j)]);
      gz.v[j] = wc * g.v;
      gz.d0[j] = wc * g.d0;
      gz.d1[j] = wc * g.d1;
      gz.dd0[j] = second_order ? wc * g.dd0 : Cplx{};
      gz.dd1[j] = second_order ? wc * g.dd1 : Cplx{};
    }
    grad[at + 2 * std::size_t(n)] += g.v.real();
    grad[at + 2 * std::size_t(n) + 1] += g.v.imag();
  }

  for (int l = layers - 1; l >= 0; --l) {
    const auto& a = ws.pre[std::size_t(l)];
    const auto& acts = ws.acts[std::size_t(l)];
    auto& gz = ws.g_post;
    auto& ga = ws.g_pre;
    // Through the activation.
    for (int i = 0; i < n; ++i) {
      const auto& ad = acts[std::size_t(i)];
      Cplx gv = cmul_conj(ad.f1, gz.v[i]) + cmul_conj(ad.f2 * a.d0[i], gz.d0[i]) + cmul_conj(ad.f2 * a.d1[i], gz.d1[i]);
      Cplx gd0 = cmul_conj(ad.f1, gz.d0[i]);
      Cplx gd1 = cmul_conj(ad.f1, gz.d1[i]);
      if (second_order) {
        gv += cmul_conj(ad.f3 * a.d0[i] * a.d0[i] + ad.f2 * a.dd0[i], gz.dd0[i]);
        gv += cmul_conj(ad.f3 * a.d1[i] * a.d1[i] + ad.f2 * a.dd1[i], gz.dd1[i]);
        gd0 += cmul_conj(2.0 * ad.f2 * a.d0[i], gz.dd0[i]);
        gd1 += cmul_conj(2.0 * ad.f2 * a.d1[i], gz.dd1[i]);
        ga.dd0[i] = cmul_conj(ad.f1, gz.dd0[i]);
        ga.dd1[i] = cmul_conj(ad.f1, gz.dd1[i]);
      } else {
        ga.dd0[i] = 0.0;
        ga.dd1[i] = 0.0;
      }
      ga.v[i] = gv;
      ga.d0[i] = gd0;
      ga.d1[i] = gd1;
    }
    // Through the real linear map.
    const auto& layer = p.hidden[std::size_t(l)];
    const std::size_t base = offset[std::size_t(l)];
    const int cols = layer.cols;
    const std::size_t bias_at = base + std::size_t(n) * std::size_t(cols);
    if (l == 0) {
      for (int i = 0; i < n; ++i) {
        const double gv = ga.v[i].real();
        grad[base + std::size_t(i) * 2] += gv * x.x + ga.d0[i].real();
        grad[base + std::size_t(i) * 2 + 1] += gv * x.y + ga.d1[i].real();
        grad[bias_at + std::size_t(i)] += gv;
      }
    } else {
      const auto& z = ws.post[std::size_t(l - 1)];
      for (int i = 0; i < n; ++i) {
        const std::size_t row = base + std::size_t(i) * std::size_t(cols);
        for (int j = 0; j < cols; ++j) {
          double s = (ga.v[i] * std::conj(z.v[j])).real() + (ga.d0[i] * std::conj(z.d0[j])).real() +
                     (ga.d1[i] * std::conj(z.d1[j])).real();
          if (second_order)
            s += (ga.dd0[i] * std::conj(z.dd0[j])).real() + (ga.dd1[i] * std::conj(z.dd1[j])).real();
          grad[row + std::size_t(j)] += s;
        }
        grad[bias_at + std::size_t(i)] += ga.v[i].real();
      }
      // Cotangent of the previous post-activation: W^T ga.
      for (int j = 0; j < n; ++j) {
        Cplx v{}, d0{}, d1{}, dd0{}, dd1{};
        for (int i = 0; i < n; ++i) {
          const double w = layer.w(i, j);
          v += w * ga.v[i];
          d0 += w * ga.d0[i];
          d1 += w * ga.d1[i];
          if (second_order) {
            dd0 += w * ga.dd0[i];
            dd1 += w * ga.dd1[i];
          }
        }
        gz.v[j] = v;
        gz.d0[j] = d0;
        gz.d1[j] = d1;
        gz.dd0[j] = dd0;
        gz.dd1[j] = dd1;
      }
    }
  }
}

}  // namespace detail

inline Cplx forward(const NetParams& p, const NetSpec& spec, Vec2 x) {
  detail::Workspace ws(spec);
  return detail::forward_jets(p, spec, x, false, ws).v;
}

/// Laplacian(h) + k^2 h at x, from two directional second-order passes.
inline Cplx helmholtz_residual(const NetParams& p, const NetSpec& spec, Vec2 x, double k) {
  detail::Workspace ws(spec);
  const auto h = detail::forward_jets(p, spec, x, true, ws);
  return h.dd0 + h.dd1 + k * k * h.v;
}

/// grad(h).n + i k h - g at a boundary point.
inline Cplx boundary_residual(const NetParams& p, const NetSpec& spec, Vec2 x, Vec2 normal, double k, Cplx g_value) {
  detail::Workspace ws(spec);
  const auto h = detail::forward_jets(p, spec, x, false, ws);
  return h.d0 * normal.x + h.d1 * normal.y + kI * k * h.v - g_value;
}

/// Collocation data with the boundary right-hand side precomputed.
struct TrainingSet {
  std::vector<Vec2> interior;
  std::vector<BoundarySample> boundary;
  std::vector<Cplx> g;
  double k = 1.0;

  static TrainingSet from(const HelmholtzProblem& problem, const SampleSet& s) {
    TrainingSet t;
    t.interior = s.interior;
    t.boundary = s.boundary;
    t.k = problem.k;
    t.g.reserve(s.boundary.size());
    for (const auto& b : s.boundary) t.g.push_back(boundary_g(problem, b.point, b.normal));
    return t;
  }
};

struct LossParts {
  double interior = 0.0;  // mean |r_f|^2
  double boundary = 0.0;  // mean |r_g|^2
};

struct LossOptions {
  double lambda = 1.0;
  int workers = 1;
  /// Points per reduction shard. Shard boundaries do not depend on the
  /// worker count, so the summation order is fixed.
  int shard_size = 512;
  /// Closed-form residuals for one-layer plane-wave nets instead of jets.
  bool plane_wave_fast_path = true;
};

namespace detail {

// Accumulates loss parts (and optionally the gradient) over a contiguous
// range of the concatenated [interior, boundary] point list.
inline void accumulate_range(const NetParams& p, const NetSpec& spec, const TrainingSet& t, double wf, double wg,
                             std::size_t begin, std::size_t end, bool want_grad, LossParts& parts,
                             std::span<double> grad) {
  Workspace ws(spec);
  const std::size_t nf = t.interior.size();
  const double k2 = t.k * t.k;
  for (std::size_t idx = begin; idx < end; ++idx) {
    if (idx < nf) {
      const Vec2 x = t.interior[idx];
      const auto h = forward_jets(p, spec, x, true, ws);
      const Cplx r = h.dd0 + h.dd1 + k2 * h.v;
      parts.interior += std::norm(r);
      if (want_grad) {
        const Cplx gr = 2.0 * wf * r;
        backward_jets(p, spec, x, true, OutJet{k2 * gr, 0.0, 0.0, gr, gr}, ws, grad);
      }
    } else {
      const std::size_t b = idx - nf;
      const auto& s = t.boundary[b];
      const auto h = forward_jets(p, spec, s.point, false, ws);
      const Cplx r = h.d0 * s.normal.x + h.d1 * s.normal.y + kI * t.k * h.v - t.g[b];
      parts.boundary += std::norm(r);
      if (want_grad) {
        const Cplx gr = 2.0 * wg * r;
        // d r / d v = i k, so the value cotangent is conj(i k) * gr.
        backward_jets(p, spec, s.point, false, OutJet{-kI * t.k * gr, s.normal.x * gr, s.normal.y * gr, 0.0, 0.0},
                      ws, grad);
      }
    }
  }
}

// One hidden ExpI layer: h = sum_j c_j E_j + c0 with E_j = exp(i(w_j.x + b_j)),
// so both residuals and their parameter derivatives are closed-form.
inline void accumulate_range_plane_wave(const NetParams& p, const TrainingSet& t, double wf, double wg,
                                        std::size_t begin, std::size_t end, bool want_grad, LossParts& parts,
                                        std::span<double> grad) {
  const auto& layer = p.hidden.front();
  const int n = layer.rows;
  const std::size_t nf = t.interior.size();
  const double k = t.k, k2 = k * k;
  const std::size_t bias_at = 2 * std::size_t(n), out_at = 3 * std::size_t(n);
  const auto units = static_cast<std::size_t>(n);
  std::vector<Cplx> e(units), ce(units);
  std::vector<double> a(units);
  for (int j = 0; j < n; ++j) a[std::size_t(j)] = k2 - layer.w(j, 0) * layer.w(j, 0) - layer.w(j, 1) * layer.w(j, 1);
  const Cplx c0 = p.out_bias;
  for (std::size_t idx = begin; idx < end; ++idx) {
    const bool interior = idx < nf;
    const Vec2 x = interior ? t.interior[idx] : t.boundary[idx - nf].point;
    for (int j = 0; j < n; ++j) {
      const std::size_t u = std::size_t(j);
      e[u] = std::polar(1.0, layer.w(j, 0) * x.x + layer.w(j, 1) * x.y + layer.bias[u]);
      ce[u] = p.out_weights[u] * e[u];
    }
    if (interior) {
      Cplx r = k2 * c0;
      for (int j = 0; j < n; ++j) r += a[std::size_t(j)] * ce[std::size_t(j)];
      parts.interior += std::norm(r);
      if (!want_grad) continue;
      const Cplx gr = 2.0 * wf * r;
      for (int j = 0; j < n; ++j) {
        const std::size_t u = std::size_t(j);
        const double aj = a[u];
        // dr/dw_x = c_j E_j (-2 w_x + i a_j x); dr/db = i a_j c_j E_j.
        const Cplx dwx = ce[u] * Cplx(-2.0 * layer.w(j, 0), aj * x.x);
        const Cplx dwy = ce[u] * Cplx(-2.0 * layer.w(j, 1), aj * x.y);
        grad[2 * u] += (gr * std::conj(dwx)).real();
        grad[2 * u + 1] += (gr * std::conj(dwy)).real();
        grad[bias_at + u] += (gr * std::conj(kI * aj * ce[u])).real();
        const Cplx gc = gr * std::conj(aj * e[u]);
        grad[out_at + 2 * u] += gc.real();
        grad[out_at + 2 * u + 1] += gc.imag();
      }
      const Cplx gb = gr * k2;
      grad[out_at + 2 * std::size_t(n)] += gb.real();
      grad[out_at + 2 * std::size_t(n) + 1] += gb.imag();
    } else {
      const std::size_t b = idx - nf;
      const Vec2 nv = t.boundary[b].normal;
      Cplx r = kI * k * c0 - t.g[b];
      for (int j = 0; j < n; ++j) {
        const double s = layer.w(j, 0) * nv.x + layer.w(j, 1) * nv.y + k;
        r += kI * s * ce[std::size_t(j)];
      }
      parts.boundary += std::norm(r);
      if (!want_grad) continue;
      const Cplx gr = 2.0 * wg * r;
      for (int j = 0; j < n; ++j) {
        const std::size_t u = std::size_t(j);
        const double s = layer.w(j, 0) * nv.x + layer.w(j, 1) * nv.y + k;
        // dr/dw_x = i c_j E_j (n_x + i s x); dr/db = -s c_j E_j.
        const Cplx ice = kI * ce[u];
        const Cplx dwx = ice * Cplx(nv.x, s * x.x);
        const Cplx dwy = ice * Cplx(nv.y, s * x.y);
        grad[2 * u] += (gr * std::conj(dwx)).real();
        grad[2 * u + 1] += (gr * std::conj(dwy)).real();
        grad[bias_at + u] += (gr * std::conj(-s * ce[u])).real();
        const Cplx gc = gr * std::conj(kI * s * e[u]);
        grad[out_at + 2 * u] += gc.real();
        grad[out_at + 2 * u + 1] += gc.imag();
      }
      const Cplx gb = gr * std::conj(kI * k);
      grad[out_at + 2 * std::size_t(n)] += gb.real();
      grad[out_at + 2 * std::size_t(n) + 1] += gb.imag();
    }
  }
}

inline LossParts evaluate_loss(const NetParams& p, const NetSpec& spec, const TrainingSet& t, const LossOptions& opt,
                               std::span<double> grad) {
  const std::size_t nf = t.interior.size(), ng = t.boundary.size();
  if (nf == 0 || ng == 0) throw std::invalid_argument("loss: interior and boundary sample sets must be nonempty");
  const double wf = 1.0 / double(nf);
  const double wg = opt.lambda / double(ng);
  const bool want_grad = !grad.empty();
  const std::size_t total = nf + ng;
  const std::size_t shard = std::size_t(std::max(1, opt.shard_size));
  const std::size_t nshards = (total + shard - 1) / shard;

  const bool fast =
      opt.plane_wave_fast_path && spec.hidden_layers == 1 && spec.activation == Activation::ExpI;
  std::vector<LossParts> parts(nshards);
  std::vector<std::vector<double>> grads(want_grad ? nshards : 0);
  auto run_shard = [&](std::size_t s) {
    if (want_grad) grads[s].assign(grad.size(), 0.0);
    const std::size_t lo = s * shard, hi = std::min(total, (s + 1) * shard);
    const auto g = want_grad ? std::span<double>(grads[s]) : std::span<double>();
    if (fast)
      accumulate_range_plane_wave(p, t, wf, wg, lo, hi, want_grad, parts[s], g);
    else
      accumulate_range(p, spec, t, wf, wg, lo, hi, want_grad, parts[s], g);
  };
  const int workers = std::max(1, std::min<int>(opt.workers, int(nshards)));
  if (workers == 1) {
    for (std::size_t s = 0; s < nshards; ++s) run_shard(s);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t s = std::size_t(w); s < nshards; s += std::size_t(workers)) run_shard(s);
      });
    for (auto& th : pool) th.join();
  }

  LossParts total_parts;
  for (std::size_t s = 0; s < nshards; ++s) {
    total_parts.interior += parts[s].interior;
    total_parts.boundary += parts[s].boundary;
    if (want_grad)
      for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += grads[s][i];
  }
  total_parts.interior *= wf;
  total_parts.boundary /= double(ng);
  return total_parts;
}

}  // namespace detail

inline LossParts loss_parts(const NetParams& p, const NetSpec& spec, const TrainingSet& t, int workers = 1) {
  LossOptions opt;
  opt.workers = workers;
  return detail::evaluate_loss(p, spec, t, opt, {});
}

struct LossAndGrad {
  double loss = 0.0;
  std::vector<double> grad;
};

/// M = mean|r_f|^2 + lambda * mean|r_g|^2 and its exact gradient with
/// respect to the flattened parameters.
inline LossAndGrad loss_and_grad(const NetParams& p, const NetSpec& spec, const TrainingSet& t,
                                 const LossOptions& opt) {
  if (!(opt.lambda > 0.0)) throw std::invalid_argument("loss_and_grad: lambda must be positive");
  LossAndGrad out;
  out.grad.assign(spec.param_count(), 0.0);
  const auto parts = detail::evaluate_loss(p, spec, t, opt, out.grad);
  out.loss = parts.interior + opt.lambda * parts.boundary;
  return out;
}

/// Boundary weight that puts both loss terms on the same scale at theta0.
/// Falls back to 1 when the interior term is negligible, which happens for a
/// one-layer plane-wave net initialized exactly on the wavenumber circle.
inline double auto_lambda(const NetParams& p0, const NetSpec& spec, const TrainingSet& t) {
  const auto parts = loss_parts(p0, spec, t);
  constexpr double kEps = std::numeric_limits<double>::epsilon();
  if (parts.interior <= 1e-10 * std::max(parts.boundary, kEps)) return 1.0;
  return parts.interior / std::max(parts.boundary, kEps);
}

}  // namespace pwnn
