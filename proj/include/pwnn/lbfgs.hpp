#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace pwnn {

struct LbfgsConfig {
  int memory = 50;
  int max_iter = 50000;
  double grad_tol_inf = 2e-16;
  double wolfe_c1 = 1e-4;
  double wolfe_c2 = 0.9;
  int max_line_search_steps = 40;

  void validate() const {
    if (memory < 1) throw std::invalid_argument("lbfgs: memory must be >= 1");
    if (max_iter < 0) throw std::invalid_argument("lbfgs: max_iter must be >= 0");
    if (!(0.0 < wolfe_c1 && wolfe_c1 < wolfe_c2 && wolfe_c2 < 1.0))
      throw std::invalid_argument("lbfgs: need 0 < c1 < c2 < 1");
    if (max_line_search_steps < 1) throw std::invalid_argument("lbfgs: max_line_search_steps must be >= 1");
  }
};

enum class Termination { GradTol, MaxIter, LineSearchFail };

inline std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::GradTol: return "GradTol";
    case Termination::MaxIter: return "MaxIter";
    case Termination::LineSearchFail: return "LineSearchFail";
  }
  return "?";
}

/// Entry 0 of each sequence describes the starting point; entry i > 0 the
/// iterate after step i.
struct OptTrace {
  std::vector<double> loss;
  std::vector<double> grad_inf;
  std::vector<double> step;
  Termination reason = Termination::MaxIter;
  int iterations = 0;
  int evaluations = 0;
};

struct OptResult {
  std::vector<double> x;
  OptTrace trace;
};

/// Objective callback: returns the value and writes the gradient.
using Objective = std::function<double(std::span<const double> x, std::span<double> grad)>;

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double inf_norm(std::span<const double> a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

struct CurvaturePair {
  std::vector<double> s, y;
  double rho;
};

// Two-loop recursion: dir = -H g with H the limited-memory inverse Hessian
// built on the initial scaling gamma = s.y / y.y of the newest pair.
inline void two_loop(const std::deque<CurvaturePair>& mem, std::span<const double> g, std::span<double> dir,
                     std::vector<double>& alpha_buf) {
  const std::size_t n = g.size();
  for (std::size_t i = 0; i < n; ++i) dir[i] = -g[i];
  alpha_buf.assign(mem.size(), 0.0);
  for (std::size_t j = mem.size(); j-- > 0;) {
    const auto& p = mem[j];
    alpha_buf[j] = p.rho * dot(p.s, dir);
    for (std::size_t i = 0; i < n; ++i) dir[i] -= alpha_buf[j] * p.y[i];
  }
  if (!mem.empty()) {
    const auto& last = mem.back();
    const double gamma = dot(last.s, last.y) / dot(last.y, last.y);
    for (auto& d : dir) d *= gamma;
  }
  for (std::size_t j = 0; j < mem.size(); ++j) {
    const auto& p = mem[j];
    const double beta = p.rho * dot(p.y, dir);
    for (std::size_t i = 0; i < n; ++i) dir[i] += (alpha_buf[j] - beta) * p.s[i];
  }
}

// Minimizer of the cubic interpolating (a, fa, da), (b, fb, db); falls back
// to bisection when the cubic has no real minimizer.
inline double cubic_min(double a, double fa, double da, double b, double fb, double db) {
  const double d1 = da + db - 3.0 * (fa - fb) / (a - b);
  const double disc = d1 * d1 - da * db;
  if (!(disc >= 0.0) || !std::isfinite(disc)) return 0.5 * (a + b);
  const double d2 = std::copysign(std::sqrt(disc), b - a);
  const double t = b - (b - a) * (db + d2 - d1) / (db - da + 2.0 * d2);
  return std::isfinite(t) ? t : 0.5 * (a + b);
}

struct LinePoint {
  double alpha = 0.0;
  double f = 0.0;
  double slope = 0.0;
  std::vector<double> g;
};

class LineSearch {
 public:
  LineSearch(const Objective& obj, const LbfgsConfig& cfg, std::span<const double> x0, std::span<const double> dir,
             double f0, double slope0, int& evals)
      : obj_(obj), cfg_(cfg), x0_(x0), dir_(dir), f0_(f0), slope0_(slope0), evals_(evals),
        trial_(x0.size()) {}

  // Strong-Wolfe search (bracket then zoom). Returns false when no point
  // satisfying the sufficient-decrease condition was found.
  bool run(double alpha0, LinePoint& out) {
    LinePoint prev{0.0, f0_, slope0_, {}};
    double alpha = alpha0;
    for (int i = 0; i < cfg_.max_line_search_steps; ++i) {
      LinePoint cur = eval(alpha);
      if (!std::isfinite(cur.f) || cur.f > f0_ + cfg_.wolfe_c1 * alpha * slope0_ || (i > 0 && cur.f >= prev.f))
        return zoom(prev, cur, out);
      if (std::abs(cur.slope) <= -cfg_.wolfe_c2 * slope0_) {
        out = std::move(cur);
        return true;
      }
      if (cur.slope >= 0.0) return zoom(cur, prev, out);
      best_ = cur;
      prev = std::move(cur);
      alpha *= 4.0;
    }
    return accept_best(out);
  }

 private:
  LinePoint eval(double alpha) {
    for (std::size_t i = 0; i < trial_.size(); ++i) trial_[i] = x0_[i] + alpha * dir_[i];
    LinePoint p;
    p.alpha = alpha;
    p.g.assign(trial_.size(), 0.0);
    p.f = obj_(trial_, p.g);
    ++evals_;
    ++used_;
    p.slope = dot(p.g, dir_);
    if (!std::isfinite(p.slope)) p.f = std::numeric_limits<double>::infinity();
    return p;
  }

  bool zoom(LinePoint lo, LinePoint hi, LinePoint& out) {
    if (lo.alpha > 0.0 && lo.f < f0_) best_ = lo;
    while (used_ < cfg_.max_line_search_steps) {
      const double a = lo.alpha, b = hi.alpha;
      const double width = std::abs(b - a);
      if (width <= 1e-15 * std::max(a, b)) break;
      double t = std::isfinite(hi.f) ? cubic_min(a, lo.f, lo.slope, b, hi.f, hi.slope) : 0.5 * (a + b);
      const double lo_b = std::min(a, b) + 0.1 * width, hi_b = std::max(a, b) - 0.1 * width;
      if (!(t >= lo_b && t <= hi_b)) t = 0.5 * (a + b);
      LinePoint cur = eval(t);
      if (!std::isfinite(cur.f) || cur.f > f0_ + cfg_.wolfe_c1 * t * slope0_ || cur.f >= lo.f) {
        hi = std::move(cur);
      } else {
        if (std::abs(cur.slope) <= -cfg_.wolfe_c2 * slope0_) {
          out = std::move(cur);
          return true;
        }
        if (cur.slope * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
        lo = std::move(cur);
        best_ = lo;
      }
    }
    return accept_best(out);
  }

  // Curvature condition not met within budget: settle for the best point
  // that satisfies sufficient decrease.
  bool accept_best(LinePoint& out) {
    if (best_.alpha > 0.0 && best_.f < f0_ && best_.f <= f0_ + cfg_.wolfe_c1 * best_.alpha * slope0_) {
      out = best_;
      return true;
    }
    return false;
  }

  const Objective& obj_;
  const LbfgsConfig& cfg_;
  std::span<const double> x0_;
  std::span<const double> dir_;
  double f0_;
  double slope0_;
  int& evals_;
  int used_ = 0;
  std::vector<double> trial_;
  LinePoint best_;
};

}  // namespace detail

/// Limited-memory BFGS with a strong-Wolfe line search.
///
/// Curvature pairs with s.y <= 1e-12 |s||y| are dropped. A failed line search
/// clears the memory and retries once along steepest descent before giving
/// up with Termination::LineSearchFail.
inline OptResult minimize(const Objective& objective, std::vector<double> x0, const LbfgsConfig& cfg,
                          const std::function<void(const OptTrace&)>& on_iter = {}) {
  cfg.validate();
  const std::size_t n = x0.size();
  OptResult res;
  auto& tr = res.trace;
  std::vector<double> x = std::move(x0);
  std::vector<double> g(n, 0.0);
  double f = objective(x, g);
  tr.evaluations = 1;
  if (!std::isfinite(f) || !std::isfinite(detail::inf_norm(g)))
    throw std::runtime_error("lbfgs: objective is not finite at the starting point");
  tr.loss.push_back(f);
  tr.grad_inf.push_back(detail::inf_norm(g));
  tr.step.push_back(0.0);

  std::deque<detail::CurvaturePair> mem;
  std::vector<double> dir(n), alpha_buf;
  auto two_loop = [&] { detail::two_loop(mem, g, dir, alpha_buf); };

  if (tr.grad_inf.back() < cfg.grad_tol_inf) {
    tr.reason = Termination::GradTol;
    return {std::move(x), std::move(tr)};
  }

  tr.reason = Termination::MaxIter;
  for (int it = 0; it < cfg.max_iter; ++it) {
    detail::LinePoint next;
    bool ok = false;
    for (int attempt = 0; attempt < 2 && !ok; ++attempt) {
      if (attempt == 1) {
        if (mem.empty()) break;
        mem.clear();
      }
      two_loop();
      double slope = detail::dot(g, dir);
      if (!(slope < 0.0)) {
        mem.clear();
        two_loop();
        slope = detail::dot(g, dir);
      }
      if (!(slope < 0.0)) break;
      const double alpha0 = mem.empty() ? 1.0 / (1.0 + std::sqrt(detail::dot(g, g))) : 1.0;
      detail::LineSearch ls(objective, cfg, x, dir, f, slope, tr.evaluations);
      ok = ls.run(alpha0, next);
    }
    if (!ok) {
      tr.reason = Termination::LineSearchFail;
      break;
    }

    detail::CurvaturePair p{std::vector<double>(n), std::vector<double>(n), 0.0};
    for (std::size_t i = 0; i < n; ++i) {
      p.s[i] = next.alpha * dir[i];
      p.y[i] = next.g[i] - g[i];
    }
    const double sy = detail::dot(p.s, p.y);
    const double ns = std::sqrt(detail::dot(p.s, p.s)), ny = std::sqrt(detail::dot(p.y, p.y));
    for (std::size_t i = 0; i < n; ++i) x[i] += p.s[i];
    f = next.f;
    g = std::move(next.g);
    if (sy > 1e-12 * ns * ny && sy > 0.0) {
      p.rho = 1.0 / sy;
      mem.push_back(std::move(p));
      if (int(mem.size()) > cfg.memory) mem.pop_front();
    }

    tr.iterations = it + 1;
    tr.loss.push_back(f);
    tr.grad_inf.push_back(detail::inf_norm(g));
    tr.step.push_back(next.alpha);
    if (on_iter) on_iter(tr);
    if (tr.grad_inf.back() < cfg.grad_tol_inf) {
      tr.reason = Termination::GradTol;
      break;
    }
  }
  return {std::move(x), std::move(tr)};
}

}  // namespace pwnn
