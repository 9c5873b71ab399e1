#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <stdexcept>
#include <vector>

#include "pwnn/network.hpp"
#include "pwnn/problems.hpp"
#include "pwnn/pwpum.hpp"

namespace pwnn {

using Field = std::function<Cplx(Vec2)>;

/// Cell-centred rows x cols grid, row-major, row 0 at y_min.
struct EvalGrid {
  int rows = 100;
  int cols = 100;
  std::vector<Vec2> points;

  static EvalGrid cell_centres(const RectDomain& d, int rows = 100, int cols = 100) {
    if (rows < 1 || cols < 1) throw std::invalid_argument("EvalGrid: empty grid");
    EvalGrid g;
    g.rows = rows;
    g.cols = cols;
    g.points.reserve(std::size_t(rows) * std::size_t(cols));
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c)
        g.points.push_back({d.x_min + (c + 0.5) * d.width() / cols, d.y_min + (r + 0.5) * d.height() / rows});
    return g;
  }
};

/// || |u*| - |u_h| ||_2 / || |u*| ||_2 over the grid. Phase-blind.
inline double relative_modulus_l2(const Field& uh, const HelmholtzProblem& problem, const EvalGrid& grid) {
  double num = 0.0, den = 0.0;
  for (const auto& x : grid.points) {
    const double a = std::abs(exact_value(problem, x));
    const double b = std::abs(uh(x));
    num += (a - b) * (a - b);
    den += a * a;
  }
  if (!(den > 0.0)) throw std::domain_error("relative_modulus_l2: exact solution vanishes on the grid");
  return std::sqrt(num / den);
}

/// || u* - u_h ||_2 / || u* ||_2. Diagnostic only; sensitive to global phase.
inline double relative_complex_l2(const Field& uh, const HelmholtzProblem& problem, const EvalGrid& grid) {
  double num = 0.0, den = 0.0;
  for (const auto& x : grid.points) {
    const Cplx a = exact_value(problem, x);
    num += std::norm(a - uh(x));
    den += std::norm(a);
  }
  if (!(den > 0.0)) throw std::domain_error("relative_complex_l2: exact solution vanishes on the grid");
  return std::sqrt(num / den);
}

/// -log10(eps); +inf for eps == 0.
inline double accuracy(double eps) {
  if (eps < 0.0 || std::isnan(eps)) throw std::domain_error("accuracy: negative error");
  if (eps == 0.0) return std::numeric_limits<double>::infinity();
  return -std::log10(eps);
}

struct DirectionMatch {
  int true_index = -1;
  int learned_index = -1;
  double angle_error_deg = 0.0;
};

struct DirectionReport {
  std::vector<DirectionMatch> matches;
  std::vector<int> unmatched_learned;
  std::vector<double> learned_amplitudes;  // |w_i| / k
  double mean_error_deg = 0.0;
  double max_error_deg = 0.0;
};

/// Greedy nearest-angle matching: the globally closest (true, learned) pair
/// among the unmatched ones is fixed first.
inline DirectionReport direction_report(const std::vector<Vec2>& learned, const std::vector<Vec2>& truth, double k) {
  if (learned.empty() || truth.empty()) throw std::invalid_argument("direction_report: empty direction list");
  auto angle_between = [](Vec2 a, Vec2 b) {
    const double cross = a.x * b.y - a.y * b.x;
    return std::abs(std::atan2(cross, dot(a, b))) * 180.0 / kPi;
  };
  DirectionReport rep;
  for (const auto& w : learned) rep.learned_amplitudes.push_back(w.norm() / k);

  std::vector<bool> t_used(truth.size(), false), l_used(learned.size(), false);
  const std::size_t pairs = std::min(truth.size(), learned.size());
  for (std::size_t n = 0; n < pairs; ++n) {
    double best = std::numeric_limits<double>::infinity();
    int bt = -1, bl = -1;
    for (std::size_t t = 0; t < truth.size(); ++t) {
      if (t_used[t]) continue;
      for (std::size_t l = 0; l < learned.size(); ++l) {
        if (l_used[l]) continue;
        const double a = angle_between(truth[t], learned[l]);
        if (a < best) {
          best = a;
          bt = int(t);
          bl = int(l);
        }
      }
    }
    t_used[std::size_t(bt)] = l_used[std::size_t(bl)] = true;
    rep.matches.push_back({bt, bl, best});
  }
  std::sort(rep.matches.begin(), rep.matches.end(),
            [](const DirectionMatch& a, const DirectionMatch& b) { return a.true_index < b.true_index; });
  for (std::size_t l = 0; l < learned.size(); ++l)
    if (!l_used[l]) rep.unmatched_learned.push_back(int(l));
  double sum = 0.0;
  for (const auto& m : rep.matches) {
    sum += m.angle_error_deg;
    rep.max_error_deg = std::max(rep.max_error_deg, m.angle_error_deg);
  }
  rep.mean_error_deg = sum / double(rep.matches.size());
  return rep;
}

inline DirectionReport direction_report(const PWBasis& learned, const std::vector<Vec2>& truth) {
  return direction_report(learned.wavevectors, truth, learned.k);
}

inline DirectionReport direction_report(const NetParams& one_layer, const std::vector<Vec2>& truth, double k) {
  if (one_layer.hidden.size() != 1) throw std::invalid_argument("direction_report: need a one-layer net");
  std::vector<Vec2> w;
  const auto& h = one_layer.hidden.front();
  for (int i = 0; i < h.rows; ++i) w.push_back({h.w(i, 0), h.w(i, 1)});
  return direction_report(w, truth, k);
}

struct FieldGrids {
  int rows = 0;
  int cols = 0;
  std::vector<double> real;
  std::vector<double> imag;
};

inline FieldGrids field_grids(const Field& u, const EvalGrid& grid) {
  FieldGrids f{grid.rows, grid.cols, {}, {}};
  f.real.reserve(grid.points.size());
  f.imag.reserve(grid.points.size());
  for (const auto& x : grid.points) {
    const Cplx v = u(x);
    f.real.push_back(v.real());
    f.imag.push_back(v.imag());
  }
  return f;
}

/// Fields for the solver outputs.
inline Field as_field(const NetParams& p, const NetSpec& spec) {
  auto ws = std::make_shared<detail::Workspace>(spec);
  return [p, spec, ws](Vec2 x) { return detail::forward_jets(p, spec, x, false, *ws).v; };
}

inline Field as_field(const PWSolution& s) {
  return [s](Vec2 x) { return evaluate(s, x); };
}

inline Field exact_field(const HelmholtzProblem& p) {
  return [p](Vec2 x) { return exact_value(p, x); };
}

}  // namespace pwnn
