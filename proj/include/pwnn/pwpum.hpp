#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "pwnn/network.hpp"
#include "pwnn/problems.hpp"

namespace pwnn {

using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

/// Plane-wave directions sharing one nominal wavenumber.
struct PWBasis {
  std::vector<Vec2> wavevectors;
  double k = 1.0;

  int size() const { return int(wavevectors.size()); }

  void validate() const {
    if (wavevectors.empty()) throw std::invalid_argument("PWBasis: empty basis");
    for (const auto& w : wavevectors)
      if (std::abs(w.norm() - k) > 1e-12 * std::max(1.0, k))
        throw std::invalid_argument("PWBasis: wavevector norm differs from k");
  }

  /// Every direction turned by alpha: (c w_x + s w_y, -s w_x + c w_y).
  PWBasis rotated(double alpha) const {
    PWBasis r{{}, k};
    const double c = std::cos(alpha), s = std::sin(alpha);
    r.wavevectors.reserve(wavevectors.size());
    for (const auto& w : wavevectors) r.wavevectors.push_back({c * w.x + s * w.y, -s * w.x + c * w.y});
    return r;
  }
};

struct PWSolution {
  PWBasis basis;  // unrotated directions
  std::vector<Cplx> coefficients;
  double rotation = 0.0;
};

/// k_i = (k cos(2 pi i / n), k sin(2 pi i / n)), i = 1..n.
inline PWBasis uniform_basis(int n, double k) {
  if (n < 1) throw std::invalid_argument("uniform_basis: need at least one direction");
  PWBasis b{{}, k};
  for (int i = 1; i <= n; ++i) {
    const double a = 2.0 * kPi * i / n;
    b.wavevectors.push_back({k * std::cos(a), k * std::sin(a)});
  }
  return b;
}

/// Sum_i s_i exp(i k_i(alpha) . x).
inline Cplx evaluate(const PWSolution& sol, Vec2 x) {
  const double c = std::cos(sol.rotation), s = std::sin(sol.rotation);
  Cplx u{};
  for (std::size_t i = 0; i < sol.coefficients.size(); ++i) {
    const auto& w = sol.basis.wavevectors[i];
    const double ph = (c * w.x + s * w.y) * x.x + (-s * w.x + c * w.y) * x.y;
    u += sol.coefficients[i] * std::polar(1.0, ph);
  }
  return u;
}

/// Composite Gauss-Legendre rule on the rectangle boundary.
struct BoundaryQuadrature {
  std::vector<Vec2> points;
  std::vector<Vec2> normals;
  std::vector<double> weights;
};

namespace detail {

// Gauss-Legendre nodes/weights on [-1, 1] by Newton iteration on P_n.
inline void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  x.assign(std::size_t(n), 0.0);
  w.assign(std::size_t(n), 0.0);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 1; j <= n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    x[std::size_t(i)] = -z;
    x[std::size_t(n - 1 - i)] = z;
    w[std::size_t(i)] = w[std::size_t(n - 1 - i)] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
}

inline constexpr int kPanelOrder = 16;

}  // namespace detail

/// Panels of 16-point Gauss-Legendre, enough panels per edge to reach
/// `points_per_wavelength` nodes per wavelength 2 pi / k.
inline BoundaryQuadrature boundary_quadrature(const RectDomain& dom, double k, double points_per_wavelength) {
  if (!(points_per_wavelength >= 1.0))
    throw std::invalid_argument("boundary_quadrature: need at least one point per wavelength");
  std::vector<double> gx, gw;
  detail::gauss_legendre(detail::kPanelOrder, gx, gw);
  const double wavelength = 2.0 * kPi / k;
  BoundaryQuadrature q;
  for (int e = 0; e < 4; ++e) {
    const auto [a, b] = dom.edge(e);
    const double len = (b - a).norm();
    const double wanted = points_per_wavelength * len / wavelength;
    const int panels = std::max(1, int(std::ceil(wanted / detail::kPanelOrder)));
    const Vec2 n = RectDomain::edge_normal(e);
    for (int p = 0; p < panels; ++p) {
      const double t0 = double(p) / panels, t1 = double(p + 1) / panels;
      for (int i = 0; i < detail::kPanelOrder; ++i) {
        const double t = 0.5 * (t0 + t1) + 0.5 * (t1 - t0) * gx[std::size_t(i)];
        q.points.push_back(a + t * (b - a));
        q.normals.push_back(n);
        q.weights.push_back(0.5 * (t1 - t0) * len * gw[std::size_t(i)]);
      }
    }
  }
  return q;
}

inline constexpr double kDefaultPointsPerWavelength = 10.0;

/// Galerkin system of the impedance condition tested with the basis itself:
/// M_ij = int (d phi_j/dn + i k phi_j) conj(phi_i) dS, G_i = int g conj(phi_i) dS.
struct AssembledSystem {
  CMatrix M;
  CVector G;
  double condition_estimate = 0.0;
};

namespace detail {

struct BoundaryBlocks {
  CMatrix E;  // phi_j at quadrature nodes
  CMatrix B;  // impedance trace of phi_j
  CVector g;
  Eigen::VectorXd w;
};

inline BoundaryBlocks boundary_blocks(const PWBasis& basis, const HelmholtzProblem& problem,
                                      const BoundaryQuadrature& q) {
  const Eigen::Index nq = Eigen::Index(q.points.size()), nb = basis.size();
  BoundaryBlocks bl{CMatrix(nq, nb), CMatrix(nq, nb), CVector(nq), Eigen::VectorXd(nq)};
  for (Eigen::Index r = 0; r < nq; ++r) {
    const Vec2 x = q.points[std::size_t(r)], n = q.normals[std::size_t(r)];
    bl.w(r) = q.weights[std::size_t(r)];
    bl.g(r) = boundary_g(problem, x, n);
    for (Eigen::Index j = 0; j < nb; ++j) {
      const Vec2 kj = basis.wavevectors[std::size_t(j)];
      const Cplx e = std::polar(1.0, dot(kj, x));
      bl.E(r, j) = e;
      bl.B(r, j) = kI * (dot(kj, n) + problem.k) * e;
    }
  }
  return bl;
}

// One-norm condition number from an explicit inverse.
inline double condition_one_norm(const CMatrix& M) {
  Eigen::FullPivLU<CMatrix> lu(M);
  if (!lu.isInvertible()) return std::numeric_limits<double>::infinity();
  const CMatrix inv = lu.inverse();
  auto one_norm = [](const CMatrix& A) { return A.cwiseAbs().colwise().sum().maxCoeff(); };
  return one_norm(M) * one_norm(inv);
}

}  // namespace detail

inline AssembledSystem assemble(const PWBasis& basis, const HelmholtzProblem& problem,
                                double points_per_wavelength = kDefaultPointsPerWavelength) {
  basis.validate();
  const auto q = boundary_quadrature(problem.domain, problem.k, points_per_wavelength);
  const auto bl = detail::boundary_blocks(basis, problem, q);
  const CMatrix WE = bl.w.asDiagonal() * bl.E;
  AssembledSystem s;
  s.M = WE.adjoint() * bl.B;
  s.G = WE.adjoint() * bl.g;
  s.condition_estimate = detail::condition_one_norm(s.M);
  return s;
}

struct SolveResult {
  std::vector<Cplx> coefficients;
  double residual_norm = 0.0;
  double regularization = 0.0;
  bool ill_conditioned = false;
};

inline constexpr double kIllConditioned = 1e14;

/// Minimizes |M b - G|^2 + reg |b|^2 by a filtered SVD. A negative `reg`
/// selects the default 1e-12 |M|_2.
inline SolveResult solve(const AssembledSystem& sys, double reg = -1.0) {
  if (sys.M.rows() != sys.M.cols() || sys.M.rows() != sys.G.size())
    throw std::invalid_argument("solve: system must be square");
  Eigen::BDCSVD<CMatrix> svd(sys.M, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double mu = reg < 0.0 ? 1e-12 * (sv.size() ? sv(0) : 0.0) : reg;
  const CVector ug = svd.matrixU().adjoint() * sys.G;
  CVector filtered(sv.size());
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    const double s = sv(i);
    const double denom = s * s + mu;
    filtered(i) = denom > 0.0 ? ug(i) * (s / denom) : Cplx{};
  }
  const CVector beta = svd.matrixV() * filtered;
  SolveResult r;
  r.coefficients.assign(beta.data(), beta.data() + beta.size());
  r.residual_norm = (sys.M * beta - sys.G).norm();
  r.regularization = mu;
  r.ill_conditioned = !(sys.condition_estimate <= kIllConditioned);
  return r;
}

/// Boundary misfit int |B(u) - g|^2 dS of a plane-wave expansion.
inline double boundary_misfit(const PWBasis& basis, const std::vector<Cplx>& coeffs, const HelmholtzProblem& problem,
                              double points_per_wavelength = kDefaultPointsPerWavelength) {
  const auto q = boundary_quadrature(problem.domain, problem.k, points_per_wavelength);
  const auto bl = detail::boundary_blocks(basis, problem, q);
  const CVector beta = Eigen::Map<const CVector>(coeffs.data(), Eigen::Index(coeffs.size()));
  const CVector r = bl.B * beta - bl.g;
  return (bl.w.array() * r.array().abs2()).sum();
}

struct PwpumResult {
  PWSolution solution;
  double condition_estimate = 0.0;
  double residual_norm = 0.0;
  double boundary_misfit = 0.0;
  bool ill_conditioned = false;
};

/// Assemble and solve on a fixed basis.
inline PwpumResult solve_pwpum(const PWBasis& basis, const HelmholtzProblem& problem,
                               double points_per_wavelength = kDefaultPointsPerWavelength, double reg = -1.0) {
  const auto sys = assemble(basis, problem, points_per_wavelength);
  const auto sr = solve(sys, reg);
  PwpumResult r;
  r.solution = {basis, sr.coefficients, 0.0};
  r.condition_estimate = sys.condition_estimate;
  r.residual_norm = sr.residual_norm;
  r.ill_conditioned = sr.ill_conditioned;
  r.boundary_misfit = boundary_misfit(basis, sr.coefficients, problem, points_per_wavelength);
  return r;
}

struct WaveTrackingOptions {
  int alpha_grid = 32;
  double refine_tol = 1e-8;
  double points_per_wavelength = kDefaultPointsPerWavelength;
  double reg = -1.0;
};

/// Wave tracking: one rotation angle shared by the uniform basis, chosen to
/// minimize the boundary misfit of the inner Galerkin solution. The search
/// covers one period [0, 2 pi / n) of the equiangular set.
inline PwpumResult solve_wt(const HelmholtzProblem& problem, int n, const WaveTrackingOptions& opt = {}) {
  if (opt.alpha_grid < 8) throw std::invalid_argument("solve_wt: alpha_grid must be >= 8");
  const PWBasis base = uniform_basis(n, problem.k);
  const double period = 2.0 * kPi / n;

  struct Probe {
    double alpha;
    PwpumResult res;
  };
  auto probe = [&](double alpha) {
    auto r = solve_pwpum(base.rotated(alpha), problem, opt.points_per_wavelength, opt.reg);
    r.solution.basis = base;
    r.solution.rotation = alpha;
    return Probe{alpha, std::move(r)};
  };

  Probe best = probe(0.0);
  for (int i = 1; i < opt.alpha_grid; ++i) {
    Probe p = probe(period * i / opt.alpha_grid);
    if (p.res.boundary_misfit < best.res.boundary_misfit) best = std::move(p);
  }

  // Golden-section refinement around the best grid sample.
  const double h = period / opt.alpha_grid;
  double a = best.alpha - h, b = best.alpha + h;
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - invphi * (b - a), d = a + invphi * (b - a);
  Probe pc = probe(c), pd = probe(d);
  while (b - a > opt.refine_tol) {
    if (pc.res.boundary_misfit < pd.res.boundary_misfit) {
      b = d;
      d = c;
      pd = std::move(pc);
      c = b - invphi * (b - a);
      pc = probe(c);
    } else {
      a = c;
      c = d;
      pc = std::move(pd);
      d = a + invphi * (b - a);
      pd = probe(d);
    }
  }
  for (auto* p : {&pc, &pd})
    if (p->res.boundary_misfit < best.res.boundary_misfit) best = std::move(*p);

  // Report the angle in [0, period).
  double alpha = std::fmod(best.alpha, period);
  if (alpha < 0.0) alpha += period;
  best.res.solution.rotation = alpha;
  return std::move(best.res);
}

/// Directions of a trained one-layer plane-wave net, renormalized to |k_i| = k.
inline PWBasis rebase_from_network(const NetParams& params, double k) {
  if (params.hidden.size() != 1) throw std::invalid_argument("rebase_from_network: need exactly one hidden layer");
  const auto& layer = params.hidden.front();
  PWBasis b{{}, k};
  for (int i = 0; i < layer.rows; ++i) {
    const Vec2 w{layer.w(i, 0), layer.w(i, 1)};
    const double len = w.norm();
    if (len < 1e-10) throw std::invalid_argument("rebase_from_network: zero-norm direction");
    b.wavevectors.push_back({k * w.x / len, k * w.y / len});
  }
  return b;
}

/// Transcribes a one-layer plane-wave net into an expansion: hidden biases
/// fold into the coefficients, a nonzero output bias becomes a zero
/// wavevector term.
inline PWSolution solution_from_network(const NetParams& params) {
  if (params.hidden.size() != 1) throw std::invalid_argument("solution_from_network: need exactly one hidden layer");
  const auto& layer = params.hidden.front();
  PWSolution s;
  s.basis.k = 0.0;
  for (int i = 0; i < layer.rows; ++i) {
    const Vec2 w{layer.w(i, 0), layer.w(i, 1)};
    s.basis.wavevectors.push_back(w);
    s.basis.k = std::max(s.basis.k, w.norm());
    s.coefficients.push_back(params.out_weights[std::size_t(i)] * std::polar(1.0, layer.bias[std::size_t(i)]));
  }
  if (params.out_bias != Cplx{}) {
    s.basis.wavevectors.push_back({0.0, 0.0});
    s.coefficients.push_back(params.out_bias);
  }
  return s;
}

}  // namespace pwnn
