#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <tuple>
#include <vector>

#include "pwnn/evaluation.hpp"
#include "pwnn/lbfgs.hpp"
#include "pwnn/network.hpp"
#include "pwnn/problems.hpp"
#include "pwnn/pwpum.hpp"

namespace pwnn {

enum class Solver { TANN, SIREN, PWNN, PWPUM, PWPUM_WT, PWPUM_OD };

inline std::string_view to_string(Solver s) {
  switch (s) {
    case Solver::TANN: return "TANN";
    case Solver::SIREN: return "SIREN";
    case Solver::PWNN: return "PWNN";
    case Solver::PWPUM: return "PWPUM";
    case Solver::PWPUM_WT: return "PWPUM-WT";
    case Solver::PWPUM_OD: return "PWPUM-OD";
  }
  return "?";
}

inline Solver solver_from_string(std::string_view s) {
  for (auto v : {Solver::TANN, Solver::SIREN, Solver::PWNN, Solver::PWPUM, Solver::PWPUM_WT, Solver::PWPUM_OD})
    if (s == to_string(v)) return v;
  throw std::invalid_argument("unknown solver '" + std::string(s) + "'");
}

inline bool is_network(Solver s) { return s == Solver::TANN || s == Solver::SIREN || s == Solver::PWNN; }

inline Activation activation_of(Solver s) {
  switch (s) {
    case Solver::TANN: return Activation::Tanh;
    case Solver::SIREN: return Activation::Sin;
    default: return Activation::ExpI;
  }
}

/// KD: circular wave of the given order on [0,1]x[-0.5,0.5]. UD: `directions`
/// unit-coefficient plane waves on [-1,1]^2 drawn from `direction_seed`.
struct ProblemSpec {
  bool known_directions = true;
  double k = 10.0;
  int order = 1;
  int directions = 1;
  std::uint64_t direction_seed = 0;

  HelmholtzProblem build() const {
    if (known_directions) return {RectDomain::kd_default(), k, KnownDirections{order}};
    return {RectDomain::ud_default(), k, UnknownDirections{random_directions(directions, k, direction_seed)}};
  }
  std::string kind() const { return known_directions ? "KD" : "UD"; }
};

/// Seeds of the independent random streams of one run.
struct RunSeeds {
  std::uint64_t sample = 0;
  std::uint64_t init = 0;

  static RunSeeds from(std::uint64_t seed) { return {derive_seed(seed, 1), derive_seed(seed, 2)}; }
};

/// Direction seed of a UD trial; shared by every solver of the trial.
inline std::uint64_t trial_direction_seed(std::uint64_t seed) { return derive_seed(seed, 3); }

struct RunSpec {
  Solver solver = Solver::PWNN;
  ProblemSpec problem;
  int layers = 1;
  int units = 10;
  int n_interior = 500;
  int n_per_edge = 50;
  std::optional<double> lambda;  // empty: auto-balance at theta0
  LbfgsConfig lbfgs;
  double points_per_wavelength = kDefaultPointsPerWavelength;
  int alpha_grid = 32;
  double refine_tol = 1e-8;
  int eval_rows = 100;
  int eval_cols = 100;
  std::uint64_t seed = 1;
  int loss_workers = 1;
};

struct ResultRow {
  std::string label;
  Solver solver = Solver::PWNN;
  std::string problem;
  double k = 0.0;
  int order = 0;       // KD only
  int directions = 0;  // UD only
  std::uint64_t direction_seed = 0;
  int layers = 0;
  int units = 0;
  int n_interior = 0;
  int n_boundary = 0;
  std::uint64_t seed = 0;
  double lambda = 0.0;
  double epsilon = std::numeric_limits<double>::quiet_NaN();
  double accuracy = std::numeric_limits<double>::quiet_NaN();
  double epsilon_complex = std::numeric_limits<double>::quiet_NaN();
  int iterations = 0;
  int evaluations = 0;
  std::string termination;
  double final_loss = std::numeric_limits<double>::quiet_NaN();
  double condition = std::numeric_limits<double>::quiet_NaN();
  double rotation = std::numeric_limits<double>::quiet_NaN();
  double dir_mean_deg = std::numeric_limits<double>::quiet_NaN();
  double dir_max_deg = std::numeric_limits<double>::quiet_NaN();
  std::string error;
  double wall_seconds = 0.0;

  bool ok() const { return error.empty(); }
};

struct RunOutput {
  ResultRow row;
  std::optional<NetParams> params;  // network solvers
  NetSpec net;
  OptTrace trace;
  std::optional<PWSolution> expansion;  // PWPUM family
};

namespace detail {

inline ResultRow row_skeleton(const RunSpec& s) {
  ResultRow r;
  r.solver = s.solver;
  r.problem = s.problem.kind();
  r.k = s.problem.k;
  if (s.problem.known_directions) {
    r.order = s.problem.order;
  } else {
    r.directions = s.problem.directions;
    r.direction_seed = s.problem.direction_seed;
  }
  r.units = s.units;
  r.seed = s.seed;
  if (is_network(s.solver) || s.solver == Solver::PWPUM_OD) {
    r.layers = s.layers;
    r.n_interior = s.n_interior;
    r.n_boundary = 4 * s.n_per_edge;
  }
  return r;
}

inline void score(ResultRow& r, const Field& u, const HelmholtzProblem& p, const RunSpec& s) {
  const auto grid = EvalGrid::cell_centres(p.domain, s.eval_rows, s.eval_cols);
  r.epsilon = relative_modulus_l2(u, p, grid);
  r.accuracy = accuracy(r.epsilon);
  r.epsilon_complex = relative_complex_l2(u, p, grid);
}

inline void score_directions(ResultRow& r, const std::vector<Vec2>& learned, const HelmholtzProblem& p) {
  if (const auto* ud = std::get_if<UnknownDirections>(&p.exact)) {
    const auto rep = direction_report(learned, ud->wavevectors, p.k);
    r.dir_mean_deg = rep.mean_error_deg;
    r.dir_max_deg = rep.max_error_deg;
  }
}

inline std::vector<Vec2> first_layer_directions(const NetParams& p) {
  std::vector<Vec2> w;
  const auto& h = p.hidden.front();
  for (int i = 0; i < h.rows; ++i) w.push_back({h.w(i, 0), h.w(i, 1)});
  return w;
}

inline RunOutput train_network(const RunSpec& s, const HelmholtzProblem& problem,
                               const std::function<void(const OptTrace&)>& on_iter) {
  RunOutput out;
  out.row = row_skeleton(s);
  out.row.solver = s.solver == Solver::PWPUM_OD ? Solver::PWNN : s.solver;
  out.net = NetSpec{s.layers, s.units, activation_of(s.solver)};
  out.net.validate();
  const auto seeds = RunSeeds::from(s.seed);
  const auto t = TrainingSet::from(problem, sample(problem, s.n_interior, s.n_per_edge, seeds.sample));
  const NetParams p0 = init_params(out.net, seeds.init, problem.k);
  LossOptions opt;
  opt.lambda = s.lambda ? *s.lambda : auto_lambda(p0, out.net, t);
  opt.workers = s.loss_workers;
  out.row.lambda = opt.lambda;
  const NetSpec net = out.net;
  Objective obj = [&](std::span<const double> x, std::span<double> g) {
    auto lg = loss_and_grad(NetParams::unflatten(net, x), net, t, opt);
    std::copy(lg.grad.begin(), lg.grad.end(), g.begin());
    return lg.loss;
  };
  auto res = minimize(obj, p0.flatten(), s.lbfgs, on_iter);
  out.params = NetParams::unflatten(net, res.x);
  out.trace = std::move(res.trace);
  out.row.iterations = out.trace.iterations;
  out.row.evaluations = out.trace.evaluations;
  out.row.termination = std::string(to_string(out.trace.reason));
  out.row.final_loss = out.trace.loss.back();
  score(out.row, as_field(*out.params, net), problem, s);
  if (s.layers == 1 && net.activation == Activation::ExpI)
    score_directions(out.row, first_layer_directions(*out.params), problem);
  return out;
}

inline RunOutput pwpum_row(const RunSpec& s, const HelmholtzProblem& problem, const PwpumResult& r, Solver solver) {
  RunOutput out;
  out.row = row_skeleton(s);
  out.row.solver = solver;
  out.row.condition = r.condition_estimate;
  out.row.final_loss = r.boundary_misfit;
  out.row.rotation = r.solution.rotation;
  out.row.termination = r.ill_conditioned ? "IllConditioned" : "Solved";
  out.expansion = r.solution;
  score(out.row, as_field(r.solution), problem, s);
  return out;
}

}  // namespace detail

/// PWPUM-OD from a finished one-layer PWNN run: rebase its learned
/// directions to |k_i| = k and re-solve the boundary system.
inline RunOutput rebase_run(const RunSpec& s, const RunOutput& pwnn_run) {
  const auto t0 = std::chrono::steady_clock::now();
  RunOutput out;
  try {
    if (!pwnn_run.params) throw std::invalid_argument("PWPUM-OD needs a trained network");
    const auto problem = s.problem.build();
    const auto basis = rebase_from_network(*pwnn_run.params, problem.k);
    out = detail::pwpum_row(s, problem, solve_pwpum(basis, problem, s.points_per_wavelength), Solver::PWPUM_OD);
    out.row.layers = s.layers;
    out.row.n_interior = s.n_interior;
    out.row.n_boundary = 4 * s.n_per_edge;
    out.row.lambda = pwnn_run.row.lambda;
    out.row.iterations = pwnn_run.row.iterations;
    out.row.evaluations = pwnn_run.row.evaluations;
    detail::score_directions(out.row, basis.wavevectors, problem);
  } catch (const std::exception& e) {
    out.row = detail::row_skeleton(s);
    out.row.solver = Solver::PWPUM_OD;
    out.row.error = e.what();
  }
  out.row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

/// One (spec, seed) run. Failures are captured in the row.
inline RunOutput run_single(const RunSpec& s, const std::function<void(const OptTrace&)>& on_iter = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  RunOutput out;
  try {
    const auto problem = s.problem.build();
    switch (s.solver) {
      case Solver::TANN:
      case Solver::SIREN:
      case Solver::PWNN: out = detail::train_network(s, problem, on_iter); break;
      case Solver::PWPUM:
        out = detail::pwpum_row(s, problem, solve_pwpum(uniform_basis(s.units, problem.k), problem, s.points_per_wavelength),
                                Solver::PWPUM);
        break;
      case Solver::PWPUM_WT: {
        WaveTrackingOptions opt;
        opt.alpha_grid = s.alpha_grid;
        opt.refine_tol = s.refine_tol;
        opt.points_per_wavelength = s.points_per_wavelength;
        out = detail::pwpum_row(s, problem, solve_wt(problem, s.units, opt), Solver::PWPUM_WT);
        break;
      }
      case Solver::PWPUM_OD: {
        RunSpec net = s;
        net.solver = Solver::PWNN;
        net.layers = 1;
        const auto trained = detail::train_network(net, problem, on_iter);
        out = rebase_run(net, trained);
        out.trace = trained.trace;
        out.params = trained.params;
        out.net = trained.net;
        break;
      }
    }
  } catch (const std::exception& e) {
    out = RunOutput{};
    out.row = detail::row_skeleton(s);
    out.row.error = e.what();
  }
  out.row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

/// Runs independent jobs on up to `workers` threads; results keep job order.
template <class T>
std::vector<T> run_pool(const std::vector<std::function<T()>>& jobs, int workers) {
  std::vector<T> out(jobs.size());
  const int w = std::max(1, std::min<int>(workers, int(jobs.size())));
  if (w == 1) {
    for (std::size_t i = 0; i < jobs.size(); ++i) out[i] = jobs[i]();
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (int t = 0; t < w; ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < jobs.size(); i = next++) out[i] = jobs[i]();
    });
  for (auto& th : pool) th.join();
  return out;
}

/// Statistics of epsilon over the successful rows of one cell.
struct CellSummary {
  std::string label;
  Solver solver = Solver::PWNN;
  int layers = 0;
  int units = 0;
  int n_interior = 0;
  int n_boundary = 0;
  int runs = 0;
  int failures = 0;
  double median = std::numeric_limits<double>::quiet_NaN();
  double mean = std::numeric_limits<double>::quiet_NaN();
  double stddev = std::numeric_limits<double>::quiet_NaN();
  double min = std::numeric_limits<double>::quiet_NaN();
  double max = std::numeric_limits<double>::quiet_NaN();
  double median_accuracy = std::numeric_limits<double>::quiet_NaN();
};

inline double median_of(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Groups rows by (label, solver, layers, units, N_f, N_g) in first-seen order.
inline std::vector<CellSummary> summarize(const std::vector<ResultRow>& rows) {
  using Key = std::tuple<std::string, int, int, int, int, int>;
  std::vector<Key> order;
  std::map<Key, std::vector<const ResultRow*>> cells;
  for (const auto& r : rows) {
    Key key{r.label, int(r.solver), r.layers, r.units, r.n_interior, r.n_boundary};
    if (!cells.count(key)) order.push_back(key);
    cells[key].push_back(&r);
  }
  std::vector<CellSummary> out;
  for (const auto& key : order) {
    const auto& members = cells[key];
    CellSummary c;
    c.label = std::get<0>(key);
    c.solver = Solver(std::get<1>(key));
    c.layers = std::get<2>(key);
    c.units = std::get<3>(key);
    c.n_interior = std::get<4>(key);
    c.n_boundary = std::get<5>(key);
    std::vector<double> eps;
    for (const auto* r : members) {
      ++c.runs;
      if (r->ok() && std::isfinite(r->epsilon)) {
        eps.push_back(r->epsilon);
      } else {
        ++c.failures;
      }
    }
    if (!eps.empty()) {
      c.median = median_of(eps);
      c.min = *std::min_element(eps.begin(), eps.end());
      c.max = *std::max_element(eps.begin(), eps.end());
      double sum = 0.0;
      for (double e : eps) sum += e;
      c.mean = sum / double(eps.size());
      double ss = 0.0;
      for (double e : eps) ss += (e - c.mean) * (e - c.mean);
      c.stddev = eps.size() > 1 ? std::sqrt(ss / double(eps.size() - 1)) : 0.0;
      c.median_accuracy = c.median > 0.0 ? accuracy(c.median) : std::numeric_limits<double>::infinity();
    }
    out.push_back(c);
  }
  return out;
}

struct ExperimentResult {
  std::vector<ResultRow> rows;
  std::vector<CellSummary> summary;
  std::vector<RunOutput> runs;  // parallel to rows
};

namespace detail {

inline ExperimentResult finish(std::vector<RunOutput> runs) {
  ExperimentResult r;
  for (const auto& o : runs) r.rows.push_back(o.row);
  r.summary = summarize(r.rows);
  r.runs = std::move(runs);
  return r;
}

}  // namespace detail

/// Architecture sweep on the KD problem. Default sampling follows the table
/// captions: N_f = 5k^2 interior points and 5k points per edge.
struct KdSweepSpec {
  RunSpec base;  // solver, k, optimizer, lambda, ...
  std::vector<int> layers{1};
  std::vector<int> units{10};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::string label = "kd_sweep";
  int workers = 1;
};

inline RunSpec kd_defaults(RunSpec s) {
  const double k = s.problem.k;
  s.n_interior = int(std::lround(5.0 * k * k));
  s.n_per_edge = int(std::lround(5.0 * k));
  return s;
}

inline ExperimentResult run_kd_sweep(const KdSweepSpec& spec) {
  std::vector<std::function<RunOutput()>> jobs;
  for (int l : spec.layers)
    for (int u : spec.units)
      for (auto seed : spec.seeds) {
        RunSpec s = spec.base;
        s.layers = l;
        s.units = u;
        s.seed = seed;
        jobs.push_back([s, label = spec.label] {
          auto o = run_single(s);
          o.row.label = label;
          return o;
        });
      }
  return detail::finish(run_pool(jobs, spec.workers));
}

/// Data sweep: fixed architecture, varying N_f and points per edge.
struct DataSweepSpec {
  RunSpec base;
  std::vector<int> n_interior{200};
  std::vector<int> n_per_edge{100};
  std::vector<std::uint64_t> seeds;
  std::string label = "data_sweep";
  int workers = 1;
};

inline ExperimentResult run_data_sweep(const DataSweepSpec& spec) {
  std::vector<std::function<RunOutput()>> jobs;
  for (int nf : spec.n_interior)
    for (int ne : spec.n_per_edge)
      for (auto seed : spec.seeds) {
        RunSpec s = spec.base;
        s.n_interior = nf;
        s.n_per_edge = ne;
        s.seed = seed;
        jobs.push_back([s, label = spec.label] {
          auto o = run_single(s);
          o.row.label = label;
          return o;
        });
      }
  return detail::finish(run_pool(jobs, spec.workers));
}

/// PWPUM, PWPUM-WT, PWNN and PWPUM-OD on the KD problem for each basis size.
/// The deterministic PWPUM rows carry seed 0; PWPUM-OD reuses the PWNN run of
/// the same seed.
struct CompareSpec {
  RunSpec base;  // KD problem, sampling, optimizer
  std::vector<int> units{13, 15, 17, 19};
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::string label = "compare";
  int workers = 1;
};

inline ExperimentResult run_pwpum_compare(const CompareSpec& spec) {
  std::vector<std::function<std::vector<RunOutput>()>> jobs;
  for (int u : spec.units) {
    RunSpec s = spec.base;
    s.units = u;
    s.layers = 1;
    s.seed = 0;
    for (Solver sv : {Solver::PWPUM, Solver::PWPUM_WT}) {
      RunSpec d = s;
      d.solver = sv;
      jobs.push_back([d] { return std::vector<RunOutput>{run_single(d)}; });
    }
    for (auto seed : spec.seeds) {
      RunSpec n = s;
      n.solver = Solver::PWNN;
      n.seed = seed;
      jobs.push_back([n] {
        auto net = run_single(n);
        auto od = rebase_run(n, net);
        return std::vector<RunOutput>{std::move(net), std::move(od)};
      });
    }
  }
  std::vector<RunOutput> flat;
  for (auto& group : run_pool(jobs, spec.workers))
    for (auto& o : group) {
      o.row.label = spec.label;
      flat.push_back(std::move(o));
    }
  // Deterministic row order: units, solver, seed.
  std::stable_sort(flat.begin(), flat.end(), [](const RunOutput& a, const RunOutput& b) {
    return std::tie(a.row.units, a.row.solver, a.row.seed) < std::tie(b.row.units, b.row.solver, b.row.seed);
  });
  return detail::finish(std::move(flat));
}

/// UD benchmark: each trial draws its own directions; PWPUM, PWPUM-WT, PWNN
/// and PWPUM-OD all solve the same trial problem.
struct UdBenchSpec {
  RunSpec base;  // k, units, sampling, optimizer
  int directions = 10;
  std::vector<std::uint64_t> seeds;
  std::string label = "ud";
  int workers = 1;
};

inline ExperimentResult run_ud_bench(const UdBenchSpec& spec) {
  std::vector<std::function<std::vector<RunOutput>()>> jobs;
  for (auto seed : spec.seeds) {
    RunSpec s = spec.base;
    s.problem.known_directions = false;
    s.problem.directions = spec.directions;
    s.problem.direction_seed = trial_direction_seed(seed);
    s.seed = seed;
    s.layers = 1;
    jobs.push_back([s] {
      std::vector<RunOutput> out;
      for (Solver sv : {Solver::PWPUM, Solver::PWPUM_WT}) {
        RunSpec d = s;
        d.solver = sv;
        out.push_back(run_single(d));
      }
      RunSpec n = s;
      n.solver = Solver::PWNN;
      auto net = run_single(n);
      auto od = rebase_run(n, net);
      out.push_back(std::move(net));
      out.push_back(std::move(od));
      return out;
    });
  }
  std::vector<RunOutput> flat;
  for (auto& group : run_pool(jobs, spec.workers))
    for (auto& o : group) {
      o.row.label = spec.label;
      flat.push_back(std::move(o));
    }
  std::stable_sort(flat.begin(), flat.end(), [](const RunOutput& a, const RunOutput& b) {
    return std::tie(a.row.solver, a.row.seed) < std::tie(b.row.solver, b.row.seed);
  });
  return detail::finish(std::move(flat));
}

/// Consecutive seeds first, first + 1, ...
inline std::vector<std::uint64_t> seed_range(std::uint64_t first, int count) {
  std::vector<std::uint64_t> s;
  for (int i = 0; i < count; ++i) s.push_back(first + std::uint64_t(i));
  return s;
}

}  // namespace pwnn
