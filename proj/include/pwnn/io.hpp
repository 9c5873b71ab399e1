#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include "json.hpp"
#include "pwnn/evaluation.hpp"
#include "pwnn/experiments.hpp"

namespace pwnn {

using Json = nlohmann::ordered_json;

/// Malformed configuration; maps to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shortest decimal text that parses back to the same double.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline double parse_double(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw std::invalid_argument("not a number: '" + s + "'");
  return v;
}

// ---------------------------------------------------------------- config

enum class Scale { Desk, Paper };

/// Iteration cap used unless the config sets lbfgs.max_iter.
inline int default_max_iter(Scale s) { return s == Scale::Paper ? 50000 : 20000; }

struct RunConfig {
  std::string command = "run";
  Scale scale = Scale::Desk;
  RunSpec spec;
  std::vector<int> layers_list;
  std::vector<int> units_list;
  std::vector<int> n_interior_list;
  std::vector<int> n_per_edge_list;
  std::vector<std::uint64_t> seeds;
  int directions = 10;
  int workers = 1;
  std::string label;
  std::string model;  // field: path of a model dump
};

namespace detail {

inline void check_keys(const Json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, _] : obj.items())
    if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
}

template <class T>
T get_as(const Json& obj, const std::string& key, const std::string& where) {
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("bad value for '" + key + "' in " + where);
  }
}

template <class T>
void read(const Json& obj, const std::string& key, T& into, const std::string& where) {
  if (obj.contains(key)) into = get_as<T>(obj, key, where);
}

inline void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

}  // namespace detail

/// Parses a config for `command`, filling every default. `seed` is the base
/// seed from the command line.
inline RunConfig parse_config(const Json& j, const std::string& command, Scale scale, std::uint64_t seed) {
  using detail::read;
  static const std::set<std::string> top{"label",          "solver",         "problem",        "layers",
                                         "units",          "layers_list",    "units_list",     "n_interior",
                                         "n_per_edge",     "n_interior_list", "n_per_edge_list", "lambda",
                                         "lbfgs",          "seeds",          "repetitions",    "directions",
                                         "points_per_wavelength", "alpha_grid", "refine_tol",  "grid",
                                         "workers",        "model"};
  static const std::set<std::string> problem_keys{"kind", "k", "order", "directions", "direction_seed"};
  static const std::set<std::string> lbfgs_keys{"memory",   "max_iter", "grad_tol_inf",
                                                "wolfe_c1", "wolfe_c2", "max_line_search_steps"};
  static const std::set<std::string> grid_keys{"rows", "cols"};
  static const std::set<std::string> commands{"run", "sweep", "compare", "ud", "field", "losscurve"};

  detail::require(commands.count(command) > 0, "unknown command '" + command + "'");
  detail::check_keys(j, top, "config");
  RunConfig c;
  c.command = command;
  c.scale = scale;
  auto& s = c.spec;
  c.label = command;
  read(j, "label", c.label, "config");

  // Problem.
  const bool ud = command == "ud";
  s.problem.known_directions = !ud;
  s.problem.k = command == "compare" ? 10.0 : 5.0;
  if (j.contains("problem")) {
    const auto& p = j.at("problem");
    detail::check_keys(p, problem_keys, "problem");
    std::string kind = s.problem.kind();
    read(p, "kind", kind, "problem");
    detail::require(kind == "KD" || kind == "UD", "problem.kind must be \"KD\" or \"UD\"");
    detail::require(!(ud && kind == "KD"), "the ud command needs problem.kind \"UD\"");
    s.problem.known_directions = kind == "KD";
    read(p, "k", s.problem.k, "problem");
    read(p, "order", s.problem.order, "problem");
    read(p, "directions", c.directions, "problem");
    read(p, "direction_seed", s.problem.direction_seed, "problem");
  }
  detail::require(s.problem.k > 0.0, "problem.k must be positive");
  detail::require(s.problem.order >= 0 && s.problem.order <= kMaxBesselOrder, "problem.order must be in 0..5");
  read(j, "directions", c.directions, "config");
  detail::require(c.directions >= 1, "directions must be >= 1");
  s.problem.directions = c.directions;
  const double k = s.problem.k;

  // Solver and architecture.
  std::string solver = "PWNN";
  read(j, "solver", solver, "config");
  try {
    s.solver = solver_from_string(solver);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  s.units = ud ? c.directions : (command == "compare" ? 19 : int(std::lround(4.0 * k)));
  read(j, "layers", s.layers, "config");
  read(j, "units", s.units, "config");
  read(j, "layers_list", c.layers_list, "config");
  read(j, "units_list", c.units_list, "config");
  detail::require(s.layers >= 1 && s.units >= 1, "layers and units must be >= 1");
  for (int v : c.layers_list) detail::require(v >= 1, "layers_list entries must be >= 1");
  for (int v : c.units_list) detail::require(v >= 1, "units_list entries must be >= 1");

  // Sampling.
  const bool kd_caption = command == "run" || command == "sweep" || command == "losscurve" || command == "field";
  s.n_interior = kd_caption ? int(std::lround(5.0 * k * k)) : 500;
  s.n_per_edge = ud ? 50 : int(std::lround(5.0 * k));
  read(j, "n_interior", s.n_interior, "config");
  read(j, "n_per_edge", s.n_per_edge, "config");
  read(j, "n_interior_list", c.n_interior_list, "config");
  read(j, "n_per_edge_list", c.n_per_edge_list, "config");
  detail::require(s.n_interior >= 1 && s.n_per_edge >= 1, "n_interior and n_per_edge must be >= 1");

  if (j.contains("lambda")) {
    const auto& l = j.at("lambda");
    if (l.is_string()) {
      detail::require(l.get<std::string>() == "auto", "lambda must be \"auto\" or a positive number");
    } else {
      detail::require(l.is_number() && l.get<double>() > 0.0, "lambda must be \"auto\" or a positive number");
      s.lambda = l.get<double>();
    }
  }

  s.lbfgs.max_iter = default_max_iter(scale);
  if (j.contains("lbfgs")) {
    const auto& o = j.at("lbfgs");
    detail::check_keys(o, lbfgs_keys, "lbfgs");
    read(o, "memory", s.lbfgs.memory, "lbfgs");
    read(o, "max_iter", s.lbfgs.max_iter, "lbfgs");
    read(o, "grad_tol_inf", s.lbfgs.grad_tol_inf, "lbfgs");
    read(o, "wolfe_c1", s.lbfgs.wolfe_c1, "lbfgs");
    read(o, "wolfe_c2", s.lbfgs.wolfe_c2, "lbfgs");
    read(o, "max_line_search_steps", s.lbfgs.max_line_search_steps, "lbfgs");
  }
  try {
    s.lbfgs.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }

  read(j, "points_per_wavelength", s.points_per_wavelength, "config");
  read(j, "alpha_grid", s.alpha_grid, "config");
  read(j, "refine_tol", s.refine_tol, "config");
  detail::require(s.points_per_wavelength >= 1.0, "points_per_wavelength must be >= 1");
  detail::require(s.alpha_grid >= 8, "alpha_grid must be >= 8");
  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    detail::check_keys(g, grid_keys, "grid");
    read(g, "rows", s.eval_rows, "grid");
    read(g, "cols", s.eval_cols, "grid");
    detail::require(s.eval_rows >= 1 && s.eval_cols >= 1, "grid rows/cols must be >= 1");
  }
  read(j, "workers", c.workers, "config");
  detail::require(c.workers >= 1, "workers must be >= 1");
  read(j, "model", c.model, "config");
  detail::require(command != "field" || !c.model.empty(), "the field command needs \"model\"");

  // Seeds.
  int reps = 1;
  if (command == "sweep") reps = c.n_interior_list.empty() && c.n_per_edge_list.empty() ? 5 : (scale == Scale::Paper ? 50 : 10);
  if (command == "compare") reps = 3;
  if (command == "ud") reps = scale == Scale::Paper ? 50 : 10;
  read(j, "repetitions", reps, "config");
  detail::require(reps >= 1, "repetitions must be >= 1");
  if (j.contains("seeds")) {
    c.seeds = detail::get_as<std::vector<std::uint64_t>>(j, "seeds", "config");
    detail::require(!c.seeds.empty(), "seeds must be nonempty");
  } else {
    c.seeds = seed_range(seed, reps);
  }
  s.seed = c.seeds.front();

  // Per-command list defaults.
  if (command == "sweep") {
    if (c.layers_list.empty()) c.layers_list = {s.layers};
    if (c.units_list.empty()) c.units_list = {int(std::lround(k)), int(std::lround(2 * k)), int(std::lround(4 * k))};
    if (!c.n_interior_list.empty() || !c.n_per_edge_list.empty()) {
      if (c.n_interior_list.empty()) c.n_interior_list = {s.n_interior};
      if (c.n_per_edge_list.empty()) c.n_per_edge_list = {s.n_per_edge};
    }
  }
  if (command == "compare" && c.units_list.empty())
    c.units_list = k == 10.0 ? std::vector<int>{5, 7, 9, 11, 13, 15, 17, 19} : std::vector<int>{s.units};
  return c;
}

inline Json to_json(const RunConfig& c) {
  const auto& s = c.spec;
  Json j;
  j["label"] = c.label;
  j["solver"] = std::string(to_string(s.solver));
  Json p;
  p["kind"] = s.problem.kind();
  p["k"] = s.problem.k;
  if (s.problem.known_directions) {
    p["order"] = s.problem.order;
  } else {
    p["directions"] = c.directions;
    if (c.command != "ud") p["direction_seed"] = s.problem.direction_seed;
  }
  j["problem"] = p;
  j["layers"] = s.layers;
  j["units"] = s.units;
  if (!c.layers_list.empty()) j["layers_list"] = c.layers_list;
  if (!c.units_list.empty()) j["units_list"] = c.units_list;
  j["n_interior"] = s.n_interior;
  j["n_per_edge"] = s.n_per_edge;
  if (!c.n_interior_list.empty()) j["n_interior_list"] = c.n_interior_list;
  if (!c.n_per_edge_list.empty()) j["n_per_edge_list"] = c.n_per_edge_list;
  if (s.lambda) {
    j["lambda"] = *s.lambda;
  } else {
    j["lambda"] = "auto";
  }
  j["lbfgs"] = {{"memory", s.lbfgs.memory},
                {"max_iter", s.lbfgs.max_iter},
                {"grad_tol_inf", s.lbfgs.grad_tol_inf},
                {"wolfe_c1", s.lbfgs.wolfe_c1},
                {"wolfe_c2", s.lbfgs.wolfe_c2},
                {"max_line_search_steps", s.lbfgs.max_line_search_steps}};
  j["seeds"] = c.seeds;
  j["points_per_wavelength"] = s.points_per_wavelength;
  j["alpha_grid"] = s.alpha_grid;
  j["refine_tol"] = s.refine_tol;
  j["grid"] = {{"rows", s.eval_rows}, {"cols", s.eval_cols}};
  j["workers"] = c.workers;
  if (!c.model.empty()) j["model"] = c.model;
  return j;
}

inline Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config '" + path.string() + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
}

// ---------------------------------------------------------------- CSV

inline const std::vector<std::string>& result_columns() {
  static const std::vector<std::string> cols{
      "label",      "solver",   "problem",    "k",           "order",      "directions", "direction_seed",
      "layers",     "units",    "n_interior", "n_boundary",  "seed",       "lambda",     "epsilon",
      "accuracy",   "epsilon_complex", "iterations", "evaluations", "termination", "final_loss", "condition",
      "rotation",   "dir_mean_deg", "dir_max_deg", "error", "wall_seconds"};
  return cols;
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

/// One CSV line; `with_timing` false drops the wall-time column.
inline std::string csv_line(const ResultRow& r, bool with_timing = true) {
  std::vector<std::string> f{csv_escape(r.label),
                             std::string(to_string(r.solver)),
                             r.problem,
                             format_double(r.k),
                             std::to_string(r.order),
                             std::to_string(r.directions),
                             std::to_string(r.direction_seed),
                             std::to_string(r.layers),
                             std::to_string(r.units),
                             std::to_string(r.n_interior),
                             std::to_string(r.n_boundary),
                             std::to_string(r.seed),
                             format_double(r.lambda),
                             format_double(r.epsilon),
                             format_double(r.accuracy),
                             format_double(r.epsilon_complex),
                             std::to_string(r.iterations),
                             std::to_string(r.evaluations),
                             r.termination,
                             format_double(r.final_loss),
                             format_double(r.condition),
                             format_double(r.rotation),
                             format_double(r.dir_mean_deg),
                             format_double(r.dir_max_deg),
                             csv_escape(r.error)};
  if (with_timing) f.push_back(format_double(r.wall_seconds));
  std::string line;
  for (std::size_t i = 0; i < f.size(); ++i) line += (i ? "," : "") + f[i];
  return line;
}

inline std::string csv_header(const std::vector<std::string>& cols) {
  std::string h;
  for (std::size_t i = 0; i < cols.size(); ++i) h += (i ? "," : "") + cols[i];
  return h;
}

inline void write_results_csv(const std::filesystem::path& path, const std::vector<ResultRow>& rows) {
  std::ofstream out(path);
  out << csv_header(result_columns()) << "\n";
  for (const auto& r : rows) out << csv_line(r) << "\n";
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
}

inline void write_summary_csv(const std::filesystem::path& path, const std::vector<CellSummary>& cells) {
  std::ofstream out(path);
  out << "label,solver,layers,units,n_interior,n_boundary,runs,failures,median_epsilon,mean_epsilon,std_epsilon,"
         "min_epsilon,max_epsilon,median_accuracy\n";
  for (const auto& c : cells)
    out << csv_escape(c.label) << "," << to_string(c.solver) << "," << c.layers << "," << c.units << ","
        << c.n_interior << "," << c.n_boundary << "," << c.runs << "," << c.failures << "," << format_double(c.median)
        << "," << format_double(c.mean) << "," << format_double(c.stddev) << "," << format_double(c.min) << ","
        << format_double(c.max) << "," << format_double(c.median_accuracy) << "\n";
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
}

/// Every seed needed to rebuild a row: the run seed, the derived sampling and
/// initialization streams, and the UD direction seed.
inline void write_seed_manifest(const std::filesystem::path& path, const std::vector<ResultRow>& rows) {
  std::ofstream out(path);
  out << "row,label,solver,seed,sample_seed,init_seed,direction_seed\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const auto s = RunSeeds::from(r.seed);
    out << i << "," << csv_escape(r.label) << "," << to_string(r.solver) << "," << r.seed << "," << s.sample << ","
        << s.init << "," << r.direction_seed << "\n";
  }
}

inline void write_grid_csv(const std::filesystem::path& path, const std::vector<double>& values, int rows, int cols) {
  std::ofstream out(path);
  for (int c = 0; c < cols; ++c) out << (c ? "," : "") << "c" << c;
  out << "\n";
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c)
      out << (c ? "," : "") << format_double(values[std::size_t(r) * std::size_t(cols) + std::size_t(c)]);
    out << "\n";
  }
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
}

inline void write_loss_curve_csv(const std::filesystem::path& path, const OptTrace& t) {
  std::ofstream out(path);
  out << "iteration,loss,grad_inf,step\n";
  for (std::size_t i = 0; i < t.loss.size(); ++i)
    out << i << "," << format_double(t.loss[i]) << "," << format_double(t.grad_inf[i]) << "," << format_double(t.step[i])
        << "\n";
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
}

// ---------------------------------------------------------------- models

struct ModelDump {
  NetSpec spec;
  std::vector<double> theta;
  std::uint64_t seed = 0;
  ProblemSpec problem;
};

inline Json to_json(const ModelDump& m) {
  Json j;
  j["spec"] = {{"layers", m.spec.hidden_layers},
               {"units", m.spec.units},
               {"activation", std::string(to_string(m.spec.activation))}};
  Json theta = Json::array();
  for (double v : m.theta) theta.push_back(format_double(v));
  j["theta"] = theta;
  j["seed"] = m.seed;
  Json p;
  p["kind"] = m.problem.kind();
  p["k"] = m.problem.k;
  p["order"] = m.problem.order;
  p["directions"] = m.problem.directions;
  p["direction_seed"] = m.problem.direction_seed;
  j["problem"] = p;
  return j;
}

inline ModelDump model_from_json(const Json& j) {
  try {
    ModelDump m;
    const auto& s = j.at("spec");
    m.spec.hidden_layers = s.at("layers").get<int>();
    m.spec.units = s.at("units").get<int>();
    m.spec.activation = activation_from_string(s.at("activation").get<std::string>());
    m.spec.validate();
    for (const auto& v : j.at("theta")) m.theta.push_back(parse_double(v.get<std::string>()));
    if (m.theta.size() != m.spec.param_count()) throw std::invalid_argument("theta has the wrong length");
    m.seed = j.at("seed").get<std::uint64_t>();
    const auto& p = j.at("problem");
    m.problem.known_directions = p.at("kind").get<std::string>() == "KD";
    m.problem.k = p.at("k").get<double>();
    m.problem.order = p.at("order").get<int>();
    m.problem.directions = p.at("directions").get<int>();
    m.problem.direction_seed = p.at("direction_seed").get<std::uint64_t>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed model dump: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("malformed model dump: ") + e.what());
  }
}

inline void write_json(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path);
  out << j.dump(2) << "\n";
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
}

}  // namespace pwnn
