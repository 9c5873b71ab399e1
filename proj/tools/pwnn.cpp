// Command-line driver: single runs, sweeps, the PWPUM comparison, the UD
// benchmark, field dumps and loss curves. Exit codes: 0 ok, 1 some run
// failed, 2 bad configuration.
#include <cstdio>
#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "pwnn/io.hpp"

namespace fs = std::filesystem;
using namespace pwnn;

namespace {

struct Options {
  std::string config;
  std::string out = "out";
  int workers = 0;
  std::uint64_t seed = 1;
  std::string scale = "desk";
};

RunConfig load(const std::string& command, const Options& o) {
  Json j = Json::object();
  if (!o.config.empty()) j = read_json_file(o.config);
  if (o.scale != "desk" && o.scale != "paper") throw ConfigError("--scale must be desk or paper");
  auto c = parse_config(j, command, o.scale == "paper" ? Scale::Paper : Scale::Desk, o.seed);
  if (o.workers > 0) c.workers = o.workers;
  return c;
}

void log_row(const ResultRow& r) {
  std::fprintf(stderr, "%-9s L=%d U=%-3d Nf=%-5d Ng=%-5d seed=%-4llu eps=%.3e iters=%-6d %s%s\n",
               std::string(to_string(r.solver)).c_str(), r.layers, r.units, r.n_interior, r.n_boundary,
               static_cast<unsigned long long>(r.seed), r.epsilon, r.iterations, r.termination.c_str(),
               r.ok() ? "" : (" error: " + r.error).c_str());
}

int write_experiment(const fs::path& out, const RunConfig& c, const ExperimentResult& res) {
  write_results_csv(out / "results.csv", res.rows);
  write_summary_csv(out / "summary.csv", res.summary);
  write_seed_manifest(out / "seeds.csv", res.rows);
  int failures = 0;
  for (const auto& r : res.rows) {
    log_row(r);
    failures += r.ok() ? 0 : 1;
  }
  for (const auto& cell : res.summary)
    std::fprintf(stderr, "summary %-9s L=%d U=%-3d Nf=%-5d Ng=%-5d median eps=%.3e (n=%d, failed=%d)\n",
                 std::string(to_string(cell.solver)).c_str(), cell.layers, cell.units, cell.n_interior,
                 cell.n_boundary, cell.median, cell.runs, cell.failures);
  (void)c;
  return failures ? 1 : 0;
}

void dump_model(const fs::path& path, const RunSpec& s, const RunOutput& o) {
  if (!o.params) return;
  write_json(path, to_json(ModelDump{o.net, o.params->flatten(), s.seed, s.problem}));
}

int cmd_run(const RunConfig& c, const fs::path& out, bool curve) {
  std::vector<ResultRow> rows;
  int failures = 0;
  for (std::size_t i = 0; i < c.seeds.size(); ++i) {
    RunSpec s = c.spec;
    s.seed = c.seeds[i];
    s.loss_workers = c.workers;
    auto o = run_single(s);
    o.row.label = c.label;
    log_row(o.row);
    failures += o.row.ok() ? 0 : 1;
    const std::string suffix = c.seeds.size() > 1 ? "_" + std::to_string(s.seed) : "";
    dump_model(out / ("model" + suffix + ".json"), s, o);
    if (curve) write_loss_curve_csv(out / ("loss_curve" + suffix + ".csv"), o.trace);
    rows.push_back(std::move(o.row));
  }
  write_results_csv(out / "results.csv", rows);
  write_seed_manifest(out / "seeds.csv", rows);
  return failures ? 1 : 0;
}

int cmd_sweep(const RunConfig& c, const fs::path& out) {
  RunSpec base = c.spec;
  base.loss_workers = 1;
  if (!c.n_interior_list.empty()) {
    base.layers = c.layers_list.front();
    base.units = c.units_list.front();
    DataSweepSpec d{base, c.n_interior_list, c.n_per_edge_list, c.seeds, c.label, c.workers};
    return write_experiment(out, c, run_data_sweep(d));
  }
  KdSweepSpec k{base, c.layers_list, c.units_list, c.seeds, c.label, c.workers};
  return write_experiment(out, c, run_kd_sweep(k));
}

int cmd_compare(const RunConfig& c, const fs::path& out) {
  RunSpec base = c.spec;
  base.loss_workers = 1;
  return write_experiment(out, c, run_pwpum_compare({base, c.units_list, c.seeds, c.label, c.workers}));
}

int cmd_ud(const RunConfig& c, const fs::path& out) {
  RunSpec base = c.spec;
  base.loss_workers = 1;
  return write_experiment(out, c, run_ud_bench({base, c.directions, c.seeds, c.label, c.workers}));
}

int cmd_field(const RunConfig& c, const fs::path& out) {
  const auto m = model_from_json(read_json_file(c.model));
  const auto params = NetParams::unflatten(m.spec, m.theta);
  const auto problem = m.problem.build();
  const auto grid = EvalGrid::cell_centres(problem.domain, c.spec.eval_rows, c.spec.eval_cols);
  const auto net = field_grids(as_field(params, m.spec), grid);
  const auto exact = field_grids(exact_field(problem), grid);
  write_grid_csv(out / "field_real.csv", net.real, net.rows, net.cols);
  write_grid_csv(out / "field_imag.csv", net.imag, net.rows, net.cols);
  write_grid_csv(out / "exact_real.csv", exact.real, exact.rows, exact.cols);
  write_grid_csv(out / "exact_imag.csv", exact.imag, exact.rows, exact.cols);
  std::fprintf(stderr, "eps=%.6e\n", relative_modulus_l2(as_field(params, m.spec), problem, grid));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Helmholtz solver lab: plane-wave networks and PWPUM"};
  app.require_subcommand(1);
  Options o;
  const std::vector<std::pair<std::string, std::string>> commands{
      {"run", "train or solve once per seed"},
      {"sweep", "architecture sweep, or data sweep when n_interior_list/n_per_edge_list is set"},
      {"compare", "PWPUM, PWPUM-WT, PWNN and PWPUM-OD on the KD problem"},
      {"ud", "unknown-direction benchmark"},
      {"field", "field grids of a saved model"},
      {"losscurve", "single run with its per-iteration loss curve"}};
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("-c,--config", o.config, "JSON config file");
    sub->add_option("-o,--out", o.out, "output directory")->capture_default_str();
    sub->add_option("-w,--workers", o.workers, "worker threads (overrides config)");
    sub->add_option("-s,--seed", o.seed, "first seed when the config lists none")->capture_default_str();
    sub->add_option("--scale", o.scale, "desk or paper defaults")->capture_default_str();
  }
  CLI11_PARSE(app, argc, argv);
  const std::string command = app.get_subcommands().front()->get_name();

  RunConfig c;
  try {
    c = load(command, o);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  }
  const fs::path out = o.out;
  try {
    fs::create_directories(out);
    write_json(out / "config.json", to_json(c));
    if (command == "run") return cmd_run(c, out, false);
    if (command == "losscurve") return cmd_run(c, out, true);
    if (command == "sweep") return cmd_sweep(c, out);
    if (command == "compare") return cmd_compare(c, out);
    if (command == "ud") return cmd_ud(c, out);
    return cmd_field(c, out);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
