// dwa3d: run flights, benchmark the local planner and check parameter files.

#include "dwa3d/config_io.hpp"
#include "dwa3d/feasibility.hpp"
#include "dwa3d/flight_log.hpp"
#include "dwa3d/scenarios.hpp"
#include "dwa3d/sim.hpp"
#include "dwa3d/stats.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace dwa3d;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

ScenarioSpec resolve_scenario(const std::string& arg) {
  if (is_builtin(arg)) return builtin(arg);
  if (fs::is_regular_file(arg)) return load_scenario_file(arg);
  std::string valid;
  for (const auto& n : builtin_names()) valid += (valid.empty() ? "" : ", ") + n;
  throw UsageError("unknown scenario '" + arg + "': not a built-in (" + valid + ") or a readable file");
}

PathVariant resolve_variant(const ScenarioSpec& spec, const std::string& arg) {
  if (arg.empty()) return spec.variants.front();
  try {
    return variant_from_string(arg);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

struct FlightOptions {
  std::string scenario;
  std::string planner;
  std::string avoidance;
  std::optional<double> r_search;
  std::uint64_t seed = 1;
  std::string out = ".";
};

struct PreparedFlight {
  ScenarioSpec spec;
  FlightSetup setup;
  FlightConfig config;
};

PreparedFlight prepare(const FlightOptions& o) {
  PreparedFlight p;
  p.spec = resolve_scenario(o.scenario);
  const std::string avoidance = o.avoidance.empty() ? p.spec.avoidance : o.avoidance;
  if (!valid_avoidance(avoidance)) throw UsageError("--avoidance must be lateral or vertical");
  if (o.r_search && !(*o.r_search > BeamParams{}.drone_radius))
    throw UsageError("--r-search must exceed the drone radius");
  p.config = make_flight_config(p.spec, resolve_variant(p.spec, o.planner), avoidance, o.r_search);
  p.setup = make_setup(p.spec);
  return p;
}

FlightLog fly(const PreparedFlight& p, std::uint64_t seed, const FlightHooks& hooks = {}) {
  FlightLog log = run_flight(p.setup, p.config, seed, hooks);
  log.header.config = to_json(p.config);
  return log;
}

std::string log_path(const std::string& out, const std::string& scenario, std::uint64_t seed) {
  return (fs::path(out) / (scenario + "-" + std::to_string(seed) + ".log")).string();
}

void print_flight(const FlightLog& log, const std::string& path) {
  const auto& s = log.summary;
  std::cout << "outcome=" << (log.outcome ? to_string(*log.outcome) : "unknown") << " time=" << s.flight_time
            << "s length=" << s.path_length << "m min_clearance=" << s.min_clearance
            << "m iterations=" << s.iterations << " plan_ms(mean/median/p95/max)=" << s.plan_ms.mean << "/"
            << s.plan_ms.median << "/" << s.plan_ms.p95 << "/" << s.plan_ms.max
            << (log.header.global_fallback ? " global_fallback=true" : "") << "\n"
            << "log: " << path << "\n";
}

int cmd_run(const FlightOptions& o, bool dump_scores) {
  const PreparedFlight p = prepare(o);
  fs::create_directories(o.out);
  const std::string path = log_path(o.out, p.spec.name, o.seed);

  std::ofstream scores;
  FlightHooks hooks;
  if (dump_scores) {
    const auto spath = (fs::path(o.out) / (p.spec.name + "-" + std::to_string(o.seed) + ".scores.jsonl")).string();
    scores.open(spath);
    if (!scores) throw std::runtime_error("cannot write " + spath);
    std::size_t iteration = 0;
    hooks.on_plan = [&scores, iteration](double t, const PlanResult& r) mutable {
      for (const auto& c : r.table) {
        nlohmann::json j = {{"iteration", iteration},
                            {"t", t},
                            {"vx", c.command.vx},
                            {"vz", c.command.vz},
                            {"wz", c.command.wz},
                            {"head_psi", c.head_psi},
                            {"head_z", c.head_z},
                            {"dist", c.dist},
                            {"vel", c.vel},
                            {"g", c.g},
                            {"admissible", c.admissible},
                            {"chosen", c.command == r.command && !r.no_admissible}};
        scores << j.dump() << '\n';
      }
      ++iteration;
    };
    std::cout << "scores: " << spath << "\n";
  }
  const FlightLog log = fly(p, o.seed, hooks);
  write_log(path, log);
  print_flight(log, path);
  return exit_code(*log.outcome);
}

int cmd_bench(const FlightOptions& o, int repeat) {
  if (repeat < 1) throw UsageError("--repeat must be >= 1");
  const PreparedFlight p = prepare(o);
  fs::create_directories(o.out);
  std::vector<double> pooled;
  const auto csv_path = (fs::path(o.out) / "bench-summary.csv").string();
  std::ofstream csv(csv_path);
  if (!csv) throw std::runtime_error("cannot write " + csv_path);
  csv << "flight_id,mean_ms,median_ms,p95_ms,max_ms\n" << std::setprecision(6) << std::fixed;
  std::cout << std::setprecision(3) << std::fixed;
  int worst = 0;
  auto row = [&](const std::string& id, const TimingStats& t) {
    csv << id << ',' << t.mean << ',' << t.median << ',' << t.p95 << ',' << t.max << '\n';
  };
  for (int k = 0; k < repeat; ++k) {
    const std::uint64_t seed = o.seed + static_cast<std::uint64_t>(k);
    const FlightLog log = fly(p, seed);
    const std::string path = log_path(o.out, p.spec.name, seed);
    write_log(path, log);
    std::vector<double> ms;
    for (const auto& r : log.records)
      if (r.planned) ms.push_back(r.plan_ms);
    pooled.insert(pooled.end(), ms.begin(), ms.end());
    std::sort(ms.begin(), ms.end());
    const std::string id = p.spec.name + "-" + std::to_string(seed);
    row(id, log.summary.plan_ms);
    if (!ms.empty())
      std::cout << id << " outcome=" << to_string(*log.outcome) << " plan_ms q1/median/q3/p95/max="
                << percentile_sorted(ms, 0.25) << "/" << percentile_sorted(ms, 0.5) << "/"
                << percentile_sorted(ms, 0.75) << "/" << percentile_sorted(ms, 0.95) << "/" << ms.back() << "\n";
    if (exit_code(*log.outcome) > worst) worst = exit_code(*log.outcome);
  }
  const TimingStats all = timing_stats(pooled);
  row("pooled", all);
  std::sort(pooled.begin(), pooled.end());
  if (!pooled.empty())
    std::cout << "pooled plan_ms q1/median/q3/p95/max=" << percentile_sorted(pooled, 0.25) << "/"
              << percentile_sorted(pooled, 0.5) << "/" << percentile_sorted(pooled, 0.75) << "/"
              << percentile_sorted(pooled, 0.95) << "/" << pooled.back() << "\n";
  std::cout << "summary: " << csv_path << "\n";
  return worst;
}

int cmd_check_config(const std::string& file) {
  std::ifstream f(file);
  if (!f) throw UsageError("cannot open config file '" + file + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(f);
  } catch (const nlohmann::json::parse_error& e) {
    std::cerr << "config parse error: " << e.what() << "\n";
    return 1;
  }
  CheckConfigDocument d;
  try {
    d = parse_check_config(j);
    d.airframe.validate();
  } catch (const std::exception& e) {
    std::cerr << "invalid config: " << e.what() << "\n";
    return 1;
  }
  const auto& c = d.planner;
  const ValidationReport weights = validate_weights(c.weights, c.limits, c.beam, c.dt);
  const ValidationReport beam = validate_beam(c.beam);
  const ValidationReport limits = validate_limits(c.limits);
  const ValidationReport feas = check_limits_feasible(c.limits, d.airframe);
  std::cout << "[weights]\n" << weights << "[beam]\n" << beam << "[limits]\n" << limits << "[feasibility]\n" << feas;
  const bool ok = weights.ok() && beam.ok() && limits.ok() && feas.ok();
  std::cout << (ok ? "all constraints satisfied\n" : "constraint violations found\n");
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DWA-3D navigation stack: flights, benchmarks and parameter checks"};
  app.require_subcommand(1);

  FlightOptions opts;
  bool dump_scores = false;
  int repeat = 4;
  std::string config_file;

  auto add_flight_options = [&](CLI::App* sub) {
    sub->add_option("--scenario", opts.scenario, "built-in name or scenario file")->required();
    sub->add_option("--planner", opts.planner, "naive | rrt | rrt-size (default: the scenario's first)")
        ->check(CLI::IsMember({"naive", "rrt", "rrt-size"}));
    sub->add_option("--avoidance", opts.avoidance, "lateral | vertical (default: the scenario's)")
        ->check(CLI::IsMember({"lateral", "vertical"}));
    sub->add_option("--r-search", opts.r_search, "beam search radius in m");
    sub->add_option("--seed", opts.seed, "random seed of the global planner");
    sub->add_option("--out", opts.out, "output directory");
  };

  CLI::App* run = app.add_subcommand("run", "fly one scenario and write its log");
  add_flight_options(run);
  run->add_flag("--dump-scores", dump_scores, "write every candidate's scores per iteration");

  CLI::App* bench = app.add_subcommand("bench", "fly a scenario repeatedly and summarize planner timing");
  add_flight_options(bench);
  bench->add_option("--repeat", repeat, "number of flights (seeds seed .. seed+repeat-1)");

  std::string show_name;
  CLI::App* show = app.add_subcommand("show-scenario", "print a scenario document (built-in or file) as JSON");
  show->add_option("scenario", show_name, "built-in name or scenario file")->required();

  CLI::App* check = app.add_subcommand("check-config", "validate weights, beam and feasibility of a config file");
  check->add_option("file", config_file, "JSON config")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageExitCode;
  }

  try {
    if (run->parsed()) return cmd_run(opts, dump_scores);
    if (bench->parsed()) return cmd_bench(opts, repeat);
    if (check->parsed()) return cmd_check_config(config_file);
    if (show->parsed()) {
      std::cout << save_scenario(resolve_scenario(show_name));
      return 0;
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n" << app.help();
    return kUsageExitCode;
  } catch (const ScenarioError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsageExitCode;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kUsageExitCode;
}
