// Command-line driver: synthetic common-line simulation, LUD solving,
// registered-MSE evaluation, and the benchmark grid harness.

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "resync/bench.hpp"
#include "resync/common_lines.hpp"
#include "resync/errors.hpp"
#include "resync/eval.hpp"
#include "resync/io.hpp"
#include "resync/rng.hpp"
#include "resync/so3.hpp"
#include "resync/solver.hpp"
#include "resync/spectral_init.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitSolverError = 1;
constexpr int kExitUsageError = 2;

struct SimulateArgs {
  int k = 100;
  double p = 1.0;
  int n_theta = 360;
  std::uint64_t seed = 0;
  std::string truth_out = "truth.txt";
  std::string lines_out = "lines.txt";
};

int cmd_simulate(const SimulateArgs& args) {
  using namespace resync;
  RotationSet truth;
  CommonLineSet clean;
  bool generated = false;
  // Parallel viewing directions have probability zero under Haar sampling,
  // but quantized seeds can in principle collide; resample a bounded number
  // of times before giving up.
  for (int attempt = 0; attempt < 10; ++attempt) {
    const std::uint64_t seed =
        attempt == 0 ? args.seed
                     : seed_hash("resample|" + std::to_string(args.seed) +
                                 "|" + std::to_string(attempt));
    truth = sample_uniform_so3(args.k, seed);
    try {
      clean = true_common_lines(truth, args.n_theta);
      generated = true;
      break;
    } catch (const DegeneratePair& e) {
      std::cerr << "resync: " << e.what() << ", resampling\n";
    }
  }
  if (!generated) {
    std::cerr << "resync: too many degenerate instances\n";
    return kExitSolverError;
  }

  const CommonLineSet corrupted =
      corrupt(clean, CorruptionModel{
                         args.p, seed_hash("corrupt|" +
                                           std::to_string(args.seed))});
  write_rotation_set(args.truth_out, truth);
  write_common_lines(args.lines_out, corrupted);

  std::cout << "clean objective at truth: "
            << format_double(objective_lud(truth, clean)) << "\n"
            << "corrupted objective at truth: "
            << format_double(objective_lud(truth, corrupted)) << "\n";
  return kExitOk;
}

struct SolveArgs {
  std::string data;
  std::string init = "eig";
  std::string out = "estimate.txt";
  std::string trace_out;
  std::string truth;
  std::string config_file;
  std::optional<double> rho;
  std::optional<double> rho1;
  std::optional<double> rho2;
  std::optional<std::string> method;
  std::optional<std::string> schedule;
  std::optional<double> step0;
  std::optional<double> beta;
  std::optional<int> max_iters;
  std::optional<double> tol;
  std::optional<double> alpha;
  std::optional<std::uint64_t> seed;
  bool reshuffle = false;
  int theta_every = 0;
  double theta_lambda = 0.5;
  int theta_iters = 50;
  double theta_step = 0.05;
  std::optional<double> target_mse;
  int trace_every = 1;
};

int cmd_solve(const SolveArgs& args) {
  using namespace resync;
  const CommonLineSet lines = read_common_lines(args.data);

  SolverConfig cfg;
  if (!args.config_file.empty()) {
    cfg = apply_solver_config(read_kv_file(args.config_file), cfg);
  }
  if (args.method) cfg.method = parse_method(*args.method);
  if (args.schedule) cfg.schedule = parse_schedule(*args.schedule);
  if (args.step0) cfg.step0 = *args.step0;
  if (args.beta) cfg.beta = *args.beta;
  if (args.max_iters) cfg.max_iters = *args.max_iters;
  if (args.tol) cfg.tol = *args.tol;
  if (args.alpha) cfg.norm_alpha = *args.alpha;
  if (args.seed) cfg.seed = *args.seed;
  if (args.reshuffle) cfg.reshuffle = true;
  if (args.rho) apply_filter_ratio(cfg, *args.rho);
  if (args.rho1) cfg.rho1 = *args.rho1;
  if (args.rho2) cfg.rho2 = *args.rho2;

  RotationSet init;
  if (args.init == "eig") {
    const SpectralInitResult result =
        spectral_initialize(build_sync_matrix(lines));
    if (result.gap_warning) {
      std::cerr << "resync: warning: top eigenspace poorly separated, "
                   "initialization may be unreliable\n";
    }
    init = result.rotations;
  } else if (args.init == "random") {
    init = sample_uniform_so3(lines.k, seed_hash("init|" +
                                                 std::to_string(cfg.seed)));
  } else if (args.init.rfind("file:", 0) == 0) {
    init = read_rotation_set(args.init.substr(5));
  } else {
    std::cerr << "resync: --init must be eig, random or file:<path>\n";
    return kExitUsageError;
  }

  RotationSet truth;
  SolveOptions opts;
  if (!args.truth.empty()) {
    truth = read_rotation_set(args.truth);
    opts.truth = &truth;
  }
  opts.record_every = args.trace_every;
  opts.target_mse = args.target_mse;
  ThetaParams theta_params{args.theta_lambda, args.theta_iters,
                           args.theta_step};
  if (args.theta_every > 0) {
    opts.theta_every = args.theta_every;
    opts.theta_fn = [&lines, theta_params](const RotationSet& r) {
      return estimate_theta(r, lines, theta_params);
    };
  }

  auto [estimate, trace] = cfg.norm_alpha
                               ? solve_norm_constrained(lines, init, cfg, opts)
                               : solve(lines, init, cfg, opts);

  write_rotation_set(args.out, estimate);
  if (!args.trace_out.empty()) write_trace_csv(args.trace_out, trace);

  const TraceRecord& last = trace.records.back();
  std::cout << "iters: " << trace.iterations << "\n"
            << "objective: " << format_double(last.objective) << "\n"
            << "seconds: " << format_double(trace.solve_seconds) << "\n";
  if (opts.truth) std::cout << "mse: " << format_double(last.mse) << "\n";
  return kExitOk;
}

int cmd_eval(const std::string& truth_path, const std::string& est_path) {
  using namespace resync;
  const RotationSet truth = read_rotation_set(truth_path);
  const RotationSet est = read_rotation_set(est_path);
  const EvalReport report = register_rotations(truth, est);
  std::cout << eval_report_csv(report) << "\n";
  return kExitOk;
}

int cmd_bench(const std::string& spec_path) {
  using namespace resync;
  const BenchSpec spec = parse_bench_spec(spec_path);
  std::filesystem::create_directories(spec.output_dir);
  const std::vector<BenchRow> rows = run_bench(spec, std::cerr);
  write_bench_cells_csv(spec.output_dir / "cells.csv", rows);
  write_bench_aggregate_csv(spec.output_dir, spec, rows);
  std::cout << "wrote " << (spec.output_dir / "cells.csv").string() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rotation synchronization from pairwise common lines"};
  app.require_subcommand(1);

  SimulateArgs sim;
  CLI::App* simulate = app.add_subcommand(
      "simulate", "Generate a synthetic truth + corrupted common-line file");
  simulate->add_option("--k", sim.k, "number of rotations")->required();
  simulate->add_option("--p", sim.p, "detection rate in [0,1]");
  simulate->add_option("--ntheta", sim.n_theta,
                       "angular grid resolution (0 = continuous)");
  simulate->add_option("--seed", sim.seed, "RNG seed");
  simulate->add_option("--truth", sim.truth_out, "truth rotations output");
  simulate->add_option("--lines", sim.lines_out, "common-line output");

  SolveArgs sol;
  CLI::App* solve_cmd = app.add_subcommand(
      "solve", "Run the Riemannian subgradient solver on a common-line file");
  solve_cmd->add_option("--data", sol.data, "common-line file")->required();
  solve_cmd->add_option("--init", sol.init, "eig | random | file:<path>");
  solve_cmd->add_option("--out", sol.out, "estimate output file");
  solve_cmd->add_option("--trace", sol.trace_out, "iteration trace CSV");
  solve_cmd->add_option("--truth", sol.truth,
                        "truth rotations (enables mse tracing)");
  solve_cmd->add_option("--config", sol.config_file,
                        "key=value solver config file");
  solve_cmd->add_option("--method", sol.method, "full | sgd | bcd | bsgd");
  solve_cmd->add_option("--rho", sol.rho, "filter ratio");
  solve_cmd->add_option("--rho1", sol.rho1, "updated-block ratio");
  solve_cmd->add_option("--rho2", sol.rho2, "data-block ratio");
  solve_cmd->add_option("--step0", sol.step0, "initial step size");
  solve_cmd->add_option("--schedule", sol.schedule,
                        "constant_horizon | inv_sqrt | geometric");
  solve_cmd->add_option("--beta", sol.beta, "geometric decay factor");
  solve_cmd->add_option("--max-iters", sol.max_iters, "iteration cap");
  solve_cmd->add_option("--tol", sol.tol, "relative-change stopping tol");
  solve_cmd->add_flag("--reshuffle", sol.reshuffle,
                      "random reshuffling block scheduler");
  solve_cmd->add_option("--alpha", sol.alpha,
                        "spectral-norm constraint parameter in [2/3,1)");
  solve_cmd->add_option("--seed", sol.seed, "solver RNG seed");
  solve_cmd->add_option("--theta-every", sol.theta_every,
                        "estimate Theta every N iterations (0 = off)");
  solve_cmd->add_option("--theta-lambda", sol.theta_lambda,
                        "Moreau envelope parameter");
  solve_cmd->add_option("--theta-iters", sol.theta_iters,
                        "inner iterations of the Theta estimate");
  solve_cmd->add_option("--theta-step", sol.theta_step,
                        "inner initial step of the Theta estimate");
  solve_cmd->add_option("--target-mse", sol.target_mse,
                        "stop early at this registered MSE (needs --truth)");
  solve_cmd->add_option("--trace-every", sol.trace_every,
                        "trace cadence in iterations");

  std::string eval_truth;
  std::string eval_est;
  CLI::App* eval_cmd = app.add_subcommand(
      "eval", "Registered MSE between two rotation files ('mse,flipped')");
  eval_cmd->add_option("truth", eval_truth, "truth rotations")->required();
  eval_cmd->add_option("estimate", eval_est, "estimated rotations")
      ->required();

  std::string bench_spec;
  CLI::App* bench_cmd =
      app.add_subcommand("bench", "Run a benchmark grid from a spec file");
  bench_cmd->add_option("--spec", bench_spec, "key=value bench spec file")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsageError;
  }

  try {
    if (simulate->parsed()) return cmd_simulate(sim);
    if (solve_cmd->parsed()) return cmd_solve(sol);
    if (eval_cmd->parsed()) return cmd_eval(eval_truth, eval_est);
    if (bench_cmd->parsed()) return cmd_bench(bench_spec);
  } catch (const resync::IoError& e) {
    std::cerr << "resync: " << e.what() << "\n";
    return kExitUsageError;
  } catch (const resync::InvalidConfig& e) {
    std::cerr << "resync: " << e.what() << "\n";
    return kExitUsageError;
  } catch (const resync::DimensionMismatch& e) {
    std::cerr << "resync: " << e.what() << "\n";
    return kExitUsageError;
  } catch (const resync::Error& e) {
    std::cerr << "resync: " << e.what() << "\n";
    return kExitSolverError;
  } catch (const std::exception& e) {
    std::cerr << "resync: " << e.what() << "\n";
    return kExitSolverError;
  }
  return kExitUsageError;
}
