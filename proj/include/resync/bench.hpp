#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "resync/solver.hpp"

namespace resync {

/// One solver template of a benchmark grid: a method plus its filter ratio.
struct MethodSpec {
  std::string label;  // e.g. "full", "bsgd:0.1"
  Method method = Method::full;
  double rho = 1.0;
};

/// Benchmark grid: methods x K x p x seeds.
struct BenchSpec {
  std::vector<int> k_values;
  std::vector<double> p_values;
  std::vector<MethodSpec> methods;
  std::vector<std::uint64_t> seeds;
  std::filesystem::path output_dir;
  int n_theta = 360;
  SolverConfig base;  // schedule, step0, max_iters, tol shared by all cells
};

/// One grid cell result. `status` is "ok" or "error:<reason>"; failed cells
/// keep the run going. Initialization cost and accuracy are reported
/// separately from the solve, mirroring the usual presentation where the
/// eigenvector baseline is its own row.
struct BenchRow {
  std::string method;
  int k = 0;
  double p = 0.0;
  std::uint64_t seed = 0;
  double mse = 0.0;
  double seconds = 0.0;
  int iters = 0;
  double init_mse = 0.0;
  double init_seconds = 0.0;
  std::string status = "ok";
};

/// Parses a key=value spec file. Recognized keys: k_values, p_values,
/// methods (comma-separated name[:rho] tokens), seeds, output_dir, ntheta,
/// plus any SolverConfig key shared by all cells.
BenchSpec parse_bench_spec(const std::filesystem::path& path);

/// Runs every cell of the grid; per-cell RNG seeds are derived by hashing
/// (method, K, p, trial) with the cell's base seed so cells are independent
/// and individually reproducible. `log` gets one progress line per cell.
std::vector<BenchRow> run_bench(const BenchSpec& spec, std::ostream& log);

/// cells.csv: one row per grid cell.
void write_bench_cells_csv(const std::filesystem::path& path,
                           const std::vector<BenchRow>& rows);

/// aggregate_K<k>.csv per K value: methods (plus the "eig" initialization
/// row) as rows, one MSE/Time column pair per detection rate, averaged over
/// seeds.
void write_bench_aggregate_csv(const std::filesystem::path& dir,
                               const BenchSpec& spec,
                               const std::vector<BenchRow>& rows);

}  // namespace resync
