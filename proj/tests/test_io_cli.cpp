#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "resync/bench.hpp"
#include "resync/common_lines.hpp"
#include "resync/errors.hpp"
#include "resync/eval.hpp"
#include "resync/io.hpp"
#include "resync/rng.hpp"
#include "resync/so3.hpp"
#include "resync/solver.hpp"

using namespace resync;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  static int counter = 0;
  const fs::path dir = fs::temp_directory_path() /
                       ("resync_test_" + std::to_string(::getpid()) + "_" +
                        std::to_string(counter++));
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Runs the CLI binary; returns its exit code.
int run_cli(const std::string& args) {
  const std::string cmd = std::string(RESYNC_CLI_PATH) + " " + args +
                          " > /dev/null 2> /dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

int run_cli_capture(const std::string& args, const fs::path& out_file) {
  const std::string cmd = std::string(RESYNC_CLI_PATH) + " " + args + " > " +
                          out_file.string() + " 2> /dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("format_double round-trips doubles exactly") {
  Rng rng(1);
  for (int trial = 0; trial < 1000; ++trial) {
    const double x = (rng.uniform() - 0.5) * std::pow(10.0, rng.uniform_int(40) - 20.0);
    CHECK(std::stod(format_double(x)) == x);
  }
  CHECK(std::stod(format_double(0.1)) == 0.1);
  CHECK(std::stod(format_double(-1.0 / 3.0)) == -1.0 / 3.0);
}

TEST_CASE("rotation-set files round-trip byte for byte") {
  const fs::path dir = temp_dir();
  const RotationSet set = sample_uniform_so3(17, 2);
  const fs::path a = dir / "a.txt";
  const fs::path b = dir / "b.txt";
  write_rotation_set(a, set);
  const RotationSet back = read_rotation_set(a);
  REQUIRE(back.k() == 17);
  for (int i = 0; i < 17; ++i) CHECK(back[i] == set[i]);
  write_rotation_set(b, back);
  CHECK(slurp(a) == slurp(b));
}

TEST_CASE("common-line files round-trip byte for byte") {
  const fs::path dir = temp_dir();
  const RotationSet truth = sample_uniform_so3(12, 3);
  for (int n_theta : {360, 0}) {
    const CommonLineSet set = corrupt(true_common_lines(truth, n_theta),
                                      CorruptionModel{0.5, 4});
    const fs::path a = dir / ("lines" + std::to_string(n_theta) + "a.txt");
    const fs::path b = dir / ("lines" + std::to_string(n_theta) + "b.txt");
    write_common_lines(a, set);
    const CommonLineSet back = read_common_lines(a);
    REQUIRE(back.k == set.k);
    REQUIRE(back.n_theta == set.n_theta);
    for (size_t m = 0; m < set.pairs.size(); ++m) {
      CHECK(back.pairs[m].c_ij == set.pairs[m].c_ij);
      CHECK(back.pairs[m].c_ji == set.pairs[m].c_ji);
    }
    write_common_lines(b, back);
    CHECK(slurp(a) == slurp(b));
  }
}

TEST_CASE("malformed files raise IoError") {
  const fs::path dir = temp_dir();
  const fs::path bad = dir / "bad.txt";
  {
    std::ofstream out(bad);
    out << "not a header\n";
  }
  CHECK_THROWS_AS(read_rotation_set(bad), IoError);
  CHECK_THROWS_AS(read_common_lines(bad), IoError);
  CHECK_THROWS_AS(read_rotation_set(dir / "missing.txt"), IoError);
}

TEST_CASE("trace CSV has the documented schema") {
  const fs::path dir = temp_dir();
  IterationTrace trace;
  TraceRecord rec;
  rec.iter = 0;
  rec.mu = 0.5;
  rec.objective = 2.25;
  rec.seconds = 0.125;
  trace.records.push_back(rec);
  rec.iter = 1;
  rec.mse = 1e-3;
  rec.theta = 2.5;
  trace.records.push_back(rec);
  const fs::path path = dir / "trace.csv";
  write_trace_csv(path, trace);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "iter,mu,objective,mse,theta,seconds");
  std::getline(in, line);
  CHECK(line == "0,0.5,2.25,,,0.125");
  std::getline(in, line);
  CHECK(line == "1,0.5,2.25,0.001,2.5,0.125");
}

TEST_CASE("key=value files parse with comments and padding") {
  const fs::path dir = temp_dir();
  const fs::path path = dir / "cfg.txt";
  {
    std::ofstream out(path);
    out << "# a comment\n"
        << "method = bsgd\n"
        << "rho=0.1\n"
        << "\n"
        << "max_iters=250  # trailing comment\n"
        << "reshuffle=true\n";
  }
  const auto kv = read_kv_file(path);
  const SolverConfig cfg = apply_solver_config(kv);
  CHECK(cfg.method == Method::bsgd);
  CHECK(cfg.rho1 == 0.1);
  CHECK(cfg.rho2 == 0.1);
  CHECK(cfg.max_iters == 250);
  CHECK(cfg.reshuffle);

  CHECK_THROWS_AS(apply_solver_config({{"bogus", "1"}}), IoError);
  CHECK_THROWS_AS(apply_solver_config({{"step0", "abc"}}), IoError);
}

TEST_CASE("eval report serializes as mse,flipped") {
  EvalReport report;
  report.mse = 0.5;
  report.handedness_flipped = true;
  CHECK(eval_report_csv(report) == "0.5,1");
}

TEST_CASE("bench spec files parse") {
  const fs::path dir = temp_dir();
  const fs::path path = dir / "bench.txt";
  {
    std::ofstream out(path);
    out << "k_values=100,300\n"
        << "p_values=0.5,0.3\n"
        << "methods=full,bsgd:0.1\n"
        << "seeds=1,2,3\n"
        << "output_dir=" << (dir / "out").string() << "\n"
        << "ntheta=360\n"
        << "schedule=geometric\n"
        << "step0=0.002\n"
        << "beta=0.97\n"
        << "max_iters=200\n";
  }
  const BenchSpec spec = parse_bench_spec(path);
  CHECK(spec.k_values == std::vector<int>{100, 300});
  CHECK(spec.p_values == std::vector<double>{0.5, 0.3});
  REQUIRE(spec.methods.size() == 2);
  CHECK(spec.methods[0].method == Method::full);
  CHECK(spec.methods[1].method == Method::bsgd);
  CHECK(spec.methods[1].rho == 0.1);
  CHECK(spec.seeds.size() == 3);
  CHECK(spec.base.schedule == StepSchedule::geometric);
  CHECK(spec.base.max_iters == 200);
}

TEST_CASE("cli: simulate writes deterministic, parseable files") {
  const fs::path dir = temp_dir();
  const std::string base = "simulate --k 50 --p 1.0 --ntheta 360 --seed 1 ";
  REQUIRE(run_cli(base + "--truth " + (dir / "t1.txt").string() + " --lines " +
                  (dir / "l1.txt").string()) == 0);
  REQUIRE(run_cli(base + "--truth " + (dir / "t2.txt").string() + " --lines " +
                  (dir / "l2.txt").string()) == 0);
  CHECK(slurp(dir / "t1.txt") == slurp(dir / "t2.txt"));
  CHECK(slurp(dir / "l1.txt") == slurp(dir / "l2.txt"));

  const RotationSet truth = read_rotation_set(dir / "t1.txt");
  CHECK(truth.k() == 50);
  CHECK(truth.valid(1e-10));
  const CommonLineSet lines = read_common_lines(dir / "l1.txt");
  CHECK(lines.k == 50);
  CHECK(lines.n_theta == 360);
  CHECK(lines.pair_count() == 50 * 49 / 2);
  for (const CommonLinePair& pr : lines.pairs) {
    CHECK(pr.c_ij == grid_line(nearest_bin(pr.c_ij, 360), 360));
  }
}

TEST_CASE("cli: corruption rate matches the binomial expectation") {
  const fs::path dir = temp_dir();
  REQUIRE(run_cli("simulate --k 100 --p 1.0 --ntheta 360 --seed 9 --truth " +
                  (dir / "t.txt").string() + " --lines " +
                  (dir / "clean.txt").string()) == 0);
  REQUIRE(run_cli("simulate --k 100 --p 0.3 --ntheta 360 --seed 9 --truth " +
                  (dir / "t.txt").string() + " --lines " +
                  (dir / "corr.txt").string()) == 0);
  const CommonLineSet clean = read_common_lines(dir / "clean.txt");
  const CommonLineSet corr = read_common_lines(dir / "corr.txt");
  int differing = 0;
  for (size_t m = 0; m < clean.pairs.size(); ++m) {
    if (!(clean.pairs[m].c_ij == corr.pairs[m].c_ij &&
          clean.pairs[m].c_ji == corr.pairs[m].c_ji)) {
      ++differing;
    }
  }
  const double fraction = static_cast<double>(differing) / clean.pair_count();
  CHECK(fraction > 0.67);  // 1 - p = 0.7 within 3 sigma
  CHECK(fraction < 0.73);
}

TEST_CASE("cli: solve from the truth file stops immediately on clean data") {
  const fs::path dir = temp_dir();
  REQUIRE(run_cli("simulate --k 30 --p 1.0 --ntheta 0 --seed 2 --truth " +
                  (dir / "t.txt").string() + " --lines " +
                  (dir / "l.txt").string()) == 0);
  REQUIRE(run_cli("solve --data " + (dir / "l.txt").string() +
                  " --init file:" + (dir / "t.txt").string() + " --out " +
                  (dir / "est.txt").string() + " --trace " +
                  (dir / "trace.csv").string()) == 0);
  // Starting at a stationary point: the relative-change rule fires on the
  // first iteration.
  std::ifstream in(dir / "trace.csv");
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows <= 3);  // header + init row + at most two iterations

  const RotationSet truth = read_rotation_set(dir / "t.txt");
  const RotationSet est = read_rotation_set(dir / "est.txt");
  CHECK(register_rotations(truth, est).mse < 1e-12);
}

TEST_CASE("cli: clean instance solves to high accuracy") {
  const fs::path dir = temp_dir();
  REQUIRE(run_cli("simulate --k 50 --p 1.0 --ntheta 0 --seed 3 --truth " +
                  (dir / "t.txt").string() + " --lines " +
                  (dir / "l.txt").string()) == 0);
  const fs::path out = dir / "solve_out.txt";
  REQUIRE(run_cli_capture(
              "solve --data " + (dir / "l.txt").string() +
                  " --init eig --step0 3e-4 --max-iters 500 --tol 1e-10" +
                  " --truth " + (dir / "t.txt").string() + " --out " +
                  (dir / "est.txt").string() + " --trace " +
                  (dir / "trace.csv").string(),
              out) == 0);
  const RotationSet truth = read_rotation_set(dir / "t.txt");
  const RotationSet est = read_rotation_set(dir / "est.txt");
  CHECK(register_rotations(truth, est).mse < 1e-6);

  // The trace's final mse column agrees.
  std::ifstream in(dir / "trace.csv");
  std::string line, last;
  std::getline(in, line);
  CHECK(line == "iter,mu,objective,mse,theta,seconds");
  while (std::getline(in, line)) {
    if (!line.empty()) last = line;
  }
  std::stringstream ss(last);
  std::string cell;
  for (int c = 0; c < 4; ++c) std::getline(ss, cell, ',');
  CHECK(std::stod(cell) < 1e-6);
}

TEST_CASE("cli: eval reports gauge and handedness equivalence") {
  const fs::path dir = temp_dir();
  const RotationSet truth = sample_uniform_so3(20, 5);
  write_rotation_set(dir / "t.txt", truth);

  Rng rng(6);
  Mat3 g;
  for (int a = 0; a < 3; ++a)
    for (int c = 0; c < 3; ++c) g(a, c) = rng.normal();
  const Rotation o = project_so3(g);
  RotationSet rotated;
  const Mat3 j = Vec3(1, 1, -1).asDiagonal();
  RotationSet conj;
  for (const Rotation& r : truth.rotations) {
    rotated.rotations.push_back(o * r);
    conj.rotations.push_back(j * r * j);
  }
  write_rotation_set(dir / "rot.txt", rotated);
  write_rotation_set(dir / "conj.txt", conj);

  const fs::path out = dir / "eval_out.txt";
  REQUIRE(run_cli_capture("eval " + (dir / "t.txt").string() + " " +
                              (dir / "t.txt").string(),
                          out) == 0);
  {
    std::stringstream ss(slurp(out));
    double mse;
    char comma;
    int flipped;
    ss >> mse >> comma >> flipped;
    CHECK(mse == 0.0);
    CHECK(flipped == 0);
  }
  REQUIRE(run_cli_capture("eval " + (dir / "t.txt").string() + " " +
                              (dir / "rot.txt").string(),
                          out) == 0);
  CHECK(std::stod(slurp(out)) < 1e-10);
  REQUIRE(run_cli_capture("eval " + (dir / "t.txt").string() + " " +
                              (dir / "conj.txt").string(),
                          out) == 0);
  {
    std::stringstream ss(slurp(out));
    double mse;
    char comma;
    int flipped;
    ss >> mse >> comma >> flipped;
    CHECK(mse < 1e-10);
    CHECK(flipped == 1);
  }
}

TEST_CASE("cli: eval exits 2 on mismatched sizes, usage errors exit 2") {
  const fs::path dir = temp_dir();
  write_rotation_set(dir / "a.txt", sample_uniform_so3(4, 1));
  write_rotation_set(dir / "b.txt", sample_uniform_so3(5, 1));
  CHECK(run_cli("eval " + (dir / "a.txt").string() + " " +
                (dir / "b.txt").string()) == 2);
  CHECK(run_cli("eval " + (dir / "a.txt").string() + " " +
                (dir / "missing.txt").string()) == 2);
  CHECK(run_cli("solve --data " + (dir / "missing.txt").string()) == 2);
  CHECK(run_cli("frobnicate") != 0);
}

TEST_CASE("cli: bench runs a small grid deterministically") {
  const fs::path dir = temp_dir();
  const fs::path spec = dir / "spec.txt";
  {
    std::ofstream out(spec);
    out << "k_values=40\n"
        << "p_values=0.5\n"
        << "methods=full,bsgd:0.2\n"
        << "seeds=1,2\n"
        << "output_dir=" << (dir / "out").string() << "\n"
        << "ntheta=360\n"
        << "schedule=inv_sqrt\n"
        << "step0=3e-4\n"
        << "max_iters=120\n"
        << "tol=0\n"
        << "reshuffle=true\n";
  }
  REQUIRE(run_cli("bench --spec " + spec.string()) == 0);
  REQUIRE(fs::exists(dir / "out" / "cells.csv"));
  REQUIRE(fs::exists(dir / "out" / "aggregate_K40.csv"));

  // cells.csv: header + 2 methods x 2 seeds.
  {
    std::ifstream in(dir / "out" / "cells.csv");
    std::string line;
    std::getline(in, line);
    CHECK(line ==
          "method,K,p,seed,mse,seconds,iters,init_mse,init_seconds,status");
    int rows = 0;
    while (std::getline(in, line)) {
      if (!line.empty()) {
        ++rows;
        CHECK(line.find(",ok") != std::string::npos);
      }
    }
    CHECK(rows == 4);
  }
  // aggregate: eig row + one row per method.
  {
    std::ifstream in(dir / "out" / "aggregate_K40.csv");
    std::string line;
    std::getline(in, line);
    CHECK(line == "method,mse_p0.5,time_p0.5");
    std::getline(in, line);
    CHECK(line.rfind("eig,", 0) == 0);
    int rows = 0;
    while (std::getline(in, line)) {
      if (!line.empty()) ++rows;
    }
    CHECK(rows == 2);
  }

  // Reproducibility: a second run yields identical mse columns.
  const std::string first = slurp(dir / "out" / "cells.csv");
  REQUIRE(run_cli("bench --spec " + spec.string()) == 0);
  const std::string second = slurp(dir / "out" / "cells.csv");
  auto mse_column = [](const std::string& csv) {
    std::stringstream ss(csv);
    std::string line, out;
    std::getline(ss, line);
    while (std::getline(ss, line)) {
      std::stringstream ls(line);
      std::string cell;
      for (int c = 0; c < 5; ++c) std::getline(ls, cell, ',');
      out += cell + ";";
    }
    return out;
  };
  CHECK(mse_column(first) == mse_column(second));
}

TEST_CASE("cli: bench shows the block-stochastic time advantage") {
  // Same fixed iteration budget for both methods; bsgd does ~1% of the
  // per-iteration work at rho = 0.1.
  const fs::path dir = temp_dir();
  const fs::path spec = dir / "spec.txt";
  {
    std::ofstream out(spec);
    out << "k_values=150\n"
        << "p_values=0.5,0.3\n"
        << "methods=full,bsgd:0.1\n"
        << "seeds=1\n"
        << "output_dir=" << (dir / "out").string() << "\n"
        << "schedule=inv_sqrt\nstep0=2e-4\nmax_iters=150\ntol=0\n"
        << "reshuffle=true\n";
  }
  REQUIRE(run_cli("bench --spec " + spec.string()) == 0);
  std::ifstream in(dir / "out" / "aggregate_K150.csv");
  std::string line;
  std::getline(in, line);  // header
  double full_time[2] = {0, 0};
  double bsgd_time[2] = {0, 0};
  while (std::getline(in, line)) {
    std::stringstream ls(line);
    std::string method, m0, t0c, m1, t1c;
    std::getline(ls, method, ',');
    std::getline(ls, m0, ',');
    std::getline(ls, t0c, ',');
    std::getline(ls, m1, ',');
    std::getline(ls, t1c, ',');
    if (method == "full") {
      full_time[0] = std::stod(t0c);
      full_time[1] = std::stod(t1c);
    } else if (method == "bsgd:0.1") {
      bsgd_time[0] = std::stod(t0c);
      bsgd_time[1] = std::stod(t1c);
    }
  }
  REQUIRE(full_time[0] > 0.0);
  REQUIRE(bsgd_time[0] > 0.0);
  CHECK(bsgd_time[0] < full_time[0]);
  CHECK(bsgd_time[1] < full_time[1]);
}

TEST_CASE("cli: bench spec with one cell yields one aggregate row per method") {
  const fs::path dir = temp_dir();
  const fs::path spec = dir / "spec.txt";
  {
    std::ofstream out(spec);
    out << "k_values=30\np_values=1.0\nmethods=full\nseeds=5\n"
        << "output_dir=" << (dir / "out").string() << "\n"
        << "schedule=inv_sqrt\nstep0=3e-4\nmax_iters=60\ntol=0\n";
  }
  REQUIRE(run_cli("bench --spec " + spec.string()) == 0);
  std::ifstream in(dir / "out" / "aggregate_K30.csv");
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) {
    if (!line.empty()) ++rows;
  }
  CHECK(rows == 3);  // header + eig + full
}
