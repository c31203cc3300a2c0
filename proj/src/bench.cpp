#include "resync/bench.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "resync/errors.hpp"
#include "resync/eval.hpp"
#include "resync/io.hpp"
#include "resync/rng.hpp"
#include "resync/spectral_init.hpp"

namespace resync {

namespace {

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

MethodSpec parse_method_spec(const std::string& token) {
  MethodSpec spec;
  spec.label = token;
  const size_t colon = token.find(':');
  if (colon == std::string::npos) {
    spec.method = parse_method(token);
    spec.rho = 1.0;
  } else {
    spec.method = parse_method(token.substr(0, colon));
    spec.rho = std::stod(token.substr(colon + 1));
  }
  return spec;
}

}  // namespace

BenchSpec parse_bench_spec(const std::filesystem::path& path) {
  auto kv = read_kv_file(path);
  BenchSpec spec;

  auto take = [&kv](const char* key) -> std::string {
    auto it = kv.find(key);
    if (it == kv.end()) throw IoError(std::string("bench spec: missing ") + key);
    std::string v = it->second;
    kv.erase(it);
    return v;
  };

  for (const std::string& t : split_list(take("k_values"))) {
    spec.k_values.push_back(std::stoi(t));
  }
  for (const std::string& t : split_list(take("p_values"))) {
    const double p = std::stod(t);
    if (p < 0.0 || p > 1.0) throw IoError("bench spec: p outside [0, 1]");
    spec.p_values.push_back(p);
  }
  for (const std::string& t : split_list(take("methods"))) {
    spec.methods.push_back(parse_method_spec(t));
  }
  for (const std::string& t : split_list(take("seeds"))) {
    spec.seeds.push_back(std::stoull(t));
  }
  spec.output_dir = take("output_dir");
  if (auto it = kv.find("ntheta"); it != kv.end()) {
    spec.n_theta = std::stoi(it->second);
    kv.erase(it);
  }
  if (spec.k_values.empty() || spec.p_values.empty() || spec.methods.empty() ||
      spec.seeds.empty()) {
    throw IoError("bench spec: all lists must be nonempty");
  }
  spec.base = apply_solver_config(kv, spec.base);
  return spec;
}

std::vector<BenchRow> run_bench(const BenchSpec& spec, std::ostream& log) {
  using Clock = std::chrono::steady_clock;
  std::vector<BenchRow> rows;

  for (int k : spec.k_values) {
    for (double p : spec.p_values) {
      for (std::uint64_t seed : spec.seeds) {
        // Instance shared by all methods of this (K, p, seed) cell group.
        const std::uint64_t data_seed = seed_hash(
            "data|" + std::to_string(k) + "|" + format_double(p) + "|" +
            std::to_string(seed));
        RotationSet truth;
        CommonLineSet lines;
        SpectralInitResult init;
        double init_seconds = 0.0;
        double init_mse = 0.0;
        std::string instance_error;
        try {
          truth = sample_uniform_so3(k, data_seed);
          lines = corrupt(true_common_lines(truth, spec.n_theta),
                          CorruptionModel{p, data_seed + 1});
          const auto t0 = Clock::now();
          init = spectral_initialize(build_sync_matrix(lines));
          init_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
          init_mse = register_rotations(truth, init.rotations).mse;
        } catch (const std::exception& e) {
          instance_error = e.what();
        }

        for (const MethodSpec& method : spec.methods) {
          BenchRow row;
          row.method = method.label;
          row.k = k;
          row.p = p;
          row.seed = seed;
          row.init_mse = init_mse;
          row.init_seconds = init_seconds;
          if (!instance_error.empty()) {
            row.status = "error:" + instance_error;
            rows.push_back(row);
            continue;
          }
          try {
            SolverConfig cfg = spec.base;
            cfg.method = method.method;
            cfg.rho1 = cfg.rho2 = 1.0;
            apply_filter_ratio(cfg, method.rho);
            cfg.seed = seed_hash("solve|" + method.label + "|" +
                                 std::to_string(k) + "|" + format_double(p) +
                                 "|" + std::to_string(seed));
            SolveOptions opts;
            opts.record_every = 0x7fffffff;  // final record only
            auto [estimate, trace] = solve(lines, init.rotations, cfg, opts);
            row.mse = register_rotations(truth, estimate).mse;
            row.seconds = trace.solve_seconds;
            row.iters = trace.iterations;
          } catch (const std::exception& e) {
            row.status = std::string("error:") + e.what();
          }
          rows.push_back(row);
          log << "bench " << row.method << " K=" << row.k << " p=" << row.p
              << " seed=" << row.seed << " mse=" << row.mse
              << " time=" << row.seconds << " status=" << row.status << "\n";
        }
      }
    }
  }
  return rows;
}

void write_bench_cells_csv(const std::filesystem::path& path,
                           const std::vector<BenchRow>& rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "method,K,p,seed,mse,seconds,iters,init_mse,init_seconds,status\n";
  for (const BenchRow& r : rows) {
    out << r.method << ',' << r.k << ',' << format_double(r.p) << ',' << r.seed
        << ',' << format_double(r.mse) << ',' << format_double(r.seconds)
        << ',' << r.iters << ',' << format_double(r.init_mse) << ','
        << format_double(r.init_seconds) << ',' << r.status << "\n";
  }
}

void write_bench_aggregate_csv(const std::filesystem::path& dir,
                               const BenchSpec& spec,
                               const std::vector<BenchRow>& rows) {
  for (int k : spec.k_values) {
    std::ofstream out(dir / ("aggregate_K" + std::to_string(k) + ".csv"));
    if (!out) throw IoError("cannot write aggregate table");
    out << "method";
    for (double p : spec.p_values) {
      out << ",mse_p" << format_double(p) << ",time_p" << format_double(p);
    }
    out << "\n";

    auto mean_over_seeds = [&](const std::string& label, double p,
                               bool init_row) -> std::pair<double, double> {
      double mse = 0.0;
      double sec = 0.0;
      int n = 0;
      for (const BenchRow& r : rows) {
        if (r.k != k || r.p != p || r.status != "ok") continue;
        if (!init_row && r.method != label) continue;
        if (init_row && r.method != spec.methods.front().label) continue;
        mse += init_row ? r.init_mse : r.mse;
        sec += init_row ? r.init_seconds : r.seconds;
        ++n;
      }
      if (n == 0) return {std::nan(""), std::nan("")};
      return {mse / n, sec / n};
    };

    out << "eig";
    for (double p : spec.p_values) {
      const auto [mse, sec] = mean_over_seeds("", p, true);
      out << ',' << format_double(mse) << ',' << format_double(sec);
    }
    out << "\n";
    for (const MethodSpec& method : spec.methods) {
      out << method.label;
      for (double p : spec.p_values) {
        const auto [mse, sec] = mean_over_seeds(method.label, p, false);
        out << ',' << format_double(mse) << ',' << format_double(sec);
      }
      out << "\n";
    }
  }
}

}  // namespace resync
