#include "resync/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "resync/errors.hpp"

namespace resync {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

}  // namespace

void write_rotation_set(const std::filesystem::path& path,
                        const RotationSet& set) {
  std::ofstream out = open_out(path);
  out << "K=" << set.k() << "\n";
  for (const Rotation& r : set.rotations) {
    for (int row = 0; row < 3; ++row) {
      for (int col = 0; col < 3; ++col) {
        if (row != 0 || col != 0) out << ' ';
        out << format_double(r(row, col));
      }
    }
    out << "\n";
  }
  if (!out) throw IoError("failed writing " + path.string());
}

RotationSet read_rotation_set(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  std::string header;
  if (!std::getline(in, header) || header.rfind("K=", 0) != 0) {
    throw IoError(path.string() + ": expected 'K=<int>' header");
  }
  const int k = std::stoi(header.substr(2));
  if (k < 1) throw IoError(path.string() + ": invalid K");
  RotationSet set;
  set.rotations.resize(static_cast<size_t>(k));
  for (int i = 0; i < k; ++i) {
    Rotation& r = set.rotations[static_cast<size_t>(i)];
    for (int row = 0; row < 3; ++row) {
      for (int col = 0; col < 3; ++col) {
        if (!(in >> r(row, col))) {
          throw IoError(path.string() + ": truncated rotation data");
        }
      }
    }
  }
  return set;
}

void write_common_lines(const std::filesystem::path& path,
                        const CommonLineSet& set) {
  std::ofstream out = open_out(path);
  out << "K=" << set.k << " ntheta=" << set.n_theta << "\n";
  for (const CommonLinePair& pr : set.pairs) {
    out << pr.i << ' ' << pr.j;
    if (set.n_theta > 0) {
      out << ' ' << nearest_bin(pr.c_ij, set.n_theta) << ' '
          << nearest_bin(pr.c_ji, set.n_theta);
    } else {
      out << ' ' << format_double(pr.c_ij.x()) << ' '
          << format_double(pr.c_ij.y()) << ' ' << format_double(pr.c_ji.x())
          << ' ' << format_double(pr.c_ji.y());
    }
    out << "\n";
  }
  if (!out) throw IoError("failed writing " + path.string());
}

CommonLineSet read_common_lines(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  std::string header;
  if (!std::getline(in, header)) {
    throw IoError(path.string() + ": missing header");
  }
  int k = -1;
  int n_theta = -1;
  if (std::sscanf(header.c_str(), "K=%d ntheta=%d", &k, &n_theta) != 2 ||
      k < 2 || n_theta < 0) {
    throw IoError(path.string() + ": expected 'K=<int> ntheta=<int>' header");
  }
  CommonLineSet set;
  set.k = k;
  set.n_theta = n_theta;
  const int expected = k * (k - 1) / 2;
  set.pairs.resize(static_cast<size_t>(expected));
  for (int m = 0; m < expected; ++m) {
    CommonLinePair pr;
    if (!(in >> pr.i >> pr.j)) {
      throw IoError(path.string() + ": truncated pair list");
    }
    if (pr.i < 0 || pr.j <= pr.i || pr.j >= k) {
      throw IoError(path.string() + ": bad pair indices");
    }
    if (n_theta > 0) {
      int a_ij = 0;
      int a_ji = 0;
      if (!(in >> a_ij >> a_ji)) {
        throw IoError(path.string() + ": truncated pair list");
      }
      if (a_ij < 0 || a_ij >= n_theta || a_ji < 0 || a_ji >= n_theta) {
        throw IoError(path.string() + ": angle bin out of range");
      }
      pr.c_ij = grid_line(a_ij, n_theta);
      pr.c_ji = grid_line(a_ji, n_theta);
    } else {
      double xij, yij, xji, yji;
      if (!(in >> xij >> yij >> xji >> yji)) {
        throw IoError(path.string() + ": truncated pair list");
      }
      pr.c_ij = Vec3(xij, yij, 0.0);
      pr.c_ji = Vec3(xji, yji, 0.0);
    }
    const int at = set.pair_index(pr.i, pr.j);
    if (at != m) throw IoError(path.string() + ": pairs out of order");
    set.pairs[static_cast<size_t>(m)] = pr;
  }
  return set;
}

void write_trace_csv(const std::filesystem::path& path,
                     const IterationTrace& trace) {
  std::ofstream out = open_out(path);
  out << "iter,mu,objective,mse,theta,seconds\n";
  for (const TraceRecord& rec : trace.records) {
    out << rec.iter << ',' << format_double(rec.mu) << ','
        << format_double(rec.objective) << ',';
    if (!std::isnan(rec.mse)) out << format_double(rec.mse);
    out << ',';
    if (!std::isnan(rec.theta)) out << format_double(rec.theta);
    out << ',' << format_double(rec.seconds) << "\n";
  }
  if (!out) throw IoError("failed writing " + path.string());
}

std::string eval_report_csv(const EvalReport& report) {
  return format_double(report.mse) + "," +
         (report.handedness_flipped ? "1" : "0");
}

std::map<std::string, std::string> read_kv_file(
    const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const size_t first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const size_t last = line.find_last_not_of(" \t\r");
    line = line.substr(first, last - first + 1);
    const size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw IoError(path.string() + ":" + std::to_string(lineno) +
                    ": expected key=value");
    }
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1);
    const size_t kend = key.find_last_not_of(" \t");
    key = key.substr(0, kend == std::string::npos ? 0 : kend + 1);
    const size_t vstart = value.find_first_not_of(" \t");
    value = vstart == std::string::npos ? "" : value.substr(vstart);
    kv[key] = value;
  }
  return kv;
}

Method parse_method(const std::string& name) {
  if (name == "full") return Method::full;
  if (name == "sgd") return Method::sgd;
  if (name == "bcd") return Method::bcd;
  if (name == "bsgd") return Method::bsgd;
  throw IoError("unknown method '" + name + "'");
}

StepSchedule parse_schedule(const std::string& name) {
  if (name == "constant_horizon") return StepSchedule::constant_horizon;
  if (name == "inv_sqrt") return StepSchedule::inv_sqrt;
  if (name == "geometric") return StepSchedule::geometric;
  throw IoError("unknown schedule '" + name + "'");
}

std::string method_name(Method m) {
  switch (m) {
    case Method::full:
      return "full";
    case Method::sgd:
      return "sgd";
    case Method::bcd:
      return "bcd";
    case Method::bsgd:
      return "bsgd";
  }
  return "?";
}

std::string schedule_name(StepSchedule s) {
  switch (s) {
    case StepSchedule::constant_horizon:
      return "constant_horizon";
    case StepSchedule::inv_sqrt:
      return "inv_sqrt";
    case StepSchedule::geometric:
      return "geometric";
  }
  return "?";
}

SolverConfig apply_solver_config(const std::map<std::string, std::string>& kv,
                                 SolverConfig base) {
  std::optional<double> rho;
  for (const auto& [key, value] : kv) {
    try {
      if (key == "method") {
        base.method = parse_method(value);
      } else if (key == "rho1") {
        base.rho1 = std::stod(value);
      } else if (key == "rho2") {
        base.rho2 = std::stod(value);
      } else if (key == "rho") {
        rho = std::stod(value);
      } else if (key == "step0") {
        base.step0 = std::stod(value);
      } else if (key == "schedule") {
        base.schedule = parse_schedule(value);
      } else if (key == "beta") {
        base.beta = std::stod(value);
      } else if (key == "max_iters") {
        base.max_iters = std::stoi(value);
      } else if (key == "tol") {
        base.tol = std::stod(value);
      } else if (key == "reshuffle") {
        base.reshuffle = value == "1" || value == "true";
      } else if (key == "norm_alpha") {
        base.norm_alpha = std::stod(value);
      } else if (key == "seed") {
        base.seed = std::stoull(value);
      } else {
        throw IoError("unknown solver config key '" + key + "'");
      }
    } catch (const std::invalid_argument&) {
      throw IoError("bad value for solver config key '" + key + "'");
    } catch (const std::out_of_range&) {
      throw IoError("bad value for solver config key '" + key + "'");
    }
  }
  if (rho) apply_filter_ratio(base, *rho);
  return base;
}

void apply_filter_ratio(SolverConfig& cfg, double rho) {
  switch (cfg.method) {
    case Method::full:
      cfg.rho1 = cfg.rho2 = rho;  // rejected later unless rho == 1
      break;
    case Method::sgd:
      cfg.rho2 = rho;
      break;
    case Method::bcd:
      cfg.rho1 = rho;
      break;
    case Method::bsgd:
      cfg.rho1 = cfg.rho2 = rho;
      break;
  }
}

}  // namespace resync
