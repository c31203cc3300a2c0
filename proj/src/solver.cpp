#include "resync/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <numeric>

#include "resync/errors.hpp"
#include "resync/eval.hpp"
#include "resync/rng.hpp"

namespace resync {

namespace {

constexpr double kZeroResidual = 1e-12;

void check_dims(const RotationSet& r, const CommonLineSet& set,
                const char* who) {
  if (r.k() != set.k) {
    throw DimensionMismatch(std::string(who) + ": rotation set has K=" +
                            std::to_string(r.k()) + ", common-line set has K=" +
                            std::to_string(set.k));
  }
}

double stacked_norm(const RotationSet& r) {
  double s = 0.0;
  for (const Rotation& m : r.rotations) s += m.squaredNorm();
  return std::sqrt(s);
}

}  // namespace

double objective_lud(const RotationSet& r, const CommonLineSet& set) {
  check_dims(r, set, "objective_lud");
  const int k = set.k;
  std::vector<double> row(static_cast<size_t>(k), 0.0);
#pragma omp parallel for schedule(dynamic, 8)
  for (int i = 0; i < k - 1; ++i) {
    double s = 0.0;
    const int base = set.pair_index(i, i + 1);
    for (int j = i + 1; j < k; ++j) {
      const CommonLinePair& pr = set.pairs[static_cast<size_t>(base + j - i - 1)];
      s += (r[i] * pr.c_ij - r[j] * pr.c_ji).norm();
    }
    row[static_cast<size_t>(i)] = s;
  }
  // Serial reduction keeps the value independent of the thread count.
  const double total = std::accumulate(row.begin(), row.end(), 0.0);
  return 2.0 * total;
}

double objective_ls(const RotationSet& r, const CommonLineSet& set) {
  check_dims(r, set, "objective_ls");
  const int k = set.k;
  std::vector<double> row(static_cast<size_t>(k), 0.0);
#pragma omp parallel for schedule(dynamic, 8)
  for (int i = 0; i < k - 1; ++i) {
    double s = 0.0;
    const int base = set.pair_index(i, i + 1);
    for (int j = i + 1; j < k; ++j) {
      const CommonLinePair& pr = set.pairs[static_cast<size_t>(base + j - i - 1)];
      s += (r[i] * pr.c_ij - r[j] * pr.c_ji).squaredNorm();
    }
    row[static_cast<size_t>(i)] = s;
  }
  const double total = std::accumulate(row.begin(), row.end(), 0.0);
  return 2.0 * total;
}

SubgradientBlock euclid_subgrad_block(const RotationSet& r,
                                      const CommonLineSet& set, int i,
                                      std::span<const int> peers) {
  check_dims(r, set, "euclid_subgrad_block");
  SubgradientBlock block;
  block.i = i;
  for (int j : peers) {
    if (j == i) continue;
    const CommonLinePair& pr = i < j ? set.pair(i, j) : set.pair(j, i);
    const Vec3& ci = i < j ? pr.c_ij : pr.c_ji;
    const Vec3& cj = i < j ? pr.c_ji : pr.c_ij;
    const Vec3 res = r[i] * ci - r[j] * cj;
    const double n = res.norm();
    if (n < kZeroResidual) continue;
    block.g += (res / n) * ci.transpose();
  }
  return block;
}

namespace {

// One Jacobi sweep over the blocks in d, all subgradients taken against the
// snapshot `in`. Writes are disjoint by block, so the sweep may run on any
// number of threads with bit-identical results.
void jacobi_sweep(const RotationSet& in, const CommonLineSet& set,
                  std::span<const int> d, std::span<const int> s, double mu,
                  RotationSet& out) {
  std::exception_ptr err = nullptr;
#pragma omp parallel for schedule(static)
  for (int idx = 0; idx < static_cast<int>(d.size()); ++idx) {
    try {
      const int i = d[static_cast<size_t>(idx)];
      const SubgradientBlock sg = euclid_subgrad_block(in, set, i, s);
      const TangentVector xi = project_tangent(in[i], sg.g);
      out[i] = qr_retract(xi, -mu);
    } catch (...) {
#pragma omp critical
      err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
}

}  // namespace

RotationSet resync_step(const RotationSet& r, const CommonLineSet& set,
                        std::span<const int> d, std::span<const int> s,
                        double mu) {
  if (d.empty() || s.empty()) {
    throw InvalidConfig("resync_step: d and s must be nonempty");
  }
  RotationSet out = r;
  jacobi_sweep(r, set, d, s, mu, out);
  return out;
}

namespace {

double step_size(const SolverConfig& cfg, int t) {
  switch (cfg.schedule) {
    case StepSchedule::constant_horizon:
      return 1.0 / std::sqrt(static_cast<double>(cfg.max_iters) + 1.0);
    case StepSchedule::inv_sqrt:
      return cfg.step0 / std::sqrt(static_cast<double>(t) + 1.0);
    case StepSchedule::geometric:
      return cfg.step0 * std::pow(cfg.beta, t);
  }
  return cfg.step0;
}

int block_count(double rho, int k) {
  const int m = static_cast<int>(std::lround(rho * k));
  return std::clamp(m, 1, k);
}

void shuffle_indices(std::vector<int>& v, Rng& rng) {
  for (int a = static_cast<int>(v.size()) - 1; a > 0; --a) {
    const int b = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(a) + 1));
    std::swap(v[static_cast<size_t>(a)], v[static_cast<size_t>(b)]);
  }
}

// Random-reshuffling chunk stream: a fresh permutation each epoch, handed
// out in contiguous chunks so every index appears exactly once per epoch.
// The last chunk of an epoch may be smaller.
class ChunkStream {
 public:
  ChunkStream(int k, int chunk) : perm_(static_cast<size_t>(k)), chunk_(chunk) {
    std::iota(perm_.begin(), perm_.end(), 0);
    pos_ = k;  // force a shuffle on first use
  }

  std::span<const int> next(Rng& rng) {
    const int k = static_cast<int>(perm_.size());
    if (pos_ >= k) {
      shuffle_indices(perm_, rng);
      pos_ = 0;
    }
    const int take = std::min(chunk_, k - pos_);
    std::span<const int> out(perm_.data() + pos_, static_cast<size_t>(take));
    pos_ += take;
    return out;
  }

 private:
  std::vector<int> perm_;
  int chunk_;
  int pos_;
};

// Uniform subset of size m: prefix of a partial Fisher-Yates pass over a
// persistent scratch permutation.
std::span<const int> draw_subset(std::vector<int>& scratch, int m, Rng& rng) {
  const int k = static_cast<int>(scratch.size());
  for (int a = 0; a < m; ++a) {
    const int b =
        a + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(k - a)));
    std::swap(scratch[static_cast<size_t>(a)], scratch[static_cast<size_t>(b)]);
  }
  return std::span<const int>(scratch.data(), static_cast<size_t>(m));
}

void validate_config(const SolverConfig& cfg, bool norm_variant) {
  auto bad = [](const std::string& msg) { throw InvalidConfig(msg); };
  if (cfg.rho1 <= 0.0 || cfg.rho1 > 1.0 || cfg.rho2 <= 0.0 || cfg.rho2 > 1.0)
    bad("filter ratios must be in (0, 1]");
  if (cfg.max_iters < 0) bad("max_iters must be >= 0");
  if (cfg.tol < 0.0) bad("tol must be >= 0");
  if (cfg.schedule != StepSchedule::constant_horizon && cfg.step0 <= 0.0)
    bad("step0 must be > 0");
  if (cfg.schedule == StepSchedule::geometric &&
      (cfg.beta <= 0.0 || cfg.beta > 1.0))
    bad("geometric schedule needs beta in (0, 1]");
  switch (cfg.method) {
    case Method::full:
      if (cfg.rho1 != 1.0 || cfg.rho2 != 1.0)
        bad("method=full requires rho1 = rho2 = 1");
      break;
    case Method::sgd:
      if (cfg.rho1 != 1.0) bad("method=sgd requires rho1 = 1");
      break;
    case Method::bcd:
      if (cfg.rho2 != 1.0) bad("method=bcd requires rho2 = 1");
      break;
    case Method::bsgd:
      if (cfg.rho1 != cfg.rho2) bad("method=bsgd requires rho1 = rho2");
      break;
  }
  if (norm_variant) {
    if (!cfg.norm_alpha)
      bad("solve_norm_constrained requires norm_alpha");
    if (*cfg.norm_alpha < 2.0 / 3.0 || *cfg.norm_alpha >= 1.0)
      bad("norm_alpha must be in [2/3, 1)");
  } else if (cfg.norm_alpha) {
    bad("norm_alpha is set: use solve_norm_constrained");
  }
}

std::pair<RotationSet, IterationTrace> run_solver(const CommonLineSet& set,
                                                  const RotationSet& init,
                                                  const SolverConfig& cfg,
                                                  const SolveOptions& opts,
                                                  bool norm_variant) {
  validate_config(cfg, norm_variant);
  check_dims(init, set, "solve");
  if (opts.truth && opts.truth->k() != init.k()) {
    throw DimensionMismatch("solve: truth K does not match init K");
  }
  if (opts.target_mse && !opts.truth) {
    throw InvalidConfig("solve: target_mse requires truth");
  }

  const int k = set.k;
  Rng rng(cfg.seed);
  RotationSet cur = init;
  IterationTrace trace;

  std::vector<int> all(static_cast<size_t>(k));
  std::iota(all.begin(), all.end(), 0);
  std::vector<int> scratch = all;
  std::vector<int> sorted;

  const int md = block_count(cfg.rho1, k);
  const int ms = block_count(cfg.rho2, k);
  ChunkStream d_stream(k, md);
  ChunkStream s_stream(k, ms);

  using Clock = std::chrono::steady_clock;
  double work = 0.0;

  auto audit = [&](const RotationSet& r) {
    trace.max_orthogonality_error =
        std::max(trace.max_orthogonality_error, r.max_orthogonality_error());
    trace.min_determinant =
        std::min(trace.min_determinant, r.min_determinant());
  };

  double last_mse = std::numeric_limits<double>::quiet_NaN();
  auto record = [&](int iter, double mu) {
    TraceRecord rec;
    rec.iter = iter;
    rec.mu = mu;
    rec.objective = objective_lud(cur, set);
    rec.seconds = work;
    if (opts.truth) {
      rec.mse = register_rotations(*opts.truth, cur).mse;
      last_mse = rec.mse;
    }
    if (opts.theta_fn && opts.theta_every > 0 &&
        iter % opts.theta_every == 0) {
      rec.theta = opts.theta_fn(cur);
    }
    trace.records.push_back(rec);
  };

  audit(cur);
  record(0, 0.0);

  const int record_every = std::max(1, opts.record_every);
  for (int t = 0; t < cfg.max_iters; ++t) {
    const auto t0 = Clock::now();
    const double mu = step_size(cfg, t);

    std::span<const int> d;
    std::span<const int> s;
    switch (cfg.method) {
      case Method::full:
        d = all;
        s = all;
        break;
      case Method::sgd:
        d = all;
        s = cfg.reshuffle ? s_stream.next(rng) : draw_subset(scratch, ms, rng);
        break;
      case Method::bcd:
        // Drawn order is kept: it is the Gauss-Seidel update sequence.
        d = cfg.reshuffle ? d_stream.next(rng) : draw_subset(scratch, md, rng);
        s = all;
        break;
      case Method::bsgd:
        d = cfg.reshuffle ? d_stream.next(rng) : draw_subset(scratch, md, rng);
        s = d;
        break;
    }
    if (cfg.method == Method::sgd || cfg.method == Method::bsgd) {
      // Jacobi sweeps do not depend on index order, so subsets are used in
      // sorted order; summation order (and hence every bit of the result)
      // then matches the full method when the filter ratio degenerates to 1.
      sorted.assign(s.begin(), s.end());
      std::sort(sorted.begin(), sorted.end());
      s = sorted;
      d = cfg.method == Method::bsgd ? std::span<const int>(sorted) : d;
    }

    const RotationSet prev = cur;
    if (cfg.method == Method::bcd) {
      // Gauss-Seidel: each block sees the freshest values, sequentially.
      for (int i : d) {
        const SubgradientBlock sg = euclid_subgrad_block(cur, set, i, s);
        const TangentVector xi = project_tangent(cur[i], sg.g);
        cur[i] = qr_retract(xi, -mu);
      }
    } else {
      jacobi_sweep(prev, set, d, s, mu, cur);
    }
    if (norm_variant) {
      alternating_projection(cur, *cfg.norm_alpha);
    }

    double diff2 = 0.0;
    for (int i : d) diff2 += (cur[i] - prev[i]).squaredNorm();
    if (norm_variant) {
      // Projections may move blocks outside d.
      diff2 = 0.0;
      for (int i = 0; i < k; ++i) diff2 += (cur[i] - prev[i]).squaredNorm();
    }
    const double rel_change = std::sqrt(diff2) / stacked_norm(prev);
    work += std::chrono::duration<double>(Clock::now() - t0).count();

    // Diagnostics below are untimed.
    trace.iterations = t + 1;
    audit(cur);
    const bool stop_tol = rel_change < cfg.tol;
    const bool last = stop_tol || t + 1 == cfg.max_iters;
    if ((t + 1) % record_every == 0 || last) {
      record(t + 1, mu);
    }
    if (opts.target_mse && !std::isnan(last_mse) &&
        last_mse <= *opts.target_mse) {
      trace.stopped_by_tol = false;
      break;
    }
    if (stop_tol) {
      trace.stopped_by_tol = true;
      break;
    }
  }

  trace.solve_seconds = work;
  return {std::move(cur), std::move(trace)};
}

}  // namespace

std::pair<RotationSet, IterationTrace> solve(const CommonLineSet& set,
                                             const RotationSet& init,
                                             const SolverConfig& cfg,
                                             const SolveOptions& opts) {
  return run_solver(set, init, cfg, opts, false);
}

std::pair<RotationSet, IterationTrace> solve_norm_constrained(
    const CommonLineSet& set, const RotationSet& init, const SolverConfig& cfg,
    const SolveOptions& opts) {
  return run_solver(set, init, cfg, opts, true);
}

void project_rtilde(RotationSet& r, double alpha) {
  const int k = r.k();
  Eigen::MatrixXd rt(2 * k, 3);
  for (int i = 0; i < k; ++i) {
    rt.row(2 * i) = r[i].row(0);
    rt.row(2 * i + 1) = r[i].row(1);
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      rt, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::Vector3d sv = svd.singularValues();
  if (sv(0) < 1e-12 || sv(1) < 1e-12 * sv(0)) {
    throw RankDeficient("project_rtilde: stacked two-row matrix has rank < 2");
  }
  const double scale = std::sqrt(alpha * static_cast<double>(k));
  const Eigen::MatrixXd proj =
      scale * svd.matrixU() * svd.matrixV().transpose();
  for (int i = 0; i < k; ++i) {
    r[i].row(0) = proj.row(2 * i);
    r[i].row(1) = proj.row(2 * i + 1);
  }
}

int alternating_projection(RotationSet& r, double alpha, int max_alternations,
                           double tol) {
  int rounds = 0;
  while (rounds < max_alternations) {
    const RotationSet prev = r;
    project_rtilde(r, alpha);
    for (Rotation& m : r.rotations) m = project_so3(m);
    ++rounds;
    double diff2 = 0.0;
    for (int i = 0; i < r.k(); ++i) diff2 += (r[i] - prev[i]).squaredNorm();
    if (std::sqrt(diff2) < tol) break;
  }
  return rounds;
}

double estimate_second_order_bound(int samples, std::uint64_t seed,
                                   double xi_scale) {
  Rng rng(seed);
  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    Mat3 g;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) g(r, c) = rng.normal();
    const Rotation x = project_so3(g);
    Mat3 b;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) b(r, c) = rng.normal();
    Mat3 xi = project_tangent(x, b).v;
    const double n = xi.norm();
    if (n < 1e-12) continue;  // zero tangent: ratio defined as 0
    xi *= xi_scale / n;
    const Rotation retracted = qr_retract(x, xi, 1.0);
    const double ratio =
        (retracted - x - xi).norm() / (xi_scale * xi_scale);
    worst = std::max(worst, ratio);
  }
  return worst;
}

}  // namespace resync
