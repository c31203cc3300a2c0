#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "resync/common_lines.hpp"
#include "resync/so3.hpp"

namespace resync {

enum class Method { full, sgd, bcd, bsgd };

enum class StepSchedule {
  constant_horizon,  // mu_t = 1 / sqrt(T + 1), T = max_iters
  inv_sqrt,          // mu_t = step0 / sqrt(t + 1)
  geometric          // mu_t = step0 * beta^t
};

struct SolverConfig {
  Method method = Method::full;
  double rho1 = 1.0;  // fraction of rotation blocks updated per iteration
  double rho2 = 1.0;  // fraction of data blocks used per subgradient
  double step0 = 0.1;
  StepSchedule schedule = StepSchedule::inv_sqrt;
  double beta = 0.99;  // geometric schedule only
  int max_iters = 1000;
  double tol = 1e-5;  // relative iterate-change stopping threshold
  bool reshuffle = false;
  std::optional<double> norm_alpha;  // spectral-norm constraint, [2/3, 1)
  std::uint64_t seed = 0;
};

/// Euclidean subgradient of the LUD objective restricted to block i.
struct SubgradientBlock {
  int i = 0;
  Mat3 g = Mat3::Zero();
};

struct TraceRecord {
  int iter = 0;
  double mu = 0.0;
  double objective = 0.0;
  double seconds = 0.0;  // cumulative optimization work, diagnostics excluded
  double mse = std::numeric_limits<double>::quiet_NaN();
  double theta = std::numeric_limits<double>::quiet_NaN();
};

struct IterationTrace {
  std::vector<TraceRecord> records;
  int iterations = 0;
  double solve_seconds = 0.0;  // total optimization work time
  /// Manifold-integrity audit over every recorded epoch of the run.
  double max_orthogonality_error = 0.0;
  double min_determinant = std::numeric_limits<double>::infinity();
  bool stopped_by_tol = false;
};

/// Diagnostics attached to a solve; none of these affect the iterates and
/// none are counted in the timed work.
struct SolveOptions {
  const RotationSet* truth = nullptr;  // enables the mse column
  std::function<double(const RotationSet&)> theta_fn;
  int theta_every = 0;   // iterations between theta estimates (0 = off)
  int record_every = 1;  // trace cadence; the final iterate is always traced
  std::optional<double> target_mse;  // early stop, needs truth
};

/// LUD objective as a double sum over ordered pairs (each unordered
/// pair counted twice): 2 * sum_{i<j} ||R_i c_ij - R_j c_ji||.
double objective_lud(const RotationSet& r, const CommonLineSet& set);

/// Least-squares objective, same double-sum convention with squared terms.
double objective_ls(const RotationSet& r, const CommonLineSet& set);

/// Subgradient of block i summed over `peers` (i itself is skipped):
/// sum_j (R_i c_ij - R_j c_ji) c_ij^T / ||R_i c_ij - R_j c_ji||.
/// Terms with residual norm below 1e-12 contribute zero (the V = 0 choice
/// of the subdifferential), so the subgradient vanishes identically at a
/// consistent optimum instead of picking up noise-driven unit-norm terms.
SubgradientBlock euclid_subgrad_block(const RotationSet& r,
                                      const CommonLineSet& set, int i,
                                      std::span<const int> peers);

/// One Jacobi sweep: every block in `d` takes a Riemannian subgradient step
/// of size mu computed against the input iterate (peers = `s`); blocks not
/// in `d` are returned unchanged.
RotationSet resync_step(const RotationSet& r, const CommonLineSet& set,
                        std::span<const int> d, std::span<const int> s,
                        double mu);

/// Riemannian subgradient descent (full or block-stochastic per cfg.method)
/// on the LUD objective. Returns the final iterate and the iteration trace.
std::pair<RotationSet, IterationTrace> solve(const CommonLineSet& set,
                                             const RotationSet& init,
                                             const SolverConfig& cfg,
                                             const SolveOptions& opts = {});

/// Variant with the spectral-norm surrogate constraint
/// Rtilde^T Rtilde = alpha K I_3: every subgradient step is followed by
/// alternating projection between that set and SO(3)^K.
/// Requires cfg.norm_alpha in [2/3, 1).
std::pair<RotationSet, IterationTrace> solve_norm_constrained(
    const CommonLineSet& set, const RotationSet& init, const SolverConfig& cfg,
    const SolveOptions& opts = {});

/// Projection onto { R : Rtilde^T Rtilde = alpha K I_3 } where Rtilde stacks
/// the first two rows of each block: Rtilde <- sqrt(alpha K) U V^T from its
/// thin SVD. Third rows are untouched. Throws RankDeficient when Rtilde has
/// (numerical) rank < 2; rank 2 is accepted -- it is exactly the clustered
/// state the constraint exists to repair, and the SVD supplies the missing
/// direction.
void project_rtilde(RotationSet& r, double alpha);

/// Alternating projection between the Rtilde constraint set and SO(3)^K.
/// Runs at most max_alternations rounds or until the iterate moves by less
/// than tol (Frobenius, stacked). Ends on the SO(3) projection. Returns the
/// number of rounds executed.
int alternating_projection(RotationSet& r, double alpha,
                           int max_alternations = 10, double tol = 1e-8);

/// Empirical second-order bound of the QR retraction: the largest observed
/// ||Retr_X(xi) - X - xi||_F / ||xi||_F^2 over `samples` random (X, xi) with
/// ||xi||_F = xi_scale. Diagnostic only.
double estimate_second_order_bound(int samples = 200, std::uint64_t seed = 0,
                                   double xi_scale = 1e-3);

}  // namespace resync
