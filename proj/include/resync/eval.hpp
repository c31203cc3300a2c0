#pragma once

#include <array>

#include "resync/common_lines.hpp"
#include "resync/so3.hpp"

namespace resync {

/// Registered-accuracy report: MSE after optimal gauge alignment, the gauge
/// rotation itself, and whether the handedness-conjugated candidate
/// {J R_i J}, J = diag(1,1,-1), was the better fit. Common-line data cannot
/// distinguish a reconstruction from its J-conjugate, so both are scored.
struct EvalReport {
  double mse = 0.0;
  Rotation gauge = Rotation::Identity();
  bool handedness_flipped = false;
};

/// Mean squared Frobenius error min over O in SO(3) of
/// (1/K) sum_i ||truth_i - O est_i||^2, solved by orthogonal Procrustes with
/// determinant correction, evaluated for est and its J-conjugate.
EvalReport register_rotations(const RotationSet& truth,
                              const RotationSet& est);

/// Proximal-point stationarity estimate.
struct ThetaParams {
  double lambda = 0.5;
  int inner_iters = 50;
  double inner_step0 = 0.05;
};

/// Approximates Theta(x) = ||P_{lambda f}(x) - x||_F / lambda by minimizing
/// f(Y) + ||Y - x||_F^2 / (2 lambda) over SO(3)^K with Riemannian
/// subgradient steps started at x. The inner solve is inexact, so the
/// returned value is an upper-biased estimate of the true measure.
double estimate_theta(const RotationSet& x, const CommonLineSet& set,
                      const ThetaParams& params = {});

/// Singular values (descending) of the 2K x 3 matrix stacking the first two
/// rows of each block. s3 near zero means the viewing directions have
/// collapsed toward a cluster.
std::array<double, 3> singular_profile(const RotationSet& r);

}  // namespace resync
