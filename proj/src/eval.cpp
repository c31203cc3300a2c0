#include "resync/eval.hpp"

#include <cmath>

#include "resync/errors.hpp"
#include "resync/solver.hpp"

namespace resync {

namespace {

// Procrustes alignment of est onto truth over SO(3): maximize tr(O^T C) with
// C = sum_i truth_i est_i^T.
std::pair<double, Rotation> procrustes_mse(const RotationSet& truth,
                                           const RotationSet& est) {
  const int k = truth.k();
  Mat3 c = Mat3::Zero();
  for (int i = 0; i < k; ++i) c += truth[i] * est[i].transpose();
  const Rotation o = project_so3(c);
  double sum = 0.0;
  for (int i = 0; i < k; ++i) sum += (truth[i] - o * est[i]).squaredNorm();
  return {sum / static_cast<double>(k), o};
}

}  // namespace

EvalReport register_rotations(const RotationSet& truth,
                              const RotationSet& est) {
  if (truth.k() != est.k()) {
    throw DimensionMismatch("register_rotations: K mismatch");
  }
  const auto [mse_plain, gauge_plain] = procrustes_mse(truth, est);

  const Mat3 j = Vec3(1.0, 1.0, -1.0).asDiagonal();
  RotationSet conj;
  conj.rotations.reserve(est.rotations.size());
  for (const Rotation& r : est.rotations) conj.rotations.push_back(j * r * j);
  const auto [mse_conj, gauge_conj] = procrustes_mse(truth, conj);

  EvalReport report;
  if (mse_conj < mse_plain) {
    report.mse = mse_conj;
    report.gauge = gauge_conj;
    report.handedness_flipped = true;
  } else {
    report.mse = mse_plain;
    report.gauge = gauge_plain;
    report.handedness_flipped = false;
  }
  return report;
}

double estimate_theta(const RotationSet& x, const CommonLineSet& set,
                      const ThetaParams& params) {
  if (params.lambda <= 0.0) {
    throw InvalidConfig("estimate_theta: lambda must be > 0");
  }
  const int k = x.k();
  std::vector<int> all(static_cast<size_t>(k));
  for (int i = 0; i < k; ++i) all[static_cast<size_t>(i)] = i;

  // The block subgradients sum each pair once while objective_lud doubles
  // it, so the functional the inner flow actually descends is
  // objective/2 + ||Y - x||^2 / (2 lambda); the best-iterate tracking must
  // weigh the two terms the same way.
  auto prox_objective = [&](const RotationSet& y) {
    double d2 = 0.0;
    for (int i = 0; i < k; ++i) d2 += (y[i] - x[i]).squaredNorm();
    return 0.5 * objective_lud(y, set) + d2 / (2.0 * params.lambda);
  };

  RotationSet y = x;
  RotationSet best = x;
  double best_h = prox_objective(x);
  for (int t = 0; t < params.inner_iters; ++t) {
    const double mu =
        params.inner_step0 / std::sqrt(static_cast<double>(t) + 1.0);
    const RotationSet snapshot = y;
    for (int i = 0; i < k; ++i) {
      Mat3 g = euclid_subgrad_block(snapshot, set, i, all).g;
      g += (snapshot[i] - x[i]) / params.lambda;
      const TangentVector xi = project_tangent(snapshot[i], g);
      y[i] = qr_retract(xi, -mu);
    }
    const double h = prox_objective(y);
    if (h < best_h) {
      best_h = h;
      best = y;
    }
  }

  double d2 = 0.0;
  for (int i = 0; i < k; ++i) d2 += (best[i] - x[i]).squaredNorm();
  return std::sqrt(d2) / params.lambda;
}

std::array<double, 3> singular_profile(const RotationSet& r) {
  const int k = r.k();
  Eigen::MatrixXd rt(2 * k, 3);
  for (int i = 0; i < k; ++i) {
    rt.row(2 * i) = r[i].row(0);
    rt.row(2 * i + 1) = r[i].row(1);
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(rt);
  return {svd.singularValues()(0), svd.singularValues()(1),
          svd.singularValues()(2)};
}

}  // namespace resync
