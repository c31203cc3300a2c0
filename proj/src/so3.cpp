#include "resync/so3.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "resync/errors.hpp"
#include "resync/rng.hpp"

namespace resync {

double RotationSet::max_orthogonality_error() const {
  double worst = 0.0;
  for (const Rotation& r : rotations) {
    worst = std::max(worst, (r.transpose() * r - Mat3::Identity()).norm());
  }
  return worst;
}

double RotationSet::min_determinant() const {
  double worst = std::numeric_limits<double>::infinity();
  for (const Rotation& r : rotations) {
    worst = std::min(worst, r.determinant());
  }
  return worst;
}

bool RotationSet::valid(double tol) const {
  for (const Rotation& r : rotations) {
    if (!is_rotation(r, tol)) return false;
  }
  return true;
}

bool is_rotation(const Mat3& m, double tol) {
  return (m.transpose() * m - Mat3::Identity()).norm() < tol &&
         std::abs(m.determinant() - 1.0) < tol;
}

TangentVector project_tangent(const Rotation& base, const Mat3& b) {
  const Mat3 m = base.transpose() * b;
  const Mat3 skew = 0.5 * (m - m.transpose());
  return TangentVector{base, base * skew};
}

Rotation qr_retract(const Rotation& base, const Mat3& v, double scale) {
  if (scale == 0.0 || v.isZero(0.0)) return base;

  const Mat3 a = base + scale * v;
  Eigen::HouseholderQR<Mat3> qr(a);
  Mat3 q = qr.householderQ();
  const Mat3 r = qr.matrixQR().triangularView<Eigen::Upper>();

  double max_diag = 0.0;
  for (int j = 0; j < 3; ++j) max_diag = std::max(max_diag, std::abs(r(j, j)));
  for (int j = 0; j < 3; ++j) {
    if (std::abs(r(j, j)) < 1e-12 * std::max(1.0, max_diag)) {
      throw DegenerateFactorization(
          "qr_retract: rank-deficient step (pathological step size)");
    }
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  }
  if (q.determinant() < 0.0) q.col(2) = -q.col(2);
  return q;
}

Rotation project_so3(const Mat3& a) {
  Eigen::JacobiSVD<Mat3> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (svd.singularValues()(2) < 1e-12) {
    throw RankDeficient("project_so3: smallest singular value below 1e-12");
  }
  const Mat3 u = svd.matrixU();
  const Mat3 v = svd.matrixV();
  const double d = (u * v.transpose()).determinant();
  return u * Vec3(1.0, 1.0, d < 0.0 ? -1.0 : 1.0).asDiagonal() * v.transpose();
}

namespace {

Mat3 quaternion_to_matrix(double w, double x, double y, double z) {
  Mat3 m;
  m << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return m;
}

}  // namespace

RotationSet sample_uniform_so3(int k, std::uint64_t seed) {
  if (k < 2) throw InvalidConfig("sample_uniform_so3: k must be >= 2");
  Rng rng(seed);
  RotationSet set;
  set.rotations.reserve(static_cast<size_t>(k));
  for (int i = 0; i < k; ++i) {
    double w, x, y, z, n;
    do {
      w = rng.normal();
      x = rng.normal();
      y = rng.normal();
      z = rng.normal();
      n = std::sqrt(w * w + x * x + y * y + z * z);
    } while (n < 1e-12);
    set.rotations.push_back(quaternion_to_matrix(w / n, x / n, y / n, z / n));
  }
  return set;
}

}  // namespace resync
