#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace resync {

using Mat3 = Eigen::Matrix3d;
using Vec3 = Eigen::Vector3d;

/// A rotation matrix: orthogonal with determinant +1. The alias keeps the
/// page-long Eigen expressions readable; membership is a runtime property
/// checked with is_rotation().
using Rotation = Mat3;

/// Element of the tangent space of SO(3) at `base`: base^T v is
/// skew-symmetric.
struct TangentVector {
  Rotation base;
  Mat3 v;
};

/// K rotations, the decision variable of the synchronization problem.
struct RotationSet {
  std::vector<Rotation> rotations;

  RotationSet() = default;
  explicit RotationSet(std::vector<Rotation> r) : rotations(std::move(r)) {}

  int k() const { return static_cast<int>(rotations.size()); }
  Rotation& operator[](int i) { return rotations[static_cast<size_t>(i)]; }
  const Rotation& operator[](int i) const {
    return rotations[static_cast<size_t>(i)];
  }

  /// Largest ||R_i^T R_i - I||_F over the set.
  double max_orthogonality_error() const;
  /// Smallest det(R_i) over the set.
  double min_determinant() const;
  /// All blocks orthogonal and right handed within `tol`.
  bool valid(double tol = 1e-10) const;
};

/// ||m^T m - I||_F < tol and det(m) > 0 within tol of +1.
bool is_rotation(const Mat3& m, double tol = 1e-10);

/// Projection of an arbitrary matrix onto the tangent space at `base`:
/// v = base (base^T b - b^T base) / 2.
TangentVector project_tangent(const Rotation& base, const Mat3& b);

/// QR retraction: the Q factor of base + scale * v, with the sign convention
/// that the triangular factor has nonnegative diagonal and a final
/// determinant correction so the result is in SO(3), not merely O(3).
/// A zero step returns `base` bitwise.
/// Throws DegenerateFactorization when base + scale * v is rank deficient.
Rotation qr_retract(const Rotation& base, const Mat3& v, double scale);

inline Rotation qr_retract(const TangentVector& xi, double scale) {
  return qr_retract(xi.base, xi.v, scale);
}

/// Nearest rotation in Frobenius norm: U diag(1,1,det(UV^T)) V^T from the
/// SVD of `a`. Throws RankDeficient when the smallest singular value of `a`
/// is below 1e-12.
Rotation project_so3(const Mat3& a);

/// k i.i.d. Haar-uniform rotations, deterministic given `seed`. Sampling is
/// by unit quaternions built from four normalized Gaussian draws.
RotationSet sample_uniform_so3(int k, std::uint64_t seed);

}  // namespace resync
