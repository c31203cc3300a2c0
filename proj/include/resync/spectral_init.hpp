#pragma once

#include <Eigen/Dense>

#include "resync/common_lines.hpp"
#include "resync/so3.hpp"

namespace resync {

/// 3K x 3K symmetric synchronization matrix with blocks M_ij = c_ij c_ji^T
/// (i != j) and zero diagonal blocks.
struct SyncMatrix {
  Eigen::MatrixXd m;
  int k = 0;
};

SyncMatrix build_sync_matrix(const CommonLineSet& set);

struct SpectralInitResult {
  RotationSet rotations;
  /// Four largest eigenvalues of M, descending. The fourth is kept for the
  /// spectral-gap diagnostic.
  Eigen::Vector4d eigenvalues = Eigen::Vector4d::Zero();
  /// lambda3 - lambda4 < 1e-6 * lambda1: the top eigenspace is poorly
  /// separated and the initialization is unreliable. Non-fatal.
  bool gap_warning = false;
};

/// Eigenvector-relaxation initializer: stacks the top three eigenvectors of
/// M scaled by sqrt(K) and projects each 3x3 block to the nearest rotation.
/// Throws EigenFailure when the iterative eigensolver does not converge
/// (large instances only; small ones use a dense solver).
SpectralInitResult spectral_initialize(const SyncMatrix& m);

namespace detail {

struct EigResult {
  Eigen::MatrixXd vectors;  // n x nev, columns ordered by descending value
  Eigen::VectorXd values;   // nev, descending
};

/// Dense symmetric eigensolver, top `nev` pairs.
EigResult top_eigenpairs_dense(const Eigen::MatrixXd& m, int nev);

/// Blocked subspace (power) iteration with per-sweep orthonormalization.
/// Converges when each of the first `strict` Ritz values moves by less than
/// tol * |lambda_1| between sweeps (strict < 0 means all of them); trailing
/// requested values are then best-effort Ritz estimates -- near-degenerate
/// bulk values converge arbitrarily slowly and the initializer only needs
/// them at diagnostic accuracy. Throws EigenFailure after max_sweeps.
EigResult top_eigenpairs_subspace(const Eigen::MatrixXd& m, int nev,
                                  double tol = 1e-8, int max_sweeps = 1000,
                                  std::uint64_t seed = 0, int strict = -1);

/// Initializer body on a prebuilt symmetric matrix (testable seam).
SpectralInitResult spectral_from_matrix(const Eigen::MatrixXd& m, int k);

}  // namespace detail

}  // namespace resync
