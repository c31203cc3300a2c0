#include "resync/spectral_init.hpp"

#include <cmath>

#include "resync/errors.hpp"
#include "resync/rng.hpp"

namespace resync {

SyncMatrix build_sync_matrix(const CommonLineSet& set) {
  SyncMatrix sync;
  sync.k = set.k;
  sync.m = Eigen::MatrixXd::Zero(3 * set.k, 3 * set.k);
  for (const CommonLinePair& pair : set.pairs) {
    const Mat3 block = pair.c_ij * pair.c_ji.transpose();
    sync.m.block<3, 3>(3 * pair.i, 3 * pair.j) = block;
    sync.m.block<3, 3>(3 * pair.j, 3 * pair.i) = block.transpose();
  }
  return sync;
}

namespace detail {

EigResult top_eigenpairs_dense(const Eigen::MatrixXd& m, int nev) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m);
  if (solver.info() != Eigen::Success) {
    throw EigenFailure("dense symmetric eigensolver failed");
  }
  const int n = static_cast<int>(m.rows());
  nev = std::min(nev, n);
  EigResult out;
  out.vectors.resize(n, nev);
  out.values.resize(nev);
  // Eigen returns ascending order; flip to descending.
  for (int c = 0; c < nev; ++c) {
    out.values(c) = solver.eigenvalues()(n - 1 - c);
    out.vectors.col(c) = solver.eigenvectors().col(n - 1 - c);
  }
  return out;
}

namespace {

// Orthonormalize the columns of x in place (modified Gram-Schmidt).
void orthonormalize(Eigen::MatrixXd& x) {
  for (int c = 0; c < x.cols(); ++c) {
    for (int p = 0; p < c; ++p) {
      x.col(c) -= x.col(p).dot(x.col(c)) * x.col(p);
    }
    x.col(c) /= x.col(c).norm();
  }
}

// y = m * x with a deterministic row-parallel loop: each output row is a
// serial dot product, so the result does not depend on the thread count.
Eigen::MatrixXd symmetric_multiply(const Eigen::MatrixXd& m,
                                   const Eigen::MatrixXd& x) {
  const int n = static_cast<int>(m.rows());
  Eigen::MatrixXd y(n, x.cols());
#pragma omp parallel for schedule(static)
  for (int r = 0; r < n; ++r) {
    y.row(r) = m.row(r) * x;
  }
  return y;
}

}  // namespace

EigResult top_eigenpairs_subspace(const Eigen::MatrixXd& m, int nev,
                                  double tol, int max_sweeps,
                                  std::uint64_t seed, int strict) {
  const int n = static_cast<int>(m.rows());
  nev = std::min(nev, n);
  if (strict < 0 || strict > nev) strict = nev;
  const int cols = std::min(n, nev + 2);  // guard vectors sharpen convergence

  Rng rng(seed);
  Eigen::MatrixXd x(n, cols);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < cols; ++c) x(r, c) = rng.normal();
  }
  orthonormalize(x);

  Eigen::VectorXd prev = Eigen::VectorXd::Zero(cols);
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    const Eigen::MatrixXd y = symmetric_multiply(m, x);
    // Rayleigh-Ritz on the current subspace.
    const Eigen::MatrixXd small = x.transpose() * y;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ritz(
        0.5 * (small + small.transpose()));
    if (ritz.info() != Eigen::Success) {
      throw EigenFailure("subspace iteration: Ritz step failed");
    }
    Eigen::VectorXd values(cols);
    Eigen::MatrixXd rotated = Eigen::MatrixXd(y * ritz.eigenvectors());
    for (int c = 0; c < cols; ++c) {
      values(c) = ritz.eigenvalues()(cols - 1 - c);
    }
    Eigen::MatrixXd next(n, cols);
    for (int c = 0; c < cols; ++c) {
      next.col(c) = rotated.col(cols - 1 - c);
    }
    orthonormalize(next);
    x = next;

    const double scale = std::max(std::abs(values(0)), 1e-300);
    if ((values.head(strict) - prev.head(strict)).cwiseAbs().maxCoeff() <
        tol * scale) {
      EigResult out;
      out.vectors = x.leftCols(nev);
      out.values = values.head(nev);
      return out;
    }
    prev = values;
  }
  throw EigenFailure("subspace iteration did not converge");
}

namespace {

// Per-block rotation recovery U diag(1,1,det(UV^T)) V^T. The blocks of the
// stacked eigenvectors are structurally rank 2 -- every common line has a
// zero third component, so M has a zero row per image and the eigenvectors
// carry only two directions of each rotation. The SVD supplies the missing
// third direction (the viewing axis) and the determinant fix orients it
// consistently, so rank 2 is fine here; only rank <= 1 leaves the
// completion undetermined.
Rotation complete_rotation(const Mat3& a) {
  Eigen::JacobiSVD<Mat3> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (svd.singularValues()(1) < 1e-12) {
    throw RankDeficient("spectral_initialize: eigenvector block has rank < 2");
  }
  const Mat3 u = svd.matrixU();
  const Mat3 v = svd.matrixV();
  const double d = (u * v.transpose()).determinant();
  return u * Vec3(1.0, 1.0, d < 0.0 ? -1.0 : 1.0).asDiagonal() * v.transpose();
}

}  // namespace

SpectralInitResult spectral_from_matrix(const Eigen::MatrixXd& m, int k) {
  if (k < 3) throw InvalidConfig("spectral_initialize: K must be >= 3");
  const int nev = std::min(4, 3 * k);
  // Dense solve up to 3K = 6000; subspace iteration beyond. The fourth
  // value only feeds the gap diagnostic, so it does not gate convergence.
  const EigResult eig = (3 * k <= 6000)
                            ? top_eigenpairs_dense(m, nev)
                            : top_eigenpairs_subspace(m, nev, 1e-8, 1000,
                                                      /*seed=*/0,
                                                      /*strict=*/3);

  SpectralInitResult result;
  for (int c = 0; c < nev; ++c) result.eigenvalues(c) = eig.values(c);
  result.gap_warning =
      eig.values(2) - eig.values(3) < 1e-6 * std::abs(eig.values(0));

  const double scale = std::sqrt(static_cast<double>(k));
  result.rotations.rotations.reserve(static_cast<size_t>(k));
  for (int i = 0; i < k; ++i) {
    // The trace identity tr(R^T M R) = sum R_i c_ij . R_j c_ji holds for the
    // stacked variable with blocks R_i^T, so each recovered block is
    // transposed back into a rotation.
    const Mat3 block = scale * eig.vectors.block<3, 3>(3 * i, 0);
    result.rotations.rotations.push_back(complete_rotation(block).transpose());
  }
  return result;
}

}  // namespace detail

SpectralInitResult spectral_initialize(const SyncMatrix& m) {
  return detail::spectral_from_matrix(m.m, m.k);
}

}  // namespace resync
