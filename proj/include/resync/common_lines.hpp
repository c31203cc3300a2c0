#pragma once

#include <cstdint>
#include <vector>

#include "resync/so3.hpp"

namespace resync {

/// Common line of projections i and j (i < j), expressed in the local
/// in-plane frame of each image: unit vectors with a zero third component.
struct CommonLinePair {
  int i = 0;
  int j = 0;
  Vec3 c_ij = Vec3::Zero();
  Vec3 c_ji = Vec3::Zero();
};

/// All K(K-1)/2 pairwise common lines, stored in lexicographic (i, j) order.
/// n_theta is the angular grid resolution (bins per full circle); n_theta = 0
/// marks a continuous (unquantized) set.
struct CommonLineSet {
  int k = 0;
  int n_theta = 0;
  std::vector<CommonLinePair> pairs;

  int pair_count() const { return static_cast<int>(pairs.size()); }

  /// Index into `pairs` of the (i, j) entry, i < j.
  int pair_index(int i, int j) const {
    return i * k - i * (i + 1) / 2 + (j - i - 1);
  }
  const CommonLinePair& pair(int i, int j) const {
    return pairs[static_cast<size_t>(pair_index(i, j))];
  }
};

/// Misdetection model: each pair survives with probability p, otherwise both
/// lines are replaced by independent uniform draws.
struct CorruptionModel {
  double p = 1.0;
  std::uint64_t seed = 0;
};

/// In-plane unit vector at angle bin a of an n_theta grid:
/// (cos(2 pi a / n_theta), sin(2 pi a / n_theta), 0). This is the single
/// construction used everywhere (generation, corruption, file IO) so equal
/// bins give bitwise-equal vectors.
Vec3 grid_line(int bin, int n_theta);

/// Nearest grid bin for an in-plane unit vector, in [0, n_theta).
int nearest_bin(const Vec3& c, int n_theta);

/// Exact common lines of the ground-truth rotations, quantized to an
/// n_theta grid (n_theta = 0 keeps them continuous). Throws
/// DegeneratePair(i, j) when two viewing directions are parallel.
CommonLineSet true_common_lines(const RotationSet& truth, int n_theta);

/// Keeps each pair with probability model.p, otherwise replaces both lines
/// with independent uniform draws (on the grid when n_theta > 0, continuous
/// otherwise). Deterministic given model.seed. The keep/replace decisions
/// are drawn first, one per pair, so the kept-index stream depends only on
/// the seed and p, not on the replacement draws.
CommonLineSet corrupt(const CommonLineSet& set, const CorruptionModel& model);

}  // namespace resync
