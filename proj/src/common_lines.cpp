#include "resync/common_lines.hpp"

#include <cmath>

#include "resync/errors.hpp"
#include "resync/rng.hpp"

namespace resync {

Vec3 grid_line(int bin, int n_theta) {
  const double a = 2.0 * M_PI * static_cast<double>(bin) /
                   static_cast<double>(n_theta);
  return Vec3(std::cos(a), std::sin(a), 0.0);
}

int nearest_bin(const Vec3& c, int n_theta) {
  const double theta = std::atan2(c.y(), c.x());
  const double step = 2.0 * M_PI / static_cast<double>(n_theta);
  long bin = std::lround(theta / step);
  bin %= n_theta;
  if (bin < 0) bin += n_theta;
  return static_cast<int>(bin);
}

namespace {

Vec3 quantize_line(const Vec3& c, int n_theta) {
  if (n_theta == 0) return c;
  return grid_line(nearest_bin(c, n_theta), n_theta);
}

// In-plane unit vector, third component exactly zero.
Vec3 flatten_normalize(const Vec3& c) {
  Vec3 out(c.x(), c.y(), 0.0);
  return out / std::hypot(out.x(), out.y());
}

}  // namespace

CommonLineSet true_common_lines(const RotationSet& truth, int n_theta) {
  const int k = truth.k();
  if (k < 2) throw InvalidConfig("true_common_lines: K must be >= 2");
  if (n_theta < 0) throw InvalidConfig("true_common_lines: n_theta < 0");

  CommonLineSet set;
  set.k = k;
  set.n_theta = n_theta;
  set.pairs.reserve(static_cast<size_t>(k) * (k - 1) / 2);

  for (int i = 0; i < k; ++i) {
    const Vec3 vi = truth[i].col(2);
    for (int j = i + 1; j < k; ++j) {
      const Vec3 vj = truth[j].col(2);
      Vec3 q = vi.cross(vj);
      const double n = q.norm();
      if (n < 1e-8) throw DegeneratePair(i, j);
      q /= n;
      Vec3 c_ij = flatten_normalize(truth[i].transpose() * q);
      Vec3 c_ji = flatten_normalize(truth[j].transpose() * q);
      // The cross product leaves a +/- ambiguity; both lines must flip
      // together (same q) to keep the consistency relation. The sign rule
      // keys on c_ij rather than on q itself: c_ij is expressed in the
      // local frame, so the canonical choice is invariant under a global
      // rotation of the truth.
      for (int c = 0; c < 3; ++c) {
        if (c_ij(c) != 0.0) {
          if (c_ij(c) < 0.0) {
            c_ij = -c_ij;
            c_ji = -c_ji;
          }
          break;
        }
      }
      CommonLinePair pair;
      pair.i = i;
      pair.j = j;
      pair.c_ij = quantize_line(c_ij, n_theta);
      pair.c_ji = quantize_line(c_ji, n_theta);
      set.pairs.push_back(pair);
    }
  }
  return set;
}

CommonLineSet corrupt(const CommonLineSet& set, const CorruptionModel& model) {
  if (model.p < 0.0 || model.p > 1.0) {
    throw InvalidConfig("corrupt: detection rate p must be in [0, 1]");
  }
  Rng rng(model.seed);

  // Pass 1: keep/replace decisions only, one uniform per pair.
  std::vector<bool> keep(set.pairs.size());
  for (size_t m = 0; m < set.pairs.size(); ++m) {
    keep[m] = rng.uniform() < model.p;
  }

  // Pass 2: replacement draws for the corrupted pairs.
  CommonLineSet out = set;
  for (size_t m = 0; m < out.pairs.size(); ++m) {
    if (keep[m]) continue;
    if (set.n_theta > 0) {
      out.pairs[m].c_ij = grid_line(
          static_cast<int>(rng.uniform_int(set.n_theta)), set.n_theta);
      out.pairs[m].c_ji = grid_line(
          static_cast<int>(rng.uniform_int(set.n_theta)), set.n_theta);
    } else {
      const double a = 2.0 * M_PI * rng.uniform();
      const double b = 2.0 * M_PI * rng.uniform();
      out.pairs[m].c_ij = Vec3(std::cos(a), std::sin(a), 0.0);
      out.pairs[m].c_ji = Vec3(std::cos(b), std::sin(b), 0.0);
    }
  }
  return out;
}

}  // namespace resync
