#pragma once

#include <vector>

namespace esmeta {

struct StorageParams;

// Per-hour sampling region around a center schedule. The meta-model constraint
// uses [cnt - rad, cnt + rad]; dataset sampling widens it by (1 + epsilon).
struct SampleBox {
  std::vector<double> cnt;
  std::vector<double> rad;
  double epsilon = 0.0;

  static SampleBox uniform(int horizon, double center, double radius, double epsilon);

  int horizon() const { return static_cast<int>(cnt.size()); }

  // Throws std::invalid_argument on length mismatch, negative radius or epsilon.
  void validate() const;

  // Sampling interval at hour t: the epsilon-inflated box intersected with the
  // epsilon-inflated power bounds. Throws InfeasibleBoxError if empty.
  struct Interval {
    double lo;
    double hi;
  };
  Interval effective_interval(const StorageParams& p, int t) const;

  // Same box with rad scaled by (1 + epsilon) and epsilon reset to zero.
  SampleBox inflated() const;
};

}  // namespace esmeta
