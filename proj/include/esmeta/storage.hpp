#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "esmeta/sample_box.hpp"

namespace esmeta {

// Energy-storage asset. Energies in p.u.·h, hourly exchanges in p.u.
struct StorageParams {
  double soe_max = 1.0;
  double q_ch_max = 0.6;
  double q_dis_max = 0.6;
  double eta_ch = 0.9;
  double eta_dis = 0.9;
  double soe_init = 0.0;
  int horizon = 24;

  // Throws std::invalid_argument naming the first broken invariant.
  void validate() const;

  // Same asset with both power limits scaled by `factor`.
  StorageParams with_power_scaled(double factor) const;
};

// Net energy exchange per hour; positive charges, negative discharges.
struct Schedule {
  std::vector<double> q;

  Schedule() = default;
  explicit Schedule(std::vector<double> values) : q(std::move(values)) {}
  static Schedule zeros(int horizon) { return Schedule(std::vector<double>(horizon, 0.0)); }

  int size() const { return static_cast<int>(q.size()); }
  double operator[](int t) const { return q[t]; }
  double& operator[](int t) { return q[t]; }
  std::span<const double> values() const { return q; }

  bool operator==(const Schedule&) const = default;
};

struct SoeTrajectory {
  std::vector<double> soe;
};

struct SplitSchedule {
  std::vector<double> charge;
  std::vector<double> discharge;
};

SplitSchedule split_schedule(const Schedule& s);

// One hour of the SoE recursion. Shared by every caller so that simulated and
// repaired trajectories agree to the last bit.
inline double soe_step(const StorageParams& p, double soe_prev, double q) {
  const double charge = q > 0.0 ? q : 0.0;
  const double discharge = q < 0.0 ? -q : 0.0;
  return soe_prev + charge * p.eta_ch - discharge / p.eta_dis;
}

// d soe_t / d q_t; at q = 0 the charging slope is used.
inline double soe_slope(const StorageParams& p, double q) {
  return q >= 0.0 ? p.eta_ch : 1.0 / p.eta_dis;
}

SoeTrajectory simulate_soe(const StorageParams& p, const Schedule& s);

enum class ViolationKind { PowerUpper, PowerLower, SoeUpper, SoeLower, BoxUpper, BoxLower };

std::string to_string(ViolationKind kind);

struct Violation {
  ViolationKind kind;
  int hour;
  double magnitude;
};

struct FeasibilityReport {
  bool feasible = true;
  std::vector<Violation> violations;

  double max_violation() const;
  bool has(ViolationKind kind) const;
};

// Power bounds, SoE bounds and, when given, the box [cnt - rad, cnt + rad]
// (epsilon is ignored; use SampleBox::inflated() for the sampling region).
FeasibilityReport check_feasible(const StorageParams& p, const Schedule& s,
                                 const SampleBox* box = nullptr, double tol = 0.0);

// Clips into power box ∩ sample box, then sweeps forward and shortens the
// first exchange that leaves the SoE band so the SoE lands on the bound.
// Throws InfeasibleBoxError when the clip interval is empty or when the
// shortened exchange would leave the sample box.
Schedule repair_schedule(const StorageParams& p, const Schedule& s,
                         const SampleBox* box = nullptr);

}  // namespace esmeta
