#include "esmeta/storage.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "esmeta/errors.hpp"

namespace esmeta {

void StorageParams::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("StorageParams: ") + what);
  };
  require(std::isfinite(soe_max) && soe_max > 0.0, "soe_max must be > 0");
  require(eta_ch > 0.0 && eta_ch <= 1.0, "eta_ch must lie in (0, 1]");
  require(eta_dis > 0.0 && eta_dis <= 1.0, "eta_dis must lie in (0, 1]");
  require(soe_init >= 0.0 && soe_init <= soe_max, "soe_init must lie in [0, soe_max]");
  require(std::isfinite(q_ch_max) && q_ch_max > 0.0, "q_ch_max must be > 0");
  require(std::isfinite(q_dis_max) && q_dis_max > 0.0, "q_dis_max must be > 0");
  require(horizon >= 1, "horizon must be >= 1");
}

StorageParams StorageParams::with_power_scaled(double factor) const {
  StorageParams out = *this;
  out.q_ch_max *= factor;
  out.q_dis_max *= factor;
  return out;
}

SampleBox SampleBox::uniform(int horizon, double center, double radius, double epsilon) {
  return SampleBox{std::vector<double>(horizon, center), std::vector<double>(horizon, radius),
                   epsilon};
}

void SampleBox::validate() const {
  if (cnt.size() != rad.size()) throw std::invalid_argument("SampleBox: cnt/rad length mismatch");
  if (!(epsilon >= 0.0)) throw std::invalid_argument("SampleBox: epsilon must be >= 0");
  for (std::size_t t = 0; t < rad.size(); ++t) {
    if (!std::isfinite(cnt[t])) throw std::invalid_argument("SampleBox: non-finite center");
    if (!(rad[t] >= 0.0) || !std::isfinite(rad[t]))
      throw std::invalid_argument("SampleBox: radius must be finite and >= 0");
  }
}

SampleBox::Interval SampleBox::effective_interval(const StorageParams& p, int t) const {
  const double widen = 1.0 + epsilon;
  const double lo = std::max(cnt[t] - rad[t] * widen, -p.q_dis_max * widen);
  const double hi = std::min(cnt[t] + rad[t] * widen, p.q_ch_max * widen);
  if (lo > hi) {
    throw InfeasibleBoxError(t, "sample box does not intersect the power bounds at hour " +
                                    std::to_string(t));
  }
  return {lo, hi};
}

SampleBox SampleBox::inflated() const {
  SampleBox out = *this;
  for (double& r : out.rad) r *= 1.0 + epsilon;
  out.epsilon = 0.0;
  return out;
}

SplitSchedule split_schedule(const Schedule& s) {
  SplitSchedule out;
  out.charge.resize(s.q.size());
  out.discharge.resize(s.q.size());
  for (std::size_t t = 0; t < s.q.size(); ++t) {
    out.charge[t] = s.q[t] > 0.0 ? s.q[t] : 0.0;
    out.discharge[t] = s.q[t] < 0.0 ? -s.q[t] : 0.0;
  }
  return out;
}

SoeTrajectory simulate_soe(const StorageParams& p, const Schedule& s) {
  SoeTrajectory traj;
  traj.soe.resize(s.q.size());
  double soe = p.soe_init;
  for (std::size_t t = 0; t < s.q.size(); ++t) {
    soe = soe_step(p, soe, s.q[t]);
    traj.soe[t] = soe;
  }
  return traj;
}

std::string to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::PowerUpper: return "power_upper";
    case ViolationKind::PowerLower: return "power_lower";
    case ViolationKind::SoeUpper: return "soe_upper";
    case ViolationKind::SoeLower: return "soe_lower";
    case ViolationKind::BoxUpper: return "box_upper";
    case ViolationKind::BoxLower: return "box_lower";
  }
  return "unknown";
}

double FeasibilityReport::max_violation() const {
  double worst = 0.0;
  for (const auto& v : violations) worst = std::max(worst, v.magnitude);
  return worst;
}

bool FeasibilityReport::has(ViolationKind kind) const {
  return std::any_of(violations.begin(), violations.end(),
                     [kind](const Violation& v) { return v.kind == kind; });
}

FeasibilityReport check_feasible(const StorageParams& p, const Schedule& s, const SampleBox* box,
                                 double tol) {
  if (tol < 0.0) throw std::invalid_argument("check_feasible: tol must be >= 0");
  if (box && box->horizon() != s.size())
    throw std::invalid_argument("check_feasible: box/schedule length mismatch");

  FeasibilityReport report;
  auto flag = [&](ViolationKind kind, int t, double excess) {
    if (excess > tol) {
      report.feasible = false;
      report.violations.push_back({kind, t, excess});
    }
  };

  const SoeTrajectory traj = simulate_soe(p, s);
  for (int t = 0; t < s.size(); ++t) {
    const double q = s[t];
    if (!std::isfinite(q)) {
      report.feasible = false;
      report.violations.push_back({ViolationKind::PowerUpper, t,
                                   std::numeric_limits<double>::infinity()});
      continue;
    }
    flag(ViolationKind::PowerUpper, t, q - p.q_ch_max);
    flag(ViolationKind::PowerLower, t, -p.q_dis_max - q);
    flag(ViolationKind::SoeUpper, t, traj.soe[t] - p.soe_max);
    flag(ViolationKind::SoeLower, t, -traj.soe[t]);
    if (box) {
      flag(ViolationKind::BoxUpper, t, q - (box->cnt[t] + box->rad[t]));
      flag(ViolationKind::BoxLower, t, (box->cnt[t] - box->rad[t]) - q);
    }
  }
  return report;
}

Schedule repair_schedule(const StorageParams& p, const Schedule& s, const SampleBox* box) {
  if (box && box->horizon() != s.size())
    throw std::invalid_argument("repair_schedule: box/schedule length mismatch");

  Schedule out = s;
  std::vector<double> lo(s.q.size()), hi(s.q.size());
  for (int t = 0; t < s.size(); ++t) {
    lo[t] = -p.q_dis_max;
    hi[t] = p.q_ch_max;
    if (box) {
      lo[t] = std::max(lo[t], box->cnt[t] - box->rad[t]);
      hi[t] = std::min(hi[t], box->cnt[t] + box->rad[t]);
    }
    if (lo[t] > hi[t]) {
      throw InfeasibleBoxError(t, "power box and sample box do not intersect at hour " +
                                      std::to_string(t));
    }
    out[t] = std::clamp(std::isfinite(out[t]) ? out[t] : 0.0, lo[t], hi[t]);
  }

  constexpr double kInf = std::numeric_limits<double>::infinity();
  double soe = p.soe_init;
  for (int t = 0; t < out.size(); ++t) {
    double q = out[t];
    double next = soe_step(p, soe, q);
    if (next > p.soe_max) {
      q = (p.soe_max - soe) / p.eta_ch;
      next = soe_step(p, soe, q);
      while (next > p.soe_max) {
        q = std::nextafter(q, -kInf);
        next = soe_step(p, soe, q);
      }
      if (q < lo[t]) {
        throw InfeasibleBoxError(t, "SoE repair leaves the sample box at hour " +
                                        std::to_string(t));
      }
    } else if (next < 0.0) {
      q = -soe * p.eta_dis;
      next = soe_step(p, soe, q);
      while (next < 0.0) {
        q = std::nextafter(q, kInf);
        next = soe_step(p, soe, q);
      }
      if (q > hi[t]) {
        throw InfeasibleBoxError(t, "SoE repair leaves the sample box at hour " +
                                        std::to_string(t));
      }
    }
    out[t] = q;
    soe = next;
  }
  return out;
}

}  // namespace esmeta
