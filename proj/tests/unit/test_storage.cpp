#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "esmeta/errors.hpp"
#include "esmeta/rng.hpp"
#include "esmeta/storage.hpp"

namespace esmeta {
namespace {

StorageParams small_asset(int horizon) {
  StorageParams p;
  p.soe_max = 1.0;
  p.q_ch_max = 0.6;
  p.q_dis_max = 0.6;
  p.eta_ch = 0.9;
  p.eta_dis = 0.9;
  p.soe_init = 0.0;
  p.horizon = horizon;
  return p;
}

TEST(StorageParams, ValidateRejectsBrokenInvariants) {
  StorageParams p = small_asset(24);
  EXPECT_NO_THROW(p.validate());
  p.eta_ch = 1.2;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = small_asset(24);
  p.soe_init = 2.0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = small_asset(0);
  EXPECT_THROW(p.validate(), std::invalid_argument);
}

TEST(SplitSchedule, SignSplit) {
  const auto split = split_schedule(Schedule({0.5, -0.3}));
  EXPECT_EQ(split.charge, (std::vector<double>{0.5, 0.0}));
  EXPECT_EQ(split.discharge, (std::vector<double>{0.0, 0.3}));

  const auto zero = split_schedule(Schedule::zeros(3));
  EXPECT_EQ(zero.charge, std::vector<double>(3, 0.0));
  EXPECT_EQ(zero.discharge, std::vector<double>(3, 0.0));

  // Full-power discharge of the 60 MW / 100 MW base asset.
  const auto full = split_schedule(Schedule({-0.6}));
  EXPECT_EQ(full.charge[0], 0.0);
  EXPECT_EQ(full.discharge[0], 0.6);
}

TEST(SplitSchedule, RecombinesExactlyAndNeverOverlaps) {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    Schedule s = Schedule::zeros(24);
    for (auto& q : s.q) q = uniform(rng, -1.0, 1.0);
    const auto split = split_schedule(s);
    for (int t = 0; t < 24; ++t) {
      EXPECT_EQ(split.charge[t] - split.discharge[t], s[t]);
      EXPECT_EQ(split.charge[t] * split.discharge[t], 0.0);
    }
  }
}

TEST(SimulateSoe, WorkedValues) {
  const StorageParams p = small_asset(2);
  EXPECT_DOUBLE_EQ(simulate_soe(p, Schedule({1.0})).soe[0], 0.9);

  const auto traj = simulate_soe(p, Schedule({0.5, -0.405}));
  EXPECT_NEAR(traj.soe[0], 0.45, 1e-15);
  EXPECT_NEAR(traj.soe[1], 0.0, 1e-15);

  StorageParams mid = p;
  mid.soe_init = 0.3;
  for (double v : simulate_soe(mid, Schedule::zeros(5)).soe) EXPECT_EQ(v, 0.3);
}

TEST(SimulateSoe, LinearInOneSidedScaling) {
  StorageParams p = small_asset(24);
  p.soe_init = 0.2;
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const double sign = trial % 2 == 0 ? 1.0 : -1.0;
    Schedule s = Schedule::zeros(24);
    for (auto& q : s.q) q = sign * uniform(rng, 0.0, 0.5);
    const double alpha = uniform(rng, 0.1, 3.0);
    Schedule scaled = s;
    for (auto& q : scaled.q) q *= alpha;
    const auto base = simulate_soe(p, s).soe;
    const auto sc = simulate_soe(p, scaled).soe;
    for (int t = 0; t < 24; ++t)
      EXPECT_NEAR(sc[t] - p.soe_init, alpha * (base[t] - p.soe_init), 1e-12);
  }
}

TEST(CheckFeasible, ZeroAndForcedViolations) {
  const StorageParams p = small_asset(3);
  EXPECT_TRUE(check_feasible(p, Schedule::zeros(3)).feasible);

  const auto over = check_feasible(p, Schedule({p.q_ch_max + 1.0, 0.0, 0.0}));
  EXPECT_FALSE(over.feasible);
  ASSERT_TRUE(over.has(ViolationKind::PowerUpper));
  for (const auto& v : over.violations)
    if (v.kind == ViolationKind::PowerUpper) EXPECT_NEAR(v.magnitude, 1.0, 1e-15);

  const auto soe = check_feasible(small_asset(2), Schedule({0.6, 0.6}));
  EXPECT_FALSE(soe.feasible);
  ASSERT_EQ(soe.violations.size(), 1u);
  EXPECT_EQ(soe.violations[0].kind, ViolationKind::SoeUpper);
  EXPECT_EQ(soe.violations[0].hour, 1);
  EXPECT_NEAR(soe.violations[0].magnitude, 0.08, 1e-12);
}

TEST(CheckFeasible, BoxAndTolerance) {
  const StorageParams p = small_asset(2);
  const SampleBox box = SampleBox::uniform(2, 0.1, 0.05, 0.5);
  EXPECT_TRUE(check_feasible(p, Schedule({0.12, 0.06}), &box).feasible);
  const auto out = check_feasible(p, Schedule({0.2, 0.0}), &box);
  EXPECT_TRUE(out.has(ViolationKind::BoxUpper));
  EXPECT_TRUE(out.has(ViolationKind::BoxLower));
  EXPECT_TRUE(check_feasible(p, Schedule({0.2, 0.0}), &box, 0.06).feasible);
  EXPECT_TRUE(check_feasible(p, Schedule({0.2, 0.0}), &box).violations.size() == 2);
  EXPECT_THROW(check_feasible(p, Schedule::zeros(2), nullptr, -1.0), std::invalid_argument);
}

TEST(RepairSchedule, ClipAndBoundaryEquation) {
  StorageParams p = small_asset(1);
  EXPECT_EQ(repair_schedule(p, Schedule({0.7})).q, std::vector<double>{0.6});

  const Schedule fixed = repair_schedule(small_asset(2), Schedule({0.6, 0.6}));
  EXPECT_EQ(fixed[0], 0.6);
  // 0.54 + q * 0.9 = 1
  EXPECT_NEAR(fixed[1], 0.46 / 0.9, 1e-15);
  EXPECT_TRUE(check_feasible(small_asset(2), fixed).feasible);

  const Schedule drained = repair_schedule(small_asset(2), Schedule({0.3, -0.6}));
  EXPECT_NEAR(drained[1], -0.27 * 0.9, 1e-15);
  EXPECT_TRUE(check_feasible(small_asset(2), drained).feasible);
}

TEST(RepairSchedule, FeasibleScheduleUnchanged) {
  const StorageParams p = small_asset(3);
  const Schedule s({0.2, -0.1, 0.3});
  EXPECT_EQ(repair_schedule(p, s), s);
}

TEST(RepairSchedule, EmptyIntersectionSignals) {
  const StorageParams p = small_asset(2);
  const SampleBox far = SampleBox::uniform(2, 2.0, 0.1, 0.0);
  EXPECT_THROW(repair_schedule(p, Schedule::zeros(2), &far), InfeasibleBoxError);
  // Box forces charging past capacity on the second hour.
  const SampleBox forced = SampleBox::uniform(2, 0.6, 0.0, 0.0);
  EXPECT_THROW(repair_schedule(p, Schedule::zeros(2), &forced), InfeasibleBoxError);
}

TEST(RepairSchedule, RandomRoundTripIsFeasibleAndIdempotent) {
  Rng rng(2024);
  for (int trial = 0; trial < 500; ++trial) {
    StorageParams p = small_asset(24);
    p.eta_ch = uniform(rng, 0.5, 1.0);
    p.eta_dis = uniform(rng, 0.5, 1.0);
    p.q_ch_max = uniform(rng, 0.1, 1.0);
    p.q_dis_max = uniform(rng, 0.1, 1.0);
    p.soe_init = uniform(rng, 0.0, p.soe_max);
    Schedule s = Schedule::zeros(24);
    for (auto& q : s.q) q = uniform(rng, -1.5, 1.5);

    const bool use_box = trial % 2 == 0;
    const SampleBox box = SampleBox::uniform(24, 0.0, uniform(rng, 0.05, 1.0), 0.0);
    const SampleBox* bp = use_box ? &box : nullptr;

    const Schedule r = repair_schedule(p, s, bp);
    const auto report = check_feasible(p, r, bp, 0.0);
    ASSERT_TRUE(report.feasible) << "trial " << trial << " worst " << report.max_violation();
    EXPECT_EQ(repair_schedule(p, r, bp), r);
  }
}

TEST(SampleBox, EffectiveIntervalIntersectsInflatedPowerBounds) {
  const StorageParams p = small_asset(1);
  const SampleBox box = SampleBox::uniform(1, 0.0, 0.6, 0.1);
  const auto iv = box.effective_interval(p, 0);
  EXPECT_NEAR(iv.lo, -0.66, 1e-15);
  EXPECT_NEAR(iv.hi, 0.66, 1e-15);

  const SampleBox edge = SampleBox::uniform(1, 0.6, 0.2, 0.1);
  const auto e = edge.effective_interval(p, 0);
  EXPECT_NEAR(e.lo, 0.38, 1e-15);
  EXPECT_NEAR(e.hi, 0.66, 1e-15);

  EXPECT_THROW(SampleBox::uniform(1, 3.0, 0.1, 0.1).effective_interval(p, 0), InfeasibleBoxError);
}

}  // namespace
}  // namespace esmeta
