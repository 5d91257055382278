#include <gtest/gtest.h>

#include "esmeta/errors.hpp"
#include "esmeta/lp.hpp"
#include "support/lp_oracle.hpp"

namespace esmeta {
namespace {

TEST(SolveLp, SingleBoundedVariable) {
  LinearProgram lp = LinearProgram::with_variables(1);
  lp.c << 1.0;
  lp.lo << 3.0;
  const auto sol = solve_lp(lp);
  ASSERT_EQ(sol.status, LpStatus::Optimal);
  EXPECT_NEAR(sol.x[0], 3.0, 1e-12);
  EXPECT_NEAR(sol.objective, 3.0, 1e-12);
  EXPECT_NEAR(sol.reduced_costs[0], 1.0, 1e-12);
}

TEST(SolveLp, TwoVariablePolytopeDual) {
  LinearProgram lp = LinearProgram::with_variables(2);
  lp.c << -1.0, -1.0;
  lp.hi << 1.0, 1.0;
  lp.A_ub.resize(1, 2);
  lp.A_ub << 1.0, 1.0;
  lp.b_ub.resize(1);
  lp.b_ub << 1.0;
  const auto sol = solve_lp(lp);
  ASSERT_EQ(sol.status, LpStatus::Optimal);
  EXPECT_NEAR(sol.objective, -1.0, 1e-12);
  EXPECT_NEAR(*testing::vertex_enumeration_min(lp), -1.0, 1e-12);
  EXPECT_NEAR(sol.duals_ub[0], 1.0, 1e-12);
  EXPECT_NEAR(sol.dual_objective(lp), -1.0, 1e-12);
}

TEST(SolveLp, RedundantEqualityRowsSplitTheDual) {
  // minimize 2x + 3y s.t. x + y = 4, x, y >= 0  ->  y = 0, dual 2.
  LinearProgram base = LinearProgram::with_variables(2);
  base.c << 2.0, 3.0;
  base.A_eq.resize(1, 2);
  base.A_eq << 1.0, 1.0;
  base.b_eq.resize(1);
  base.b_eq << 4.0;
  const auto ref = solve_lp(base);
  ASSERT_EQ(ref.status, LpStatus::Optimal);
  EXPECT_NEAR(ref.duals_eq[0], 2.0, 1e-12);

  LinearProgram dup = base;
  dup.A_eq.resize(2, 2);
  dup.A_eq << 1.0, 1.0, 1.0, 1.0;
  dup.b_eq.resize(2);
  dup.b_eq << 4.0, 4.0;
  const auto sol = solve_lp(dup);
  ASSERT_EQ(sol.status, LpStatus::Optimal);
  EXPECT_NEAR(sol.objective, 8.0, 1e-12);
  EXPECT_NEAR(sol.duals_eq.sum(), ref.duals_eq[0], 1e-12);
  const auto chk = testing::check_duality(dup, sol);
  EXPECT_LT(chk.gap, 1e-9);
  EXPECT_LT(chk.slackness, 1e-9);
}

TEST(SolveLp, InfeasibleAndUnbounded) {
  LinearProgram inf = LinearProgram::with_variables(1);
  inf.c << 1.0;
  inf.hi << 1.0;
  inf.A_ub.resize(1, 1);
  inf.A_ub << -1.0;
  inf.b_ub.resize(1);
  inf.b_ub << -2.0;  // x >= 2
  EXPECT_EQ(solve_lp(inf).status, LpStatus::Infeasible);

  LinearProgram unb = LinearProgram::with_variables(2);
  unb.c << -1.0, 0.0;
  unb.A_ub.resize(1, 2);
  unb.A_ub << -1.0, 1.0;
  unb.b_ub.resize(1);
  unb.b_ub << 1.0;
  EXPECT_EQ(solve_lp(unb).status, LpStatus::Unbounded);
}

TEST(SolveLp, FreeAndUpperOnlyVariables) {
  // minimize x - y s.t. x - y >= -2 (as -x + y <= 2), x free, y <= 5.
  LinearProgram lp = LinearProgram::with_variables(2);
  lp.c << 1.0, -1.0;
  lp.lo << -kLpInfinity, -kLpInfinity;
  lp.hi << kLpInfinity, 5.0;
  lp.A_ub.resize(1, 2);
  lp.A_ub << -1.0, 1.0;
  lp.b_ub.resize(1);
  lp.b_ub << 2.0;
  const auto sol = solve_lp(lp);
  ASSERT_EQ(sol.status, LpStatus::Optimal);
  EXPECT_NEAR(sol.objective, -2.0, 1e-12);
  const auto chk = testing::check_duality(lp, sol);
  EXPECT_LT(chk.gap, 1e-9);
  EXPECT_LT(chk.dual_sign, 1e-9);
}

TEST(SolveLp, RejectsMalformed) {
  LinearProgram lp = LinearProgram::with_variables(2);
  lp.lo[0] = 2.0;
  lp.hi[0] = 1.0;
  EXPECT_THROW(solve_lp(lp), std::invalid_argument);
  LinearProgram bad = LinearProgram::with_variables(2);
  bad.A_ub.resize(1, 3);
  EXPECT_THROW(solve_lp(bad), std::invalid_argument);
}

TEST(SolveLp, RandomSmallMatchesVertexEnumeration) {
  Rng rng(7);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = 2 + static_cast<int>(uniform_index(rng, 5));
    const int m_eq = static_cast<int>(uniform_index(rng, 2));
    const int m_ub = 1 + static_cast<int>(uniform_index(rng, 4));
    const auto lp = testing::random_feasible_lp(rng, n, m_eq, m_ub);
    const auto sol = solve_lp(lp);
    ASSERT_EQ(sol.status, LpStatus::Optimal) << "trial " << trial;
    const auto ref = testing::vertex_enumeration_min(lp);
    ASSERT_TRUE(ref.has_value());
    EXPECT_NEAR(sol.objective, *ref, 1e-6 * (1.0 + std::abs(*ref))) << "trial " << trial;
  }
}

TEST(SolveLp, RandomLargeSatisfiesDuality) {
  Rng rng(99);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 10 + static_cast<int>(uniform_index(rng, 21));
    const auto lp = testing::random_feasible_lp(rng, n, static_cast<int>(uniform_index(rng, 5)),
                                                static_cast<int>(uniform_index(rng, 15)));
    const auto sol = solve_lp(lp);
    ASSERT_EQ(sol.status, LpStatus::Optimal);
    const auto chk = testing::check_duality(lp, sol);
    EXPECT_LT(chk.gap, 1e-6);
    EXPECT_LT(chk.slackness, 1e-6);
    EXPECT_LT(chk.dual_sign, 1e-6);
    EXPECT_LT(chk.primal, 1e-8);
  }
}

TEST(SolveLp, Deterministic) {
  Rng rng(3);
  const auto lp = testing::random_feasible_lp(rng, 12, 2, 6);
  const auto a = solve_lp(lp);
  const auto b = solve_lp(lp);
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(a.duals_eq, b.duals_eq);
  EXPECT_EQ(a.duals_ub, b.duals_ub);
}

}  // namespace
}  // namespace esmeta
