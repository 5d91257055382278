#include "esmeta/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "esmeta/errors.hpp"
#include "esmeta/lp.hpp"
#include "esmeta/meta_optimizer.hpp"

namespace esmeta {

PriceTakerOptimum solve_price_taker(const StorageParams& p, const std::vector<double>& prices,
                                    const SampleBox* box) {
  p.validate();
  const int h = p.horizon;
  if (static_cast<int>(prices.size()) != h) throw std::invalid_argument("solve_price_taker: price length != horizon");
  if (box && box->horizon() != h) throw std::invalid_argument("solve_price_taker: box length != horizon");

  // Variables: [charge_0..h-1 | discharge_0..h-1 | soe_0..h-1]
  LinearProgram lp = LinearProgram::with_variables(3 * h);
  lp.A_eq = Eigen::MatrixXd::Zero(h, 3 * h);
  lp.b_eq = Eigen::VectorXd::Zero(h);
  for (int t = 0; t < h; ++t) {
    lp.c[t] = prices[t];
    lp.c[h + t] = -prices[t];
    lp.lo[t] = 0.0;
    lp.hi[t] = p.q_ch_max;
    lp.lo[h + t] = 0.0;
    lp.hi[h + t] = p.q_dis_max;
    lp.lo[2 * h + t] = 0.0;
    lp.hi[2 * h + t] = p.soe_max;
    // soe_t - soe_{t-1} - eta_ch * charge_t + discharge_t / eta_dis = 0
    lp.A_eq(t, 2 * h + t) = 1.0;
    if (t > 0) lp.A_eq(t, 2 * h + t - 1) = -1.0;
    lp.A_eq(t, t) = -p.eta_ch;
    lp.A_eq(t, h + t) = 1.0 / p.eta_dis;
  }
  lp.b_eq[0] = p.soe_init;
  if (box) {
    lp.A_ub = Eigen::MatrixXd::Zero(2 * h, 3 * h);
    lp.b_ub = Eigen::VectorXd::Zero(2 * h);
    for (int t = 0; t < h; ++t) {
      lp.A_ub(2 * t, t) = 1.0;
      lp.A_ub(2 * t, h + t) = -1.0;
      lp.b_ub[2 * t] = box->cnt[t] + box->rad[t];
      lp.A_ub(2 * t + 1, t) = -1.0;
      lp.A_ub(2 * t + 1, h + t) = 1.0;
      lp.b_ub[2 * t + 1] = -(box->cnt[t] - box->rad[t]);
    }
  }

  const LpSolution sol = solve_lp(lp);
  if (sol.status != LpStatus::Optimal)
    throw NumericError("solve_price_taker: LP status " + to_string(sol.status));

  PriceTakerOptimum out;
  out.charge.resize(h);
  out.discharge.resize(h);
  out.schedule = Schedule::zeros(h);
  const double tiny = 1e-9 * std::max(p.q_ch_max, p.q_dis_max);
  for (int t = 0; t < h; ++t) {
    out.charge[t] = std::max(0.0, sol.x[t]);
    out.discharge[t] = std::max(0.0, sol.x[h + t]);
    if (out.charge[t] > tiny && out.discharge[t] > tiny) out.simultaneous = true;
    out.schedule[t] = out.charge[t] - out.discharge[t];
  }
  out.profit = -sol.objective;
  const double dual = sol.dual_objective(lp);
  out.duality_gap = std::abs(sol.objective - dual) / std::max(1.0, std::abs(sol.objective));
  return out;
}

BaselineResult run_baseline(const LowerLevelOracle& true_oracle, const LowerLevelOracle& linear_oracle,
                            const StorageParams& p) {
  if (true_oracle.horizon() != p.horizon || linear_oracle.horizon() != p.horizon)
    throw std::invalid_argument("run_baseline: oracle horizon differs from the storage horizon");
  const std::vector<double> prices = linear_oracle.evaluate(Schedule::zeros(p.horizon)).lambda;

  BaselineResult r;
  const PriceTakerOptimum opt = solve_price_taker(p, prices);
  r.schedule_linear = opt.schedule;
  r.degenerate = opt.simultaneous;

  const OracleResponse lin = linear_oracle.evaluate(r.schedule_linear);
  for (int t = 0; t < p.horizon; ++t)
    if (lin.lambda[t] != prices[t])
      throw std::invalid_argument("run_baseline: linear oracle prices depend on the schedule");
  r.profit_on_linear = lin.profit;
  r.profit_on_true = verify_schedule(true_oracle, r.schedule_linear);
  return r;
}

}  // namespace esmeta
