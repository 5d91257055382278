#pragma once

#include <vector>

#include "esmeta/oracle.hpp"
#include "esmeta/sample_box.hpp"
#include "esmeta/storage.hpp"

namespace esmeta {

// Exact upper-level optimum under fixed hourly prices, solved as an LP over
// separate charge/discharge variables and the SoE trajectory.
struct PriceTakerOptimum {
  Schedule schedule;
  std::vector<double> charge;
  std::vector<double> discharge;
  double profit = 0.0;        // -sum_t q_t * price_t
  double duality_gap = 0.0;   // relative
  bool simultaneous = false;  // some hour both charges and discharges
};

PriceTakerOptimum solve_price_taker(const StorageParams& p, const std::vector<double>& prices,
                                    const SampleBox* box = nullptr);

struct BaselineResult {
  Schedule schedule_linear;
  double profit_on_linear = 0.0;
  double profit_on_true = 0.0;
  bool degenerate = false;  // LP optimum charged and discharged in the same hour
};

// `linear_oracle` must price every schedule identically (a price-taker);
// its prices are read at the idle schedule.
BaselineResult run_baseline(const LowerLevelOracle& true_oracle, const LowerLevelOracle& linear_oracle,
                            const StorageParams& p);

}  // namespace esmeta
