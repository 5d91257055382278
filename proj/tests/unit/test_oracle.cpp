#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

#include <gtest/gtest.h>

#include "esmeta/oracle.hpp"
#include "esmeta/rng.hpp"

namespace esmeta {
namespace {

NetworkCase two_bus() {
  NetworkCase c;
  c.buses = {{1, {0.0}}, {2, {1.0}}};
  c.generators = {{1, 10.0, 0.0, 0.0, 2.0}};
  c.lines = {{1, 2, 1.0, 10.0}};
  c.storage_bus = 2;
  c.reference_bus = 1;
  return c;
}

// Cheap unit behind a 0.5 p.u. line, expensive unit on an uncongested line.
NetworkCase three_bus(double load3) {
  NetworkCase c;
  c.buses = {{1, {0.0}}, {2, {0.0}}, {3, {load3}}};
  c.generators = {{1, 10.0, 0.0, 0.0, 1.0}, {2, 50.0, 0.0, 0.0, 2.0}};
  c.lines = {{1, 3, 1.0, 0.5}, {2, 3, 1.0, 10.0}};
  c.storage_bus = 3;
  c.reference_bus = 1;
  return c;
}

// Merit-order cost of serving load L at bus 3 in the radial case.
double three_bus_cost(double load) {
  const double cheap = std::min(load, 0.5);
  return 10.0 * cheap + 50.0 * (load - cheap);
}

TEST(DcMarket, IdleScheduleEarnsNothing) {
  for (const NetworkCase& c : {two_bus(), three_bus(1.2)}) {
    const auto r = clear_dc_market(c, Schedule::zeros(1));
    EXPECT_EQ(r.profit, 0.0);
    EXPECT_TRUE(r.all_cleared());
  }
}

TEST(DcMarket, TwoBusDischargeSetsMarginalPrice) {
  const auto r = clear_dc_market(two_bus(), Schedule({-0.5}));
  ASSERT_TRUE(r.all_cleared());
  EXPECT_NEAR(r.lambda[0], 10.0, 1e-9);
  EXPECT_NEAR(r.profit, 5.0, 1e-9);
  EXPECT_EQ(r.penalty, 0.0);
}

TEST(DcMarket, CongestionMakesExpensiveUnitMarginal) {
  const auto r = clear_dc_market(three_bus(1.2), Schedule::zeros(1));
  ASSERT_TRUE(r.all_cleared());
  EXPECT_NEAR(r.lambda[0], 50.0, 1e-9);

  // Price at bus 3 equals the slope of the merit-order cost curve.
  for (double load : {0.2, 0.4, 0.8, 1.6}) {
    const double h = 1e-3;
    const double fd = (three_bus_cost(load + h) - three_bus_cost(load - h)) / (2 * h);
    const auto rr = clear_dc_market(three_bus(load), Schedule::zeros(1));
    EXPECT_NEAR(rr.lambda[0], fd, 1e-6) << "load " << load;
  }
}

TEST(DcMarket, PriceIsMonotoneInLoad) {
  double prev = -1e300;
  for (int k = 0; k <= 24; ++k) {
    const double load = 0.1 * k;
    const auto r = clear_dc_market(three_bus(load), Schedule::zeros(1));
    ASSERT_TRUE(r.all_cleared()) << load;
    EXPECT_GE(r.lambda[0], prev - 1e-9) << load;
    prev = r.lambda[0];
  }
}

TEST(DcMarket, QuadraticCostUsesSegmentSlopes) {
  NetworkCase c = two_bus();
  c.generators[0].cost_quadratic = 4.0;  // marginal cost 10 + 8p on [0, 2]
  // Each of 8 segments has width 0.25; load 1.1 sits in segment [1, 1.25].
  c.buses[1].demand = {1.1};
  const auto r = clear_dc_market(c, Schedule::zeros(1));
  EXPECT_NEAR(r.lambda[0], 10.0 + 4.0 * (1.0 + 1.25), 1e-9);
}

TEST(DcMarket, InfeasibleHourIsPenalized) {
  NetworkCase c = two_bus();
  c.buses[1].demand = {1.0, 1.0};
  c.buses[0].demand = {0.0, 0.0};
  const Schedule s({5.0, -0.5});  // hour 0 asks for 6 p.u. from a 2 p.u. unit
  const auto r = clear_dc_market(c, s);
  EXPECT_EQ(r.per_hour_status[0], HourStatus::Infeasible);
  EXPECT_EQ(r.per_hour_status[1], HourStatus::Cleared);
  EXPECT_NEAR(r.penalty, 4.0e4, 1e-6);
  EXPECT_NEAR(r.profit, 5.0 - 4.0e4, 1e-6);
  EXPECT_LT(r.identity_residual(s), 1e-12);
}

TEST(DcMarket, IsDeterministic) {
  const DcMarketOracle oracle(three_bus(1.2));
  const auto a = oracle.evaluate(Schedule({0.3}));
  const auto b = oracle.evaluate(Schedule({0.3}));
  EXPECT_EQ(a.lambda, b.lambda);
  EXPECT_EQ(a.profit, b.profit);
}

TEST(NetworkCaseIo, JsonRoundTrip) {
  const NetworkCase c = three_bus(1.2);
  const NetworkCase back = network_case_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));

  const auto path = std::filesystem::temp_directory_path() / "esmeta_case.json";
  {
    std::ofstream out(path);
    out << to_json(c).dump(2);
  }
  EXPECT_EQ(to_json(load_network_case(path.string())), to_json(c));
  std::filesystem::remove(path);
}

TEST(NetworkCaseIo, RejectsBrokenCases) {
  nlohmann::json j = to_json(two_bus());
  j.erase("lines");
  EXPECT_THROW(network_case_from_json(j), std::invalid_argument);

  NetworkCase islanded = three_bus(1.0);
  islanded.lines.pop_back();
  EXPECT_THROW(islanded.validate(), std::invalid_argument);

  NetworkCase bad_bus = two_bus();
  bad_bus.storage_bus = 7;
  EXPECT_THROW(bad_bus.validate(), std::invalid_argument);

  const auto path = std::filesystem::temp_directory_path() / "esmeta_bad_case.json";
  {
    std::ofstream out(path);
    out << "{ \"buses\": [ ";
  }
  EXPECT_THROW(load_network_case(path.string()), MalformedFileError);
  std::filesystem::remove(path);
}

TEST(SyntheticPrice, ClosedFormExample) {
  SyntheticPriceParams p;
  p.a = {10.0, 20.0, 30.0};
  p.b = 1.0;
  p.d = {0.0, 0.0, 0.0};
  const auto r = synthetic_price(p, Schedule({0.5, 0.0, -0.5}));
  EXPECT_EQ(r.lambda, (std::vector<double>{10.5, 20.0, 29.5}));
  EXPECT_DOUBLE_EQ(r.profit, 9.5);
  EXPECT_EQ(synthetic_price(p, Schedule::zeros(3)).profit, 0.0);
}

TEST(SyntheticPrice, PriceTakerIsLinear) {
  const SyntheticPriceOracle nonlinear(default_synthetic_params(24));
  const SyntheticPriceOracle taker(linearize_at_idle(nonlinear));
  EXPECT_EQ(taker.name(), "price_taker");
  EXPECT_EQ(nonlinear.name(), "synthetic");

  Rng rng(5);
  Schedule s = Schedule::zeros(24);
  for (auto& q : s.q) q = uniform(rng, -0.6, 0.6);
  const auto r = taker.evaluate(s);
  const auto idle = nonlinear.evaluate(Schedule::zeros(24));
  double expected = 0.0;
  for (int t = 0; t < 24; ++t) {
    EXPECT_EQ(r.lambda[t], idle.lambda[t]);
    expected -= s[t] * idle.lambda[t];
  }
  EXPECT_NEAR(r.profit, expected, 1e-12);
}

TEST(SyntheticPrice, DefaultProfileHasTwoPeaks) {
  const auto p = default_synthetic_params(24);
  const auto lam = synthetic_price(p, Schedule::zeros(24)).lambda;
  const auto lowest = std::min_element(lam.begin(), lam.end()) - lam.begin();
  const auto highest = std::max_element(lam.begin(), lam.end()) - lam.begin();
  EXPECT_TRUE(lowest < 5 || lowest > 21) << lowest;
  EXPECT_GE(highest, 17);
  EXPECT_LE(highest, 20);
  EXPECT_GT(lam[8], lam[12]);
}

TEST(SyntheticPrice, DefaultPricesAreDistinct) {
  auto lam = synthetic_price(default_synthetic_params(24), Schedule::zeros(24)).lambda;
  std::sort(lam.begin(), lam.end());
  for (std::size_t t = 1; t < lam.size(); ++t) EXPECT_GT(lam[t] - lam[t - 1], 1e-3) << t;
}

TEST(LoadProfile, OvernightDipLowersNightOnly) {
  LoadProfileParams flat;
  flat.morning_peak = flat.evening_peak = 0.0;
  LoadProfileParams dipped = flat;
  dipped.night_dip = 0.3;
  dipped.night_hour = 3.5;
  const auto a = daily_load_profile(24, flat);
  const auto b = daily_load_profile(24, dipped);
  EXPECT_NEAR(a[3] - b[3], 0.3, 1e-15);
  EXPECT_LT(a[15] - b[15], 1e-6);
}

TEST(OracleResponse, ProfitIdentityHolds) {
  const SyntheticPriceOracle synth(default_synthetic_params(24));
  NetworkCase c = three_bus(1.2);
  for (auto& b : c.buses) b.demand.assign(24, b.demand[0]);
  const DcMarketOracle dc(c);
  Rng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    Schedule s = Schedule::zeros(24);
    for (auto& q : s.q) q = uniform(rng, -0.66, 0.66);
    EXPECT_LT(synth.evaluate(s).identity_residual(s), 1e-9);
    EXPECT_LT(dc.evaluate(s).identity_residual(s), 1e-9);
  }
}

TEST(BatchEvaluate, MatchesSequentialEvaluation) {
  const SyntheticPriceOracle oracle(default_synthetic_params(24));
  EXPECT_TRUE(batch_evaluate(oracle, std::vector<Schedule>{}, 4).empty());

  Rng rng(21);
  std::vector<Schedule> schedules(1000, Schedule::zeros(24));
  for (auto& s : schedules)
    for (auto& q : s.q) q = uniform(rng, -0.66, 0.66);
  const auto seq = batch_evaluate(oracle, schedules, 1);
  const auto par = batch_evaluate(oracle, schedules, 4);
  ASSERT_EQ(seq.size(), schedules.size());
  for (std::size_t i = 0; i < schedules.size(); ++i) {
    const auto direct = oracle.evaluate(schedules[i]);
    EXPECT_EQ(seq[i].profit, direct.profit);
    EXPECT_EQ(par[i].profit, direct.profit);
    EXPECT_EQ(par[i].lambda, direct.lambda);
  }
  EXPECT_THROW(batch_evaluate(oracle, schedules, 0), std::invalid_argument);
}

TEST(BatchEvaluate, ReportsFailingIndex) {
  const SyntheticPriceOracle oracle(default_synthetic_params(24));
  std::vector<Schedule> schedules(5, Schedule::zeros(24));
  schedules[3] = Schedule::zeros(7);
  try {
    batch_evaluate(oracle, schedules, 2);
    FAIL() << "expected BatchEvaluationError";
  } catch (const BatchEvaluationError& e) {
    EXPECT_EQ(e.index(), 3u);
  }
}

}  // namespace
}  // namespace esmeta
