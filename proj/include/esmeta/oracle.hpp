#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "esmeta/errors.hpp"
#include "esmeta/storage.hpp"

namespace esmeta {

enum class HourStatus { Cleared, Infeasible };

// Lower-level answer for one schedule. profit == -Σ_cleared q_t λ_t - penalty.
struct OracleResponse {
  std::vector<double> lambda;
  double profit = 0.0;
  double penalty = 0.0;
  std::vector<HourStatus> per_hour_status;

  bool all_cleared() const;
  // |profit + Σ_cleared q_t λ_t + penalty| relative to the magnitude of the terms.
  double identity_residual(const Schedule& s) const;
};

// Assembles a response from hourly prices; keeps the identity exact by
// construction.
OracleResponse make_response(const Schedule& s, std::vector<double> lambda,
                             std::vector<HourStatus> status, double penalty);

class LowerLevelOracle {
 public:
  virtual ~LowerLevelOracle() = default;
  virtual OracleResponse evaluate(const Schedule& s) const = 0;
  virtual int horizon() const = 0;
  virtual std::string name() const = 0;
};

// ---------------------------------------------------------------------------
// DC-OPF market clearing

struct Bus {
  int id = 0;
  std::vector<double> demand;
};

struct Generator {
  int bus = 0;
  double cost_linear = 0.0;
  double cost_quadratic = 0.0;
  double p_min = 0.0;
  double p_max = 0.0;
};

struct Line {
  int from = 0;
  int to = 0;
  double susceptance = 1.0;
  double flow_limit = 1.0;
};

struct NetworkCase {
  std::vector<Bus> buses;
  std::vector<Generator> generators;
  std::vector<Line> lines;
  int storage_bus = 0;
  int reference_bus = 0;

  int horizon() const;
  int bus_index(int id) const;  // -1 if absent
  // Throws std::invalid_argument: disconnected graph, negative demand,
  // p_min > p_max, non-positive flow limit, unknown storage/reference bus.
  void validate() const;
};

NetworkCase network_case_from_json(const nlohmann::json& j);
nlohmann::json to_json(const NetworkCase& c);
NetworkCase load_network_case(const std::string& path);

struct DcMarketOptions {
  int segments = 8;        // piecewise-linear pieces per quadratic cost
  double penalty = 1e4;    // profit penalty per p.u. of unresolvable imbalance
};

OracleResponse clear_dc_market(const NetworkCase& network, const Schedule& s,
                               const DcMarketOptions& options = {});

class DcMarketOracle final : public LowerLevelOracle {
 public:
  explicit DcMarketOracle(NetworkCase network, DcMarketOptions options = {});
  OracleResponse evaluate(const Schedule& s) const override;
  int horizon() const override { return network_.horizon(); }
  std::string name() const override { return "dc"; }
  const NetworkCase& network() const { return network_; }

 private:
  NetworkCase network_;
  DcMarketOptions options_;
};

// ---------------------------------------------------------------------------
// Synthetic nonconvex price response: λ_t = a_t + b x + c x^3, x = d_t + q_t.

struct SyntheticPriceParams {
  std::vector<double> a;
  double b = 0.0;
  double c = 0.0;
  std::vector<double> d;

  int horizon() const { return static_cast<int>(a.size()); }
  void validate() const;
};

OracleResponse synthetic_price(const SyntheticPriceParams& params, const Schedule& s);

class SyntheticPriceOracle final : public LowerLevelOracle {
 public:
  explicit SyntheticPriceOracle(SyntheticPriceParams params);
  OracleResponse evaluate(const Schedule& s) const override;
  int horizon() const override { return params_.horizon(); }
  std::string name() const override;
  const SyntheticPriceParams& params() const { return params_; }

 private:
  SyntheticPriceParams params_;
};

// Two-peak daily demand shape with an overnight trough, sampled at `horizon`
// equal steps over 24 h.
struct LoadProfileParams {
  double base = 0.55;
  double morning_peak = 0.2;
  double evening_peak = 0.35;
  double morning_hour = 8.0;
  double evening_hour = 19.0;
  double width_hours = 2.5;
  double night_dip = 0.0;
  double night_hour = 3.5;
  double night_width_hours = 3.0;
};

std::vector<double> daily_load_profile(int horizon, const LoadProfileParams& params = {});

// Load shape of the desk-scale synthetic case.
LoadProfileParams default_load_profile();

// Price-maker case used by the desk-scale experiments.
SyntheticPriceParams default_synthetic_params(int horizon);

// Price-taker view of any oracle: λ frozen at its response to the idle
// schedule (b = c = 0, d = 0).
SyntheticPriceParams linearize_at_idle(const LowerLevelOracle& oracle);

// ---------------------------------------------------------------------------

// Raised by batch_evaluate; index() is the position of the first failure.
class BatchEvaluationError : public Error {
 public:
  BatchEvaluationError(std::size_t index, const std::string& what)
      : Error("schedule " + std::to_string(index) + ": " + what), index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

// Evaluates schedules across `workers` threads. Output order matches input.
std::vector<OracleResponse> batch_evaluate(const LowerLevelOracle& oracle,
                                           std::span<const Schedule> schedules, int workers = 1);

}  // namespace esmeta
