#include "esmeta/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <numbers>
#include <queue>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "esmeta/lp.hpp"

namespace esmeta {

bool OracleResponse::all_cleared() const {
  return std::all_of(per_hour_status.begin(), per_hour_status.end(),
                     [](HourStatus h) { return h == HourStatus::Cleared; });
}

double OracleResponse::identity_residual(const Schedule& s) const {
  double sum = profit + penalty;
  double mag = std::abs(profit) + std::abs(penalty);
  for (int t = 0; t < s.size(); ++t) {
    if (per_hour_status[t] != HourStatus::Cleared) continue;
    sum += s[t] * lambda[t];
    mag += std::abs(s[t] * lambda[t]);
  }
  return std::abs(sum) / std::max(mag, 1.0);
}

OracleResponse make_response(const Schedule& s, std::vector<double> lambda,
                             std::vector<HourStatus> status, double penalty) {
  OracleResponse r;
  r.lambda = std::move(lambda);
  r.per_hour_status = std::move(status);
  r.penalty = penalty;
  double revenue = 0.0;
  for (int t = 0; t < s.size(); ++t)
    if (r.per_hour_status[t] == HourStatus::Cleared) revenue -= s[t] * r.lambda[t];
  r.profit = revenue - penalty;
  return r;
}

// ---------------------------------------------------------------------------

int NetworkCase::horizon() const {
  return buses.empty() ? 0 : static_cast<int>(buses.front().demand.size());
}

int NetworkCase::bus_index(int id) const {
  for (std::size_t i = 0; i < buses.size(); ++i)
    if (buses[i].id == id) return static_cast<int>(i);
  return -1;
}

void NetworkCase::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("NetworkCase: " + what); };
  if (buses.empty()) fail("no buses");
  const int h = horizon();
  if (h < 1) fail("empty demand vectors");
  for (const auto& b : buses) {
    if (static_cast<int>(b.demand.size()) != h) fail("bus " + std::to_string(b.id) + " demand length differs");
    for (double d : b.demand)
      if (!(d >= 0.0) || !std::isfinite(d)) fail("bus " + std::to_string(b.id) + " has negative demand");
    if (std::count_if(buses.begin(), buses.end(), [&](const Bus& o) { return o.id == b.id; }) != 1)
      fail("duplicate bus id " + std::to_string(b.id));
  }
  for (const auto& g : generators) {
    if (bus_index(g.bus) < 0) fail("generator at unknown bus " + std::to_string(g.bus));
    if (!(g.p_min <= g.p_max)) fail("generator p_min > p_max");
    if (g.cost_quadratic < 0.0) fail("negative quadratic cost");
  }
  for (const auto& l : lines) {
    if (bus_index(l.from) < 0 || bus_index(l.to) < 0) fail("line endpoint not a bus");
    if (l.from == l.to) fail("self loop");
    if (!(l.flow_limit > 0.0)) fail("flow_limit must be > 0");
    if (!(l.susceptance > 0.0)) fail("susceptance must be > 0");
  }
  if (bus_index(storage_bus) < 0) fail("storage_bus does not exist");
  if (bus_index(reference_bus) < 0) fail("reference_bus does not exist");

  std::vector<bool> seen(buses.size(), false);
  std::queue<int> todo;
  todo.push(0);
  seen[0] = true;
  while (!todo.empty()) {
    const int u = todo.front();
    todo.pop();
    for (const auto& l : lines) {
      const int a = bus_index(l.from), b = bus_index(l.to);
      const int v = a == u ? b : (b == u ? a : -1);
      if (v >= 0 && !seen[v]) {
        seen[v] = true;
        todo.push(v);
      }
    }
  }
  if (std::find(seen.begin(), seen.end(), false) != seen.end()) fail("network is not connected");
}

NetworkCase network_case_from_json(const nlohmann::json& j) {
  NetworkCase c;
  try {
    for (const auto& b : j.at("buses")) {
      Bus bus;
      bus.id = b.at("id").get<int>();
      bus.demand = b.at("demand").get<std::vector<double>>();
      c.buses.push_back(std::move(bus));
    }
    for (const auto& g : j.at("generators")) {
      Generator gen;
      gen.bus = g.at("bus").get<int>();
      gen.cost_linear = g.at("cost_linear").get<double>();
      gen.cost_quadratic = g.value("cost_quadratic", 0.0);
      gen.p_min = g.value("p_min", 0.0);
      gen.p_max = g.at("p_max").get<double>();
      c.generators.push_back(gen);
    }
    for (const auto& l : j.at("lines")) {
      Line line;
      line.from = l.at("from").get<int>();
      line.to = l.at("to").get<int>();
      line.susceptance = l.value("susceptance", 1.0);
      line.flow_limit = l.at("flow_limit").get<double>();
      c.lines.push_back(line);
    }
    c.storage_bus = j.at("storage_bus").get<int>();
    c.reference_bus = j.at("reference_bus").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("NetworkCase: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::json to_json(const NetworkCase& c) {
  nlohmann::json j;
  j["buses"] = nlohmann::json::array();
  for (const auto& b : c.buses) j["buses"].push_back({{"id", b.id}, {"demand", b.demand}});
  j["generators"] = nlohmann::json::array();
  for (const auto& g : c.generators)
    j["generators"].push_back({{"bus", g.bus},
                               {"cost_linear", g.cost_linear},
                               {"cost_quadratic", g.cost_quadratic},
                               {"p_min", g.p_min},
                               {"p_max", g.p_max}});
  j["lines"] = nlohmann::json::array();
  for (const auto& l : c.lines)
    j["lines"].push_back({{"from", l.from},
                          {"to", l.to},
                          {"susceptance", l.susceptance},
                          {"flow_limit", l.flow_limit}});
  j["storage_bus"] = c.storage_bus;
  j["reference_bus"] = c.reference_bus;
  return j;
}

NetworkCase load_network_case(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open network case " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw MalformedFileError(path, 0, e.what());
  }
  return network_case_from_json(j);
}

namespace {

// Single-hour DC-OPF in angle form. Variable layout:
//   [generator segments | bus angles | line flows | imbalance slacks]
// The slacks are present only for the feasibility-restoration solve.
struct HourModel {
  LinearProgram lp;
  int storage_row = 0;
};

HourModel build_hour(const NetworkCase& net, int hour, double q, int segments, bool with_slack) {
  const int nb = static_cast<int>(net.buses.size());
  const int ng = static_cast<int>(net.generators.size());
  const int nl = static_cast<int>(net.lines.size());
  const int seg0 = 0;
  const int ang0 = seg0 + ng * segments;
  const int flow0 = ang0 + nb;
  const int slack0 = flow0 + nl;
  const int nvar = slack0 + (with_slack ? 2 * nb : 0);

  HourModel m;
  LinearProgram& lp = m.lp;
  lp = LinearProgram::with_variables(nvar);
  lp.A_eq = Eigen::MatrixXd::Zero(nb + nl, nvar);
  lp.b_eq = Eigen::VectorXd::Zero(nb + nl);

  for (int b = 0; b < nb; ++b) {
    lp.b_eq[b] = net.buses[b].demand[hour];
    if (net.buses[b].id == net.storage_bus) {
      lp.b_eq[b] += q;  // charging adds load
      m.storage_row = b;
    }
  }
  for (int g = 0; g < ng; ++g) {
    const Generator& gen = net.generators[g];
    const int b = net.bus_index(gen.bus);
    const double width = (gen.p_max - gen.p_min) / segments;
    lp.b_eq[b] -= gen.p_min;
    for (int k = 0; k < segments; ++k) {
      const int v = seg0 + g * segments + k;
      const double a = gen.p_min + k * width;
      const double e = a + width;
      lp.c[v] = gen.cost_linear + gen.cost_quadratic * (a + e);
      lp.lo[v] = 0.0;
      lp.hi[v] = width;
      lp.A_eq(b, v) = 1.0;
    }
  }
  for (int b = 0; b < nb; ++b) {
    const int v = ang0 + b;
    const bool ref = net.buses[b].id == net.reference_bus;
    lp.lo[v] = ref ? 0.0 : -kLpInfinity;
    lp.hi[v] = ref ? 0.0 : kLpInfinity;
  }
  for (int l = 0; l < nl; ++l) {
    const Line& line = net.lines[l];
    const int v = flow0 + l;
    const int from = net.bus_index(line.from);
    const int to = net.bus_index(line.to);
    lp.lo[v] = -line.flow_limit;
    lp.hi[v] = line.flow_limit;
    lp.A_eq(from, v) = -1.0;
    lp.A_eq(to, v) = 1.0;
    const int row = nb + l;
    lp.A_eq(row, v) = 1.0;
    lp.A_eq(row, ang0 + from) = -line.susceptance;
    lp.A_eq(row, ang0 + to) = line.susceptance;
  }
  if (with_slack) {
    lp.c.head(slack0).setZero();
    for (int b = 0; b < nb; ++b) {
      lp.c[slack0 + 2 * b] = 1.0;
      lp.c[slack0 + 2 * b + 1] = 1.0;
      lp.A_eq(b, slack0 + 2 * b) = 1.0;
      lp.A_eq(b, slack0 + 2 * b + 1) = -1.0;
    }
  }
  return m;
}

}  // namespace

OracleResponse clear_dc_market(const NetworkCase& network, const Schedule& s,
                               const DcMarketOptions& options) {
  const int h = network.horizon();
  if (s.size() != h) throw std::invalid_argument("clear_dc_market: schedule length != horizon");
  if (options.segments < 1) throw std::invalid_argument("clear_dc_market: segments must be >= 1");

  std::vector<double> lambda(h, 0.0);
  std::vector<HourStatus> status(h, HourStatus::Cleared);
  double penalty = 0.0;
  for (int t = 0; t < h; ++t) {
    const HourModel model = build_hour(network, t, s[t], options.segments, false);
    const LpSolution sol = solve_lp(model.lp);
    if (sol.status == LpStatus::Optimal) {
      lambda[t] = sol.duals_eq[model.storage_row];
      continue;
    }
    status[t] = HourStatus::Infeasible;
    const HourModel relaxed = build_hour(network, t, s[t], options.segments, true);
    const LpSolution rsol = solve_lp(relaxed.lp);
    if (rsol.status != LpStatus::Optimal)
      throw NumericError("clear_dc_market: feasibility restoration failed at hour " + std::to_string(t));
    penalty += options.penalty * rsol.objective;
  }
  return make_response(s, std::move(lambda), std::move(status), penalty);
}

DcMarketOracle::DcMarketOracle(NetworkCase network, DcMarketOptions options)
    : network_(std::move(network)), options_(options) {
  network_.validate();
}

OracleResponse DcMarketOracle::evaluate(const Schedule& s) const {
  return clear_dc_market(network_, s, options_);
}

// ---------------------------------------------------------------------------

void SyntheticPriceParams::validate() const {
  if (a.empty()) throw std::invalid_argument("SyntheticPriceParams: empty price profile");
  if (d.size() != a.size()) throw std::invalid_argument("SyntheticPriceParams: a/d length mismatch");
  for (std::size_t t = 0; t < a.size(); ++t)
    if (!std::isfinite(a[t]) || !std::isfinite(d[t]))
      throw std::invalid_argument("SyntheticPriceParams: non-finite profile entry");
  if (!std::isfinite(b) || !std::isfinite(c))
    throw std::invalid_argument("SyntheticPriceParams: non-finite coefficient");
}

OracleResponse synthetic_price(const SyntheticPriceParams& params, const Schedule& s) {
  const int h = params.horizon();
  if (s.size() != h) throw std::invalid_argument("synthetic_price: schedule length != horizon");
  std::vector<double> lambda(h);
  for (int t = 0; t < h; ++t) {
    const double x = params.d[t] + s[t];
    lambda[t] = params.a[t] + params.b * x + params.c * x * x * x;
  }
  return make_response(s, std::move(lambda), std::vector<HourStatus>(h, HourStatus::Cleared), 0.0);
}

SyntheticPriceOracle::SyntheticPriceOracle(SyntheticPriceParams params) : params_(std::move(params)) {
  params_.validate();
}

OracleResponse SyntheticPriceOracle::evaluate(const Schedule& s) const {
  return synthetic_price(params_, s);
}

std::string SyntheticPriceOracle::name() const {
  return params_.b == 0.0 && params_.c == 0.0 ? "price_taker" : "synthetic";
}

std::vector<double> daily_load_profile(int horizon, const LoadProfileParams& p) {
  if (horizon < 1) throw std::invalid_argument("daily_load_profile: horizon must be >= 1");
  std::vector<double> d(horizon);
  for (int t = 0; t < horizon; ++t) {
    const double hour = (t + 0.5) * 24.0 / horizon;
    const double m = (hour - p.morning_hour) / p.width_hours;
    const double e = (hour - p.evening_hour) / p.width_hours;
    const double n = (hour - p.night_hour) / p.night_width_hours;
    d[t] = p.base + p.morning_peak * std::exp(-m * m) + p.evening_peak * std::exp(-e * e) -
           p.night_dip * std::exp(-n * n);
  }
  return d;
}

LoadProfileParams default_load_profile() {
  LoadProfileParams load;
  load.base = 2.0;
  load.morning_peak = 0.6;
  load.evening_peak = 1.2;
  // Peaks and trough off the half-hour grid so no two hours share a price.
  load.morning_hour = 8.3;
  load.evening_hour = 19.3;
  load.night_dip = 0.4;
  load.night_hour = 3.6;
  return load;
}

SyntheticPriceParams default_synthetic_params(int horizon) {
  SyntheticPriceParams p;
  p.d = daily_load_profile(horizon, default_load_profile());
  p.a.assign(horizon, 10.0);
  p.b = 2.0;
  p.c = 0.5;
  return p;
}

SyntheticPriceParams linearize_at_idle(const LowerLevelOracle& oracle) {
  const int h = oracle.horizon();
  const OracleResponse idle = oracle.evaluate(Schedule::zeros(h));
  SyntheticPriceParams p;
  p.a = idle.lambda;
  p.d.assign(h, 0.0);
  return p;
}

std::vector<OracleResponse> batch_evaluate(const LowerLevelOracle& oracle,
                                           std::span<const Schedule> schedules, int workers) {
  if (workers < 1) throw std::invalid_argument("batch_evaluate: workers must be >= 1");
  const std::size_t n = schedules.size();
  std::vector<OracleResponse> out(n);
  std::vector<std::exception_ptr> errors(n);
  auto work = [&](std::size_t first) {
    for (std::size_t i = first; i < n; i += static_cast<std::size_t>(workers)) {
      try {
        out[i] = oracle.evaluate(schedules[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t nthreads = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
  if (nthreads <= 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < nthreads; ++w) pool.emplace_back(work, w);
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const std::exception& e) {
      throw BatchEvaluationError(i, e.what());
    }
  }
  return out;
}

}  // namespace esmeta
