#include "esmeta/meta_optimizer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <thread>

#include "esmeta/dataset.hpp"
#include "esmeta/errors.hpp"
#include "esmeta/rng.hpp"

namespace esmeta {

void SurrogateMaxConfig::validate() const {
  if (starts < 1) throw std::invalid_argument("SurrogateMaxConfig: starts must be >= 1");
  if (steps < 1) throw std::invalid_argument("SurrogateMaxConfig: steps must be >= 1");
  if (!(step_size > 0.0)) throw std::invalid_argument("SurrogateMaxConfig: step_size must be > 0");
  if (!(penalty_weight > 0.0)) throw std::invalid_argument("SurrogateMaxConfig: penalty_weight must be > 0");
}

namespace {

// Energy added to the store by exchanging q, and its inverse.
double stored(const StorageParams& p, double q) { return q > 0.0 ? q * p.eta_ch : q / p.eta_dis; }
double exchanged(const StorageParams& p, double d) { return d > 0.0 ? d / p.eta_ch : d * p.eta_dis; }
double exchanged_slope(const StorageParams& p, double d) { return d > 0.0 ? 1.0 / p.eta_ch : p.eta_dis; }

}  // namespace

// The ascent runs on the SoE trajectory y, where the SoE band is a box and
// the hourly limits become bounds on y_t - y_{t-1}, penalized quadratically.
SurrogateOptimum maximize_surrogate(const ConvSurrogate& net, const StorageParams& p, const SampleBox& box,
                                    const SurrogateMaxConfig& cfg) {
  cfg.validate();
  box.validate();
  const int h = box.horizon();
  if (h != net.input_length() || h != p.horizon)
    throw ShapeMismatchError("maximize_surrogate: horizon mismatch between net, asset and box");

  SampleBox tight = box;
  tight.epsilon = 0.0;
  std::vector<double> lo(h), hi(h), dlo(h), dhi(h);
  double widest = 0.0;
  for (int t = 0; t < h; ++t) {
    lo[t] = std::max(box.cnt[t] - box.rad[t], -p.q_dis_max);
    hi[t] = std::min(box.cnt[t] + box.rad[t], p.q_ch_max);
    if (lo[t] > hi[t])
      throw AllStartsFailedError("maximize_surrogate: box misses the power bounds at hour " + std::to_string(t));
    dlo[t] = stored(p, lo[t]);
    dhi[t] = stored(p, hi[t]);
    widest = std::max(widest, dhi[t] - dlo[t]);
  }
  const double scale = cfg.step_size * std::min(p.soe_max, widest);
  const double inv_std = 1.0 / net.normalization.target_std;
  constexpr double b1 = 0.9, b2 = 0.999;

  SurrogateOptimum best;
  best.computed_profit = -std::numeric_limits<double>::infinity();
  ConvSurrogate::Workspace ws;
  Eigen::MatrixXd x(1, h);
  Eigen::RowVectorXd y(h), gy(h), m(h), v(h);
  std::vector<double> d(h), gd(h);
  Eigen::VectorXd values;
  for (int k = 0; k < cfg.starts; ++k) {
    Rng rng(derive_seed(cfg.seed, "start", static_cast<std::uint64_t>(k)));
    double soe = p.soe_init;
    for (int t = 0; t < h; ++t) {
      const double q0 = hi[t] > lo[t] ? uniform(rng, lo[t], hi[t]) : lo[t];
      soe = std::clamp(soe_step(p, soe, q0), 0.0, p.soe_max);
      y[t] = soe;
    }
    m.setZero();
    v.setZero();
    double p1 = 1.0, p2 = 1.0;
    for (int j = 0; j <= cfg.steps; ++j) {
      for (int t = 0; t < h; ++t) {
        d[t] = y[t] - (t > 0 ? y[t - 1] : p.soe_init);
        x(0, t) = exchanged(p, d[t]);
      }
      if (j == cfg.steps) break;
      const Eigen::MatrixXd grad = net.grad_input_batch(x, &values, ws);
      for (int t = 0; t < h; ++t) {
        const double excess = d[t] > dhi[t] ? d[t] - dhi[t] : (d[t] < dlo[t] ? d[t] - dlo[t] : 0.0);
        gd[t] = grad(0, t) * inv_std * exchanged_slope(p, d[t]) - 2.0 * cfg.penalty_weight * excess;
      }
      for (int t = 0; t < h; ++t) gy[t] = gd[t] - (t + 1 < h ? gd[t + 1] : 0.0);
      m = b1 * m + (1.0 - b1) * gy;
      v = b2 * v + (1.0 - b2) * gy.cwiseAbs2();
      p1 *= b1;
      p2 *= b2;
      const double lr = scale * 0.5 * (1.0 + std::cos(std::numbers::pi * j / cfg.steps));
      const Eigen::RowVectorXd step = (m.array() / (1.0 - p1)) / ((v.array() / (1.0 - p2)).sqrt() + 1e-12);
      y = (y.array() + lr * step.array()).max(0.0).min(p.soe_max).matrix();
    }
    Schedule q;
    try {
      q = repair_schedule(p, Schedule(std::vector<double>(x.data(), x.data() + h)), &tight);
    } catch (const InfeasibleBoxError&) {
      ++best.failed_starts;
      continue;
    }
    const double c = net.forward(q);
    if (c > best.computed_profit) {
      best.computed_profit = c;
      best.schedule = std::move(q);
      best.start = k;
    }
  }
  if (best.start < 0) {
    try {
      best.schedule = repair_schedule(p, Schedule(box.cnt), &tight);
    } catch (const InfeasibleBoxError& e) {
      throw AllStartsFailedError(std::string("maximize_surrogate: no start could be repaired: ") + e.what());
    }
    best.computed_profit = net.forward(best.schedule);
  }
  return best;
}

double verify_schedule(const LowerLevelOracle& oracle, const Schedule& q) { return oracle.evaluate(q).profit; }

double schedule_spread(const Eigen::MatrixXd& schedules) {
  if (schedules.rows() < 1) throw std::invalid_argument("schedule_spread: no schedules");
  double sigma = 0.0;
  for (Eigen::Index t = 0; t < schedules.cols(); ++t) {
    const double mean = schedules.col(t).mean();
    const double var = (schedules.col(t).array() - mean).square().mean();
    sigma = std::max(sigma, std::sqrt(var));
  }
  return sigma;
}

double radius_update(double prev_rad, const Eigen::MatrixXd& schedules, double gamma) {
  if (schedules.rows() < 2) throw std::invalid_argument("radius_update: need at least two schedules");
  if (!(gamma > 0.0)) throw std::invalid_argument("radius_update: gamma must be > 0");
  return std::min(prev_rad, gamma * schedule_spread(schedules));
}

double IterationRecord::median_gap() const {
  std::vector<double> gaps;
  for (std::size_t n = 0; n < computed_profits.size(); ++n)
    gaps.push_back(std::abs(computed_profits[n] - actual_profits[n]));
  if (gaps.empty()) return 0.0;
  std::sort(gaps.begin(), gaps.end());
  const std::size_t mid = gaps.size() / 2;
  return gaps.size() % 2 ? gaps[mid] : 0.5 * (gaps[mid - 1] + gaps[mid]);
}

int choose_center(const IterationRecord& record) {
  if (record.actual_profits.empty()) throw std::invalid_argument("choose_center: empty record");
  int best = 0;
  for (int n = 1; n < static_cast<int>(record.actual_profits.size()); ++n)
    if (record.actual_profits[n] > record.actual_profits[best]) best = n;
  if (!record.mean_schedule.q.empty() && record.mean_actual_profit > record.actual_profits[best]) return -1;
  return best;
}

void SchemeConfig::validate() const {
  if (dataset_size < 5) throw std::invalid_argument("SchemeConfig: dataset_size must be >= 5");
  if (members < 1) throw std::invalid_argument("SchemeConfig: members must be >= 1");
  if (!(epsilon >= 0.0)) throw std::invalid_argument("SchemeConfig: epsilon must be >= 0");
  if (!(gamma > 0.0)) throw std::invalid_argument("SchemeConfig: gamma must be > 0");
  if (iterations_max < 1) throw std::invalid_argument("SchemeConfig: iterations_max must be >= 1");
  if (workers < 1) throw std::invalid_argument("SchemeConfig: workers must be >= 1");
  train.validate();
  maximizer.validate();
}

SampleBox initial_box(const StorageParams& p, double epsilon) {
  return SampleBox::uniform(p.horizon, 0.0, std::max(p.q_ch_max, p.q_dis_max), epsilon);
}

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::vector<SurrogateOptimum> maximize_members(const std::vector<TrainResult>& nets, const StorageParams& p,
                                               const SampleBox& box, const SurrogateMaxConfig& base, int iteration,
                                               std::uint64_t seed, int workers) {
  const int members = static_cast<int>(nets.size());
  std::vector<SurrogateOptimum> out(members);
  std::vector<std::exception_ptr> errors(members);
  auto work = [&](int first) {
    for (int n = first; n < members; n += workers) {
      try {
        SurrogateMaxConfig cfg = base;
        cfg.seed = derive_seed(seed, "maximize", static_cast<std::uint64_t>(iteration), static_cast<std::uint64_t>(n));
        out[n] = maximize_surrogate(nets[n].net, p, box, cfg);
      } catch (...) {
        errors[n] = std::current_exception();
      }
    }
  };
  const int nthreads = std::min(workers, members);
  if (nthreads <= 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < nthreads; ++w) pool.emplace_back(work, w);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

}  // namespace

RunResult run_scheme(const LowerLevelOracle& oracle, const StorageParams& p, const SchemeConfig& cfg,
                     const IterationObserver& observer) {
  cfg.validate();
  p.validate();
  const int h = p.horizon;
  if (oracle.horizon() != h) throw std::invalid_argument("run_scheme: oracle horizon differs from the asset");

  const ConvSurrogate architecture = build_default_architecture(h, cfg.architecture);
  RunResult result;
  result.best_profit = -std::numeric_limits<double>::infinity();
  SampleBox box = initial_box(p, cfg.epsilon);

  for (int i = 1; i <= cfg.iterations_max; ++i) {
    IterationRecord rec;
    rec.i = i;
    rec.box = box;
    const std::uint64_t it = static_cast<std::uint64_t>(i);

    auto clock = std::chrono::steady_clock::now();
    const LabeledDataset data = build_dataset(oracle, box, p, cfg.dataset_size, derive_seed(cfg.seed, "dataset", it),
                                              cfg.workers);
    rec.timings.dataset_seconds = seconds_since(clock);

    clock = std::chrono::steady_clock::now();
    TrainConfig tcfg = cfg.train;
    tcfg.seed = derive_seed(cfg.seed, "train", it);
    const std::vector<TrainResult> nets = train_ensemble(data, architecture, tcfg, cfg.members, cfg.workers);
    rec.timings.training_seconds = seconds_since(clock);
    for (const auto& n : nets) rec.best_valid_mse.push_back(n.report.best_valid_mse);

    clock = std::chrono::steady_clock::now();
    const auto optima = maximize_members(nets, p, box, cfg.maximizer, i, cfg.seed, cfg.workers);
    Eigen::MatrixXd qs(cfg.members, h);
    for (int n = 0; n < cfg.members; ++n) {
      rec.schedules.push_back(optima[n].schedule);
      rec.computed_profits.push_back(optima[n].computed_profit);
      for (int t = 0; t < h; ++t) qs(n, t) = optima[n].schedule[t];
    }
    rec.timings.solving_seconds = seconds_since(clock);
    const auto responses = batch_evaluate(oracle, rec.schedules, cfg.workers);
    for (const auto& r : responses) rec.actual_profits.push_back(r.profit);

    // The hourly mean of feasible schedules can overfill the store, so it is
    // repaired before verification.
    Schedule mean = Schedule::zeros(h);
    for (int t = 0; t < h; ++t) mean[t] = qs.col(t).mean();
    SampleBox tight = box;
    tight.epsilon = 0.0;
    try {
      rec.mean_schedule = repair_schedule(p, mean, &tight);
      rec.mean_actual_profit = verify_schedule(oracle, rec.mean_schedule);
    } catch (const InfeasibleBoxError&) {
      rec.mean_schedule = Schedule{};
      rec.mean_actual_profit = -std::numeric_limits<double>::infinity();
    }

    rec.sigma = schedule_spread(qs);
    rec.best_member = choose_center(rec);
    if (rec.best_member >= 0) {
      rec.best_schedule = rec.schedules[rec.best_member];
      rec.best_actual_profit = rec.actual_profits[rec.best_member];
    } else {
      rec.best_schedule = rec.mean_schedule;
      rec.best_actual_profit = rec.mean_actual_profit;
    }
    const double prev_rad = *std::max_element(box.rad.begin(), box.rad.end());
    rec.next_rad = std::min(prev_rad, cfg.gamma * rec.sigma);
    rec.next_cnt = rec.best_schedule;

    if (rec.best_actual_profit > result.best_profit) {
      result.best_profit = rec.best_actual_profit;
      result.best_schedule = rec.best_schedule;
      result.best_iteration = i;
    }
    const bool regressed = !result.records.empty() && rec.best_actual_profit <= result.records.back().best_actual_profit;
    result.records.push_back(rec);
    if (observer) observer(result.records.back(), nets);
    if (regressed) {
      result.stop_reason = "no improvement";
      return result;
    }
    box.cnt = rec.next_cnt.q;
    box.rad.assign(h, rec.next_rad);
  }
  result.stop_reason = "iteration limit";
  return result;
}

namespace {

std::ofstream open_csv(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}

std::string fmt(double v) {
  if (!std::isfinite(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_iterations_csv(const std::vector<IterationRecord>& records, const std::string& path) {
  auto out = open_csv(path);
  out << "iteration,mean_q_actual_profit,best_nn_actual_profit,best_nn_computed_profit,best_actual_profit,"
         "best_member,sigma,next_rad,median_gap\n";
  for (const auto& r : records) {
    const auto best_nn = std::max_element(r.actual_profits.begin(), r.actual_profits.end()) - r.actual_profits.begin();
    out << r.i << ',' << fmt(r.mean_actual_profit) << ',' << fmt(r.actual_profits[best_nn]) << ','
        << fmt(r.computed_profits[best_nn]) << ',' << fmt(r.best_actual_profit) << ','
        << (r.best_member < 0 ? std::string("mean") : std::to_string(r.best_member)) << ',' << fmt(r.sigma) << ','
        << fmt(r.next_rad) << ',' << fmt(r.median_gap()) << '\n';
  }
}

void write_radius_csv(const std::vector<IterationRecord>& records, const std::string& path) {
  auto out = open_csv(path);
  out << "iteration,rad\n";
  for (const auto& r : records) out << r.i << ',' << fmt(*std::max_element(r.box.rad.begin(), r.box.rad.end())) << '\n';
}

void write_members_csv(const std::vector<IterationRecord>& records, const std::string& path) {
  auto out = open_csv(path);
  out << "iteration,member,computed_profit,actual_profit,gap,best_valid_mse\n";
  for (const auto& r : records)
    for (std::size_t n = 0; n < r.actual_profits.size(); ++n)
      out << r.i << ',' << n << ',' << fmt(r.computed_profits[n]) << ',' << fmt(r.actual_profits[n]) << ','
          << fmt(std::abs(r.computed_profits[n] - r.actual_profits[n])) << ',' << fmt(r.best_valid_mse[n]) << '\n';
}

void write_timings_csv(const std::vector<IterationRecord>& records, const std::string& path) {
  auto out = open_csv(path);
  out << "iteration,dataset_seconds,training_seconds,solving_seconds,total_seconds\n";
  for (const auto& r : records) {
    const auto& t = r.timings;
    out << r.i << ',' << fmt(t.dataset_seconds) << ',' << fmt(t.training_seconds) << ',' << fmt(t.solving_seconds)
        << ',' << fmt(t.dataset_seconds + t.training_seconds + t.solving_seconds) << '\n';
  }
}

}  // namespace esmeta
