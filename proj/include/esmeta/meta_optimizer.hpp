#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "esmeta/oracle.hpp"
#include "esmeta/sample_box.hpp"
#include "esmeta/storage.hpp"
#include "esmeta/surrogate.hpp"
#include "esmeta/trainer.hpp"

namespace esmeta {

struct SurrogateMaxConfig {
  int starts = 20;
  int steps = 500;
  double step_size = 0.05;       // initial ascent step relative to the box width in energy terms
  double penalty_weight = 100.0; // per (p.u.·h)^2 of hourly limit violation
  std::uint64_t seed = 0;

  void validate() const;
};

struct SurrogateOptimum {
  Schedule schedule;
  double computed_profit = 0.0;
  int start = -1;  // winning start, -1 for the center fallback
  int failed_starts = 0;
};

// Multi-start projected Adam ascent on F̂ over the SoE trajectory, with the
// power and box limits penalized quadratically, followed by repair_schedule. Start k draws its initial point from
// derive_seed(cfg.seed, "start", k), so the first k starts do not depend on
// cfg.starts. Each start runs as its own batch of one.
SurrogateOptimum maximize_surrogate(const ConvSurrogate& net, const StorageParams& p, const SampleBox& box,
                                    const SurrogateMaxConfig& cfg);

double verify_schedule(const LowerLevelOracle& oracle, const Schedule& q);

// Population std over rows, maximized over hours.
double schedule_spread(const Eigen::MatrixXd& schedules);
double radius_update(double prev_rad, const Eigen::MatrixXd& schedules, double gamma);

struct IterationTimings {
  double dataset_seconds = 0.0;
  double training_seconds = 0.0;
  double solving_seconds = 0.0;
};

struct IterationRecord {
  int i = 0;  // 1-based
  SampleBox box;
  std::vector<Schedule> schedules;       // q*_{i,n}
  std::vector<double> computed_profits;  // C_{i,n}
  std::vector<double> actual_profits;    // V_{i,n}
  std::vector<double> best_valid_mse;    // per member
  Schedule mean_schedule;                // repaired mean of q*_{i,n}
  double mean_actual_profit = 0.0;       // V̄_i
  double sigma = 0.0;
  Schedule best_schedule;
  double best_actual_profit = 0.0;
  int best_member = -1;                  // -1 when the mean schedule wins
  Schedule next_cnt;
  double next_rad = 0.0;
  IterationTimings timings;

  double median_gap() const;  // median |C - V|
};

// Center for the next iteration: the schedule with the highest verified
// profit among the members, ties to the lowest index, the mean last.
// Returns the member index or -1 for the mean.
int choose_center(const IterationRecord& record);

struct SchemeConfig {
  int dataset_size = 2000;
  int members = 4;
  TrainConfig train;
  ArchitectureOptions architecture;
  SurrogateMaxConfig maximizer;
  double epsilon = 0.1;
  double gamma = 5.0;
  int iterations_max = 20;
  int workers = 1;
  std::uint64_t seed = 0;

  void validate() const;
};

struct RunResult {
  std::vector<IterationRecord> records;
  Schedule best_schedule;
  double best_profit = 0.0;
  int best_iteration = 0;
  std::string stop_reason;
};

// Called after each iteration with the record and the trained members.
using IterationObserver = std::function<void(const IterationRecord&, const std::vector<TrainResult>&)>;

// Seeds: iteration i uses derive_seed(seed, "dataset", i) for sampling,
// derive_seed(seed, "train", i) + n for member n, and
// derive_seed(seed, "maximize", i, n) for its multi-start.
RunResult run_scheme(const LowerLevelOracle& oracle, const StorageParams& p, const SchemeConfig& cfg,
                     const IterationObserver& observer = {});

SampleBox initial_box(const StorageParams& p, double epsilon);

void write_iterations_csv(const std::vector<IterationRecord>& records, const std::string& path);
void write_radius_csv(const std::vector<IterationRecord>& records, const std::string& path);
void write_members_csv(const std::vector<IterationRecord>& records, const std::string& path);
void write_timings_csv(const std::vector<IterationRecord>& records, const std::string& path);

}  // namespace esmeta
