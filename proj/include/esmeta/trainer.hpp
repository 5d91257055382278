#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "esmeta/dataset.hpp"
#include "esmeta/surrogate.hpp"

namespace esmeta {

struct TrainConfig {
  int epochs = 500;
  double max_lr = 0.003;
  int batch_size = 128;
  double weight_decay = 0.01;
  double moment_decay_1 = 0.95;
  double moment_decay_2 = 0.85;
  double adam_epsilon = 1e-8;
  bool lookahead = true;
  int lookahead_sync_period = 6;
  double lookahead_blend = 0.5;
  double flat_fraction = 0.72;
  std::uint64_t seed = 0;

  void validate() const;
};

// Flat-cosine one-cycle schedule: max_lr for the first flat_fraction of the
// steps, then cosine annealing that reaches zero on the final step.
class FlatCosineSchedule {
 public:
  FlatCosineSchedule(double max_lr, long total_steps, double flat_fraction);
  double lr(long step) const;  // step is 0-based
  long total_steps() const { return total_; }
  long flat_steps() const { return flat_; }

 private:
  double max_lr_;
  long total_;
  long flat_;
};

// Rectified Adam with decoupled weight decay, wrapped in lookahead.
class RangerOptimizer {
 public:
  RangerOptimizer(const Eigen::VectorXd& initial, const TrainConfig& cfg);

  // One update of `params` in place. The weight decay factor is applied as
  // params *= 1 - lr * weight_decay before the adaptive step.
  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, double lr);

  long steps() const { return t_; }
  // Variance rectification term for step t (1-based); 0 while the
  // approximated SMA length is <= 4 and the update is momentum-only.
  static double rectification(long t, double beta2);

 private:
  double beta1_, beta2_, eps_, weight_decay_;
  bool lookahead_;
  int sync_period_;
  double blend_;
  long t_ = 0;
  double beta1_pow_ = 1.0;
  double beta2_pow_ = 1.0;
  Eigen::VectorXd m_, v_, slow_;
};

struct TrainReport {
  std::vector<double> train_mse;  // standardized target units
  std::vector<double> valid_mse;
  int best_epoch = -1;            // 0-based
  double best_valid_mse = 0.0;
  double final_valid_mse = 0.0;
  std::string checkpoint;

  void write_csv(const std::string& path) const;
};

struct TrainResult {
  ConvSurrogate net;  // best-validation snapshot
  TrainReport report;
};

// Mini-batch training on standardized targets (normalization taken from
// train_set). The validation split only scores each epoch. Throws
// DivergenceError if the training loss becomes non-finite.
TrainResult train(ConvSurrogate net, const LabeledDataset& train_set, const LabeledDataset& valid_set,
                  const TrainConfig& cfg);

// Mean squared error of the standardized core on a dataset.
double standardized_mse(const ConvSurrogate& net, const LabeledDataset& d);

// M members with seeds cfg.seed + m, each initialized from `architecture`
// via init_params(seed) and trained on the same split (dataset.seed).
std::vector<TrainResult> train_ensemble(const LabeledDataset& dataset, const ConvSurrogate& architecture,
                                        const TrainConfig& cfg, int members, int workers = 1);

}  // namespace esmeta
