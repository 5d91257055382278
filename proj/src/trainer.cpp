#include "esmeta/trainer.hpp"

#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <numbers>
#include <optional>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "esmeta/errors.hpp"
#include "esmeta/rng.hpp"

namespace esmeta {

void TrainConfig::validate() const {
  auto fail = [](const char* what) { throw std::invalid_argument(std::string("TrainConfig: ") + what); };
  if (epochs < 1) fail("epochs must be >= 1");
  if (!(max_lr > 0.0)) fail("max_lr must be > 0");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (!(weight_decay >= 0.0)) fail("weight_decay must be >= 0");
  if (!(moment_decay_1 > 0.0 && moment_decay_1 < 1.0)) fail("moment_decay_1 must lie in (0, 1)");
  if (!(moment_decay_2 > 0.0 && moment_decay_2 < 1.0)) fail("moment_decay_2 must lie in (0, 1)");
  if (lookahead_sync_period < 1) fail("lookahead_sync_period must be >= 1");
  if (!(lookahead_blend > 0.0 && lookahead_blend <= 1.0)) fail("lookahead_blend must lie in (0, 1]");
  if (!(flat_fraction >= 0.0 && flat_fraction <= 1.0)) fail("flat_fraction must lie in [0, 1]");
}

FlatCosineSchedule::FlatCosineSchedule(double max_lr, long total_steps, double flat_fraction)
    : max_lr_(max_lr), total_(total_steps), flat_(static_cast<long>(std::floor(flat_fraction * total_steps))) {
  if (total_steps < 1) throw std::invalid_argument("FlatCosineSchedule: need at least one step");
}

double FlatCosineSchedule::lr(long step) const {
  if (step < flat_) return max_lr_;
  const long anneal = total_ - flat_;
  const double p = std::min(1.0, static_cast<double>(step - flat_ + 1) / static_cast<double>(anneal));
  return max_lr_ * 0.5 * (1.0 + std::cos(std::numbers::pi * p));
}

RangerOptimizer::RangerOptimizer(const Eigen::VectorXd& initial, const TrainConfig& cfg)
    : beta1_(cfg.moment_decay_1),
      beta2_(cfg.moment_decay_2),
      eps_(cfg.adam_epsilon),
      weight_decay_(cfg.weight_decay),
      lookahead_(cfg.lookahead),
      sync_period_(cfg.lookahead_sync_period),
      blend_(cfg.lookahead_blend),
      m_(Eigen::VectorXd::Zero(initial.size())),
      v_(Eigen::VectorXd::Zero(initial.size())),
      slow_(initial) {}

double RangerOptimizer::rectification(long t, double beta2) {
  const double rho_inf = 2.0 / (1.0 - beta2) - 1.0;
  const double b2t = std::pow(beta2, static_cast<double>(t));
  const double rho_t = rho_inf - 2.0 * static_cast<double>(t) * b2t / (1.0 - b2t);
  if (rho_t <= 4.0) return 0.0;
  return std::sqrt((rho_t - 4.0) * (rho_t - 2.0) * rho_inf / ((rho_inf - 4.0) * (rho_inf - 2.0) * rho_t));
}

void RangerOptimizer::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, double lr) {
  ++t_;
  beta1_pow_ *= beta1_;
  beta2_pow_ *= beta2_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseAbs2();

  if (weight_decay_ > 0.0) params *= 1.0 - lr * weight_decay_;

  const double bias1 = 1.0 - beta1_pow_;
  const double r = rectification(t_, beta2_);
  if (r > 0.0) {
    const double bias2 = 1.0 - beta2_pow_;
    const double step_size = lr * r / bias1;
    params.array() -= step_size * m_.array() / ((v_.array() / bias2).sqrt() + eps_);
  } else {
    params -= (lr / bias1) * m_;
  }

  if (lookahead_ && t_ % sync_period_ == 0) {
    slow_ += blend_ * (params - slow_);
    params = slow_;
  }
}

void TrainReport::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write train report " + path);
  out.precision(17);
  out << "epoch,train_mse,valid_mse,best\n";
  for (std::size_t e = 0; e < train_mse.size(); ++e)
    out << e << ',' << train_mse[e] << ',' << valid_mse[e] << ','
        << (static_cast<int>(e) == best_epoch ? 1 : 0) << '\n';
}

namespace {

void standardize(const LabeledDataset& d, const Normalization& n, Eigen::MatrixXd& x, std::vector<double>& y) {
  x = d.inputs / n.input_scale;
  y.resize(d.targets.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = (d.targets[i] - n.target_mean) / n.target_std;
}

double mse_on(const ConvSurrogate& net, const Eigen::MatrixXd& x, const std::vector<double>& y,
              ConvSurrogate::Workspace& ws) {
  const Eigen::Index chunk = 512;
  double sum = 0.0;
  for (Eigen::Index start = 0; start < x.rows(); start += chunk) {
    const Eigen::Index len = std::min(chunk, x.rows() - start);
    const Eigen::VectorXd out = net.core_forward(x.middleRows(start, len), ws);
    for (Eigen::Index i = 0; i < len; ++i) {
      const double r = out[i] - y[start + i];
      sum += r * r;
    }
  }
  return sum / static_cast<double>(x.rows());
}

}  // namespace

double standardized_mse(const ConvSurrogate& net, const LabeledDataset& d) {
  Eigen::MatrixXd x;
  std::vector<double> y;
  standardize(d, net.normalization, x, y);
  ConvSurrogate::Workspace ws;
  return mse_on(net, x, y, ws);
}

TrainResult train(ConvSurrogate net, const LabeledDataset& train_set, const LabeledDataset& valid_set,
                  const TrainConfig& cfg) {
  cfg.validate();
  if (train_set.size() == 0 || valid_set.size() == 0) throw std::invalid_argument("train: empty split");
  if (train_set.horizon() != net.input_length() || valid_set.horizon() != net.input_length())
    throw ShapeMismatchError("train: dataset horizon differs from network input length");

  net.normalization = train_set.normalization;
  Eigen::MatrixXd x_train, x_valid;
  std::vector<double> y_train, y_valid;
  standardize(train_set, net.normalization, x_train, y_train);
  standardize(valid_set, net.normalization, x_valid, y_valid);

  const int n = train_set.size();
  const int batch = std::min(cfg.batch_size, n);
  const long steps_per_epoch = (n + batch - 1) / batch;
  const FlatCosineSchedule schedule(cfg.max_lr, steps_per_epoch * cfg.epochs, cfg.flat_fraction);
  RangerOptimizer opt(net.params(), cfg);
  Rng shuffle_rng(derive_seed(cfg.seed, "shuffle"));

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  ConvSurrogate::Workspace ws;
  Eigen::MatrixXd xb;
  std::vector<double> yb;
  Eigen::VectorXd grad;

  TrainResult result{net, {}};
  result.report.best_valid_mse = std::numeric_limits<double>::infinity();
  long step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    for (int start = 0; start < n; start += batch) {
      const int len = std::min(batch, n - start);
      xb.resize(len, x_train.cols());
      yb.resize(len);
      for (int i = 0; i < len; ++i) {
        xb.row(i) = x_train.row(order[start + i]);
        yb[i] = y_train[order[start + i]];
      }
      const double loss = net.core_loss_and_grad(xb, yb, grad, ws);
      if (!std::isfinite(loss) || !grad.allFinite())
        throw DivergenceError(epoch, step, "training loss became non-finite at epoch " + std::to_string(epoch));
      epoch_loss += loss * len;
      opt.step(net.params(), grad, schedule.lr(step));
      ++step;
    }
    const double valid = mse_on(net, x_valid, y_valid, ws);
    if (!std::isfinite(valid))
      throw DivergenceError(epoch, step, "validation loss became non-finite at epoch " + std::to_string(epoch));
    result.report.train_mse.push_back(epoch_loss / n);
    result.report.valid_mse.push_back(valid);
    if (valid < result.report.best_valid_mse) {
      result.report.best_valid_mse = valid;
      result.report.best_epoch = epoch;
      result.net.params() = net.params();
    }
  }
  result.net.normalization = net.normalization;
  result.report.final_valid_mse = result.report.valid_mse.back();
  return result;
}

std::vector<TrainResult> train_ensemble(const LabeledDataset& dataset, const ConvSurrogate& architecture,
                                        const TrainConfig& cfg, int members, int workers) {
  if (members < 1) throw std::invalid_argument("train_ensemble: members must be >= 1");
  if (workers < 1) throw std::invalid_argument("train_ensemble: workers must be >= 1");
  const auto [train_set, valid_set] = split_dataset(dataset, dataset.seed);

  std::vector<std::optional<TrainResult>> slots(members);
  std::vector<std::exception_ptr> errors(members);
  auto work = [&](int first) {
    for (int m = first; m < members; m += workers) {
      try {
        TrainConfig member_cfg = cfg;
        member_cfg.seed = cfg.seed + static_cast<std::uint64_t>(m);
        ConvSurrogate net = architecture;
        net.init_params(member_cfg.seed);
        slots[m] = train(std::move(net), train_set, valid_set, member_cfg);
      } catch (...) {
        errors[m] = std::current_exception();
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
  std::vector<TrainResult> out;
  out.reserve(members);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

}  // namespace esmeta
