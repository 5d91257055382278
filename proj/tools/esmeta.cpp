// esmeta: command-line driver for the storage bidding meta-optimization.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "CLI11.hpp"
#include "json.hpp"

#include "esmeta/baseline.hpp"
#include "esmeta/config.hpp"
#include "esmeta/dataset.hpp"
#include "esmeta/errors.hpp"
#include "esmeta/meta_optimizer.hpp"
#include "esmeta/rng.hpp"
#include "esmeta/surrogate.hpp"
#include "esmeta/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace esmeta;

namespace {

constexpr const char* kVersion = "0.1.0";

struct Overrides {
  std::string config;
  std::uint64_t seed = 0;
  bool has_seed = false;
  int workers = 0;
  std::string out;
  int iterations_max = 0;
};

RunConfig resolve(const Overrides& o) {
  RunConfig cfg = load_run_config(o.config);
  if (o.has_seed) cfg.scheme.seed = o.seed;
  if (o.workers > 0) cfg.scheme.workers = o.workers;
  if (!o.out.empty()) cfg.output_dir = o.out;
  if (o.iterations_max > 0) cfg.scheme.iterations_max = o.iterations_max;
  refresh_resolved(cfg);
  return cfg;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

void write_manifest(const RunConfig& cfg, const fs::path& dir, const std::string& command) {
  json identity = cfg.resolved;
  identity.erase("output_dir");
  const std::string canonical = identity.dump();
  json m;
  m["tool"] = "esmeta";
  m["version"] = kVersion;
  m["command"] = command;
  m["config_hash"] = hex64(fnv1a(canonical));
  m["seed"] = cfg.scheme.seed;
  m["oracle"] = oracle_kind_name(cfg.oracle.kind);
  m["versions"] = {{"compiler", __VERSION__},
                   {"cxx_standard", __cplusplus},
                   {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                 std::to_string(EIGEN_MINOR_VERSION)},
                   {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                         std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                         std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
                   {"cli11", CLI11_VERSION}};
  write_text(dir / "manifest.json", m.dump(2) + "\n");
  write_text(dir / "config.json", cfg.resolved.dump(2) + "\n");
}

std::string member_stem(int iteration, int member) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "iter_%02d_member_%02d", iteration, member);
  return buf;
}

void write_schedules_csv(const std::vector<IterationRecord>& records, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const int h = records.empty() ? 0 : records.front().box.horizon();
  out << "iteration,source";
  for (int t = 1; t <= h; ++t) out << ",q_" << t;
  out << '\n';
  auto row = [&](int i, const std::string& source, const Schedule& s) {
    if (s.q.empty()) return;
    out << i << ',' << source;
    for (double q : s.q) out << ',' << num(q);
    out << '\n';
  };
  for (const auto& r : records) {
    for (std::size_t n = 0; n < r.schedules.size(); ++n) row(r.i, std::to_string(n), r.schedules[n]);
    row(r.i, "mean", r.mean_schedule);
  }
}

Schedule read_schedule(const std::string& path, int horizon) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open schedule " + path);
  std::string line, last;
  long lineno = 0, last_no = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    last = line;
    last_no = lineno;
  }
  if (last.empty()) throw MalformedFileError(path, 0, "no schedule row");
  std::vector<double> q;
  std::stringstream ss(last);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      std::size_t used = 0;
      q.push_back(std::stod(cell, &used));
      if (cell.find_first_not_of(" \t\r", used) != std::string::npos) throw std::invalid_argument(cell);
    } catch (const std::exception&) {
      throw MalformedFileError(path, last_no, "field '" + cell + "' is not a number");
    }
  }
  if (static_cast<int>(q.size()) == horizon + 1) q.pop_back();  // trailing profit column
  if (static_cast<int>(q.size()) != horizon)
    throw MalformedFileError(path, last_no,
                             "expected " + std::to_string(horizon) + " values, got " + std::to_string(q.size()));
  return Schedule(std::move(q));
}

void write_schedule_csv(const Schedule& s, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (int t = 1; t <= s.size(); ++t) out << (t > 1 ? "," : "") << "q_" << t;
  out << '\n';
  for (int t = 0; t < s.size(); ++t) out << (t > 0 ? "," : "") << num(s[t]);
  out << '\n';
}

int cmd_run(const Overrides& o) {
  const RunConfig cfg = resolve(o);
  const fs::path dir = cfg.output_dir;
  fs::create_directories(dir / "checkpoints");
  fs::create_directories(dir / "train");
  write_manifest(cfg, dir, "run");

  const auto oracle = make_oracle(cfg.oracle, cfg.storage.horizon);
  std::vector<IterationRecord> done;
  auto observer = [&](const IterationRecord& rec, const std::vector<TrainResult>& nets) {
    for (std::size_t n = 0; n < nets.size(); ++n) {
      const std::string stem = member_stem(rec.i, static_cast<int>(n));
      save_model(nets[n].net, (dir / "checkpoints" / (stem + ".json")).string());
      nets[n].report.write_csv((dir / "train" / (stem + ".csv")).string());
    }
    done.push_back(rec);
    write_iterations_csv(done, (dir / "iterations.csv").string());
    write_radius_csv(done, (dir / "radius.csv").string());
    write_members_csv(done, (dir / "members.csv").string());
    write_timings_csv(done, (dir / "timings.csv").string());
    write_schedules_csv(done, dir / "schedules.csv");
    const auto& t = rec.timings;
    std::fprintf(stderr, "iteration %d: rad %.6g best %.6f (mean %.6f) sigma %.6g  [%.1fs data, %.1fs train, %.1fs solve]\n",
                 rec.i, rec.box.rad.empty() ? 0.0 : rec.box.rad[0], rec.best_actual_profit, rec.mean_actual_profit,
                 rec.sigma, t.dataset_seconds, t.training_seconds, t.solving_seconds);
  };
  const RunResult result = run_scheme(*oracle, cfg.storage, cfg.scheme, observer);

  const auto linear = make_linear_oracle(*oracle);
  const BaselineResult base = run_baseline(*oracle, *linear, cfg.storage);
  const PriceTakerOptimum lp = solve_price_taker(cfg.storage, linear->evaluate(Schedule::zeros(cfg.storage.horizon)).lambda);

  json s;
  s["oracle"] = oracle_kind_name(cfg.oracle.kind);
  s["seed"] = cfg.scheme.seed;
  s["iterations"] = result.records.size();
  s["stop_reason"] = result.stop_reason;
  s["best_iteration"] = result.best_iteration;
  s["best_profit"] = result.best_profit;
  s["best_schedule"] = result.best_schedule.q;
  s["radius_trace"] = json::array();
  for (const auto& r : result.records) s["radius_trace"].push_back(r.box.rad.empty() ? 0.0 : r.box.rad[0]);
  s["baseline"] = {{"profit_on_linear", base.profit_on_linear},
                   {"profit_on_true", base.profit_on_true},
                   {"degenerate", base.degenerate},
                   {"schedule", base.schedule_linear.q},
                   {"margin", result.best_profit - base.profit_on_true}};
  s["linear_optimum"] = lp.profit;
  write_text(dir / "summary.json", s.dump(2) + "\n");

  std::printf("best verified profit %.6f (iteration %d of %zu, %s)\n", result.best_profit, result.best_iteration,
              result.records.size(), result.stop_reason.c_str());
  std::printf("baseline verified profit %.6f (margin %+.6f)\n", base.profit_on_true,
              result.best_profit - base.profit_on_true);
  std::printf("outputs in %s\n", dir.string().c_str());
  return 0;
}

int cmd_gen_dataset(const Overrides& o, const std::string& out_path) {
  const RunConfig cfg = resolve(o);
  const auto oracle = make_oracle(cfg.oracle, cfg.storage.horizon);
  const SampleBox box = initial_box(cfg.storage, cfg.scheme.epsilon);
  const LabeledDataset d = build_dataset(*oracle, box, cfg.storage, cfg.scheme.dataset_size,
                                         derive_seed(cfg.scheme.seed, "dataset", 1), cfg.scheme.workers);
  const fs::path parent = fs::path(out_path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
  save_dataset(d, out_path);
  std::printf("wrote %d rows to %s (checksum %s)\n", d.size(), out_path.c_str(), hex64(d.checksum()).c_str());
  return 0;
}

int cmd_train_one(const Overrides& o, const std::string& dataset_path, int member) {
  const RunConfig cfg = resolve(o);
  if (member < 0 || member >= cfg.scheme.members) throw ConfigError("--member", "outside the configured ensemble");
  const LabeledDataset d = load_dataset(dataset_path);
  if (d.horizon() != cfg.storage.horizon) throw ConfigError("storage.horizon", "differs from the dataset horizon");
  const fs::path dir = cfg.output_dir;
  fs::create_directories(dir);

  TrainConfig tc = cfg.scheme.train;
  tc.seed = derive_seed(cfg.scheme.seed, "train", 1) + static_cast<std::uint64_t>(member);
  ConvSurrogate net = build_default_architecture(cfg.storage.horizon, cfg.scheme.architecture);
  net.init_params(tc.seed);
  const auto [train_set, valid_set] = split_dataset(d, d.seed);
  const TrainResult r = train(std::move(net), train_set, valid_set, tc);
  const std::string stem = member_stem(1, member);
  save_model(r.net, (dir / (stem + ".json")).string());
  r.report.write_csv((dir / (stem + ".csv")).string());

  SurrogateMaxConfig mc = cfg.scheme.maximizer;
  mc.seed = derive_seed(cfg.scheme.seed, "maximize", 1, static_cast<std::uint64_t>(member));
  const SurrogateOptimum opt = maximize_surrogate(r.net, cfg.storage, d.box, mc);
  write_schedule_csv(opt.schedule, dir / (stem + "_schedule.csv"));

  std::printf("best_valid_mse %s at epoch %d\n", num(r.report.best_valid_mse).c_str(), r.report.best_epoch);
  std::printf("computed_profit %s\n", num(opt.computed_profit).c_str());
  std::printf("schedule written to %s\n", (dir / (stem + "_schedule.csv")).string().c_str());
  return 0;
}

int cmd_verify(const Overrides& o, const std::string& schedule_path) {
  const RunConfig cfg = resolve(o);
  const auto oracle = make_oracle(cfg.oracle, cfg.storage.horizon);
  const Schedule q = read_schedule(schedule_path, cfg.storage.horizon);
  const OracleResponse r = oracle->evaluate(q);
  const auto feas = check_feasible(cfg.storage, q);
  std::printf("%4s %12s %12s %12s %s\n", "hour", "q", "lambda", "-q*lambda", "status");
  for (int t = 0; t < q.size(); ++t) {
    const bool cleared = r.per_hour_status[t] == HourStatus::Cleared;
    std::printf("%4d %12.6f %12.6f %12.6f %s\n", t + 1, q[t], r.lambda[t], cleared ? -q[t] * r.lambda[t] : 0.0,
                cleared ? "cleared" : "infeasible");
  }
  if (r.penalty != 0.0) std::printf("penalty %s\n", num(r.penalty).c_str());
  std::printf("total %s\n", num(r.profit).c_str());
  if (!feas.feasible) std::printf("note: schedule violates storage limits (max violation %.3g)\n", feas.max_violation());
  return 0;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

int cmd_report(const std::string& dir_arg) {
  const fs::path dir = dir_arg;
  const auto it = read_csv(dir / "iterations.csv");
  std::vector<std::vector<std::string>> times;
  if (fs::exists(dir / "timings.csv")) times = read_csv(dir / "timings.csv");
  std::printf("%9s %10s %16s %16s %18s %10s\n", "iteration", "time_s", "mean_q_actual", "best_nn_actual",
              "best_nn_computed", "rad_next");
  for (std::size_t k = 1; k < it.size(); ++k) {
    const auto& r = it[k];
    const std::string total = k < times.size() && times[k].size() > 4 ? times[k][4] : "";
    std::printf("%9s %10.1f %16s %16s %18s %10s\n", r[0].c_str(), total.empty() ? 0.0 : std::stod(total),
                r[1].c_str(), r[2].c_str(), r[3].c_str(), r[7].c_str());
  }
  if (fs::exists(dir / "summary.json")) {
    std::ifstream in(dir / "summary.json");
    const json s = json::parse(in);
    std::printf("best verified profit %s (iteration %d, %s)\n", num(s.at("best_profit").get<double>()).c_str(),
                s.at("best_iteration").get<int>(), s.at("stop_reason").get<std::string>().c_str());
    const double base = s.at("baseline").at("profit_on_true").get<double>();
    std::printf("baseline verified profit %s, margin %s\n", num(base).c_str(),
                num(s.at("baseline").at("margin").get<double>()).c_str());
  }
  return 0;
}

void add_common(CLI::App* cmd, Overrides& o, bool with_out = true) {
  cmd->add_option("--config", o.config, "run configuration (JSON)")->required();
  cmd->add_option_function<std::uint64_t>(
      "--seed", [&o](const std::uint64_t& s) { o.seed = s, o.has_seed = true; }, "root seed");
  cmd->add_option("--workers", o.workers, "worker threads")->check(CLI::PositiveNumber);
  if (with_out) cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--iterations-max", o.iterations_max, "iteration limit")->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Evolutionary meta-modeling for energy-storage bidding"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  Overrides o;
  std::string dataset_out, dataset_in, schedule_in, report_dir;
  int member = 0;

  auto* run = app.add_subcommand("run", "run the full iterative scheme");
  add_common(run, o);
  auto* gen = app.add_subcommand("gen-dataset", "sample and label the first-iteration dataset");
  add_common(gen, o, false);
  gen->add_option("--out", dataset_out, "dataset CSV path")->required();
  auto* train_one = app.add_subcommand("train-one", "train one ensemble member on a saved dataset");
  add_common(train_one, o);
  train_one->add_option("--dataset", dataset_in, "dataset CSV")->required();
  train_one->add_option("--member", member, "member index");
  auto* verify = app.add_subcommand("verify", "evaluate a schedule on the configured oracle");
  add_common(verify, o, false);
  verify->add_option("--schedule", schedule_in, "schedule CSV (last row is used)")->required();
  auto* report = app.add_subcommand("report", "print the iteration table of a finished run");
  report->add_option("--out", report_dir, "run output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*run) return cmd_run(o);
    if (*gen) return cmd_gen_dataset(o, dataset_out);
    if (*train_one) return cmd_train_one(o, dataset_in, member);
    if (*verify) return cmd_verify(o, schedule_in);
    if (*report) return cmd_report(report_dir);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 1;
}
