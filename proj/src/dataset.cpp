#include "esmeta/dataset.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "esmeta/errors.hpp"
#include "esmeta/rng.hpp"

namespace esmeta {

Schedule LabeledDataset::schedule(int row) const {
  std::vector<double> q(inputs.cols());
  for (Eigen::Index t = 0; t < inputs.cols(); ++t) q[t] = inputs(row, t);
  return Schedule(std::move(q));
}

LabeledDataset LabeledDataset::subset(const std::vector<int>& rows) const {
  LabeledDataset out;
  out.inputs.resize(static_cast<Eigen::Index>(rows.size()), inputs.cols());
  out.targets.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.inputs.row(static_cast<Eigen::Index>(i)) = inputs.row(rows[i]);
    out.targets[i] = targets[rows[i]];
  }
  out.box = box;
  out.seed = seed;
  out.normalization = normalization;
  return out;
}

std::uint64_t LabeledDataset::checksum() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](double v) {
    unsigned char bytes[sizeof(double)];
    std::memcpy(bytes, &v, sizeof(double));
    for (unsigned char b : bytes) {
      h ^= b;
      h *= 0x100000001b3ULL;
    }
  };
  for (Eigen::Index r = 0; r < inputs.rows(); ++r)
    for (Eigen::Index c = 0; c < inputs.cols(); ++c) mix(inputs(r, c));
  for (double t : targets) mix(t);
  return h;
}

Eigen::MatrixXd sample_box(const SampleBox& box, const StorageParams& p, int n, std::uint64_t seed) {
  box.validate();
  if (n < 1) throw std::invalid_argument("sample_box: n must be >= 1");
  const int h = box.horizon();
  std::vector<SampleBox::Interval> iv(h);
  for (int t = 0; t < h; ++t) iv[t] = box.effective_interval(p, t);

  Rng rng(derive_seed(seed, "sample"));
  Eigen::MatrixXd out(n, h);
  for (int r = 0; r < n; ++r)
    for (int t = 0; t < h; ++t) out(r, t) = uniform(rng, iv[t].lo, iv[t].hi);
  return out;
}

SplitIndices split_indices(int n, std::uint64_t seed) {
  if (n < 5) throw std::invalid_argument("split_dataset: need at least 5 rows");
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(derive_seed(seed, "split"));
  shuffle(perm.begin(), perm.end(), rng);
  const int n_train = static_cast<int>((8LL * n + 9) / 10);
  SplitIndices out;
  out.train.assign(perm.begin(), perm.begin() + n_train);
  out.valid.assign(perm.begin() + n_train, perm.end());
  return out;
}

std::pair<LabeledDataset, LabeledDataset> split_dataset(const LabeledDataset& d, std::uint64_t seed) {
  const SplitIndices idx = split_indices(d.size(), seed);
  return {d.subset(idx.train), d.subset(idx.valid)};
}

Normalization compute_normalization(const LabeledDataset& d, const StorageParams& p,
                                    const std::vector<int>& train_rows) {
  Normalization n;
  n.input_scale = std::max(p.q_ch_max, p.q_dis_max);
  double mean = 0.0;
  for (int r : train_rows) mean += d.targets[r];
  mean /= static_cast<double>(train_rows.size());
  double var = 0.0;
  for (int r : train_rows) var += (d.targets[r] - mean) * (d.targets[r] - mean);
  var /= static_cast<double>(train_rows.size());
  n.target_mean = mean;
  // Spread at rounding level counts as a constant target.
  const double sd = std::sqrt(var);
  n.target_std = sd > 1e-12 * std::max(1.0, std::abs(mean)) ? sd : 1.0;
  return n;
}

LabeledDataset build_dataset(const LowerLevelOracle& oracle, const SampleBox& box,
                             const StorageParams& p, int n, std::uint64_t seed, int workers) {
  if (oracle.horizon() != box.horizon())
    throw std::invalid_argument("build_dataset: oracle and box horizons differ");
  LabeledDataset d;
  d.inputs = sample_box(box, p, n, seed);
  d.box = box;
  d.seed = seed;

  std::vector<Schedule> schedules;
  schedules.reserve(n);
  for (int r = 0; r < n; ++r) schedules.push_back(d.schedule(r));
  const auto responses = batch_evaluate(oracle, schedules, workers);
  d.targets.resize(n);
  for (int r = 0; r < n; ++r) d.targets[r] = responses[r].profit;

  if (n >= 5) {
    d.normalization = compute_normalization(d, p, split_indices(n, seed).train);
  } else {
    std::vector<int> all(n);
    std::iota(all.begin(), all.end(), 0);
    d.normalization = compute_normalization(d, p, all);
  }
  return d;
}

std::string dataset_meta_path(const std::string& csv_path) { return csv_path + ".meta.json"; }

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

void save_dataset(const LabeledDataset& d, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write dataset " + path);
  const int h = d.horizon();
  for (int t = 0; t < h; ++t) out << "q_" << (t + 1) << ',';
  out << "profit\n";
  for (int r = 0; r < d.size(); ++r) {
    for (int t = 0; t < h; ++t) out << format_double(d.inputs(r, t)) << ',';
    out << format_double(d.targets[r]) << '\n';
  }
  if (!out) throw std::runtime_error("write failed for dataset " + path);

  nlohmann::json meta;
  meta["format"] = "esmeta-dataset";
  meta["version"] = 1;
  meta["horizon"] = h;
  meta["rows"] = d.size();
  meta["seed"] = d.seed;
  meta["box"] = {{"cnt", d.box.cnt}, {"rad", d.box.rad}, {"epsilon", d.box.epsilon}};
  meta["normalization"] = {{"input_scale", d.normalization.input_scale},
                           {"target_mean", d.normalization.target_mean},
                           {"target_std", d.normalization.target_std}};
  meta["checksum"] = hex64(d.checksum());
  std::ofstream mo(dataset_meta_path(path));
  if (!mo) throw std::runtime_error("cannot write dataset metadata for " + path);
  mo << meta.dump(2) << '\n';
}

LabeledDataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset " + path);

  std::string line;
  long lineno = 1;
  if (!std::getline(in, line)) throw MalformedFileError(path, lineno, "missing header");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  if (header.size() < 2 || header.back() != "profit")
    throw MalformedFileError(path, lineno, "header must end with 'profit'");
  const int h = static_cast<int>(header.size()) - 1;
  for (int t = 0; t < h; ++t)
    if (header[t] != "q_" + std::to_string(t + 1))
      throw MalformedFileError(path, lineno, "header field " + std::to_string(t + 1) +
                                                 " should be q_" + std::to_string(t + 1));

  std::vector<double> values;
  long rows = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::size_t start = 0;
    int field = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      const std::string cell = line.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
      ++field;
      if (field > h + 1)
        throw MalformedFileError(path, lineno, "expected " + std::to_string(h + 1) + " columns");
      errno = 0;
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (cell.empty() || end != cell.c_str() + cell.size() || errno == ERANGE)
        throw MalformedFileError(path, lineno, "field " + std::to_string(field) + " is not a number: '" + cell + "'");
      values.push_back(v);
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (field != h + 1)
      throw MalformedFileError(path, lineno, "expected " + std::to_string(h + 1) + " columns, got " +
                                                 std::to_string(field));
    ++rows;
  }

  LabeledDataset d;
  d.inputs.resize(rows, h);
  d.targets.resize(rows);
  for (long r = 0; r < rows; ++r) {
    for (int t = 0; t < h; ++t) d.inputs(r, t) = values[r * (h + 1) + t];
    d.targets[r] = values[r * (h + 1) + h];
  }

  const std::string meta_path = dataset_meta_path(path);
  std::ifstream mi(meta_path);
  if (!mi) {
    d.box = SampleBox::uniform(h, 0.0, 0.0, 0.0);
    return d;
  }
  try {
    nlohmann::json meta;
    mi >> meta;
    if (meta.at("horizon").get<int>() != h) throw MalformedFileError(meta_path, 0, "horizon differs from CSV");
    if (meta.at("rows").get<long>() != rows) throw MalformedFileError(meta_path, 0, "row count differs from CSV");
    d.seed = meta.at("seed").get<std::uint64_t>();
    d.box.cnt = meta.at("box").at("cnt").get<std::vector<double>>();
    d.box.rad = meta.at("box").at("rad").get<std::vector<double>>();
    d.box.epsilon = meta.at("box").at("epsilon").get<double>();
    const auto& n = meta.at("normalization");
    d.normalization = {n.at("input_scale").get<double>(), n.at("target_mean").get<double>(),
                       n.at("target_std").get<double>()};
    if (meta.contains("checksum") && meta["checksum"].get<std::string>() != hex64(d.checksum()))
      throw MalformedFileError(meta_path, 0, "checksum mismatch");
  } catch (const nlohmann::json::exception& e) {
    throw MalformedFileError(meta_path, 0, e.what());
  }
  return d;
}

}  // namespace esmeta
