#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "esmeta/oracle.hpp"
#include "esmeta/sample_box.hpp"
#include "esmeta/storage.hpp"

namespace esmeta {

// Inputs are divided by input_scale; targets are standardized with the
// training-split mean and (population) standard deviation.
struct Normalization {
  double input_scale = 1.0;
  double target_mean = 0.0;
  double target_std = 1.0;

  bool operator==(const Normalization&) const = default;
};

struct LabeledDataset {
  Eigen::MatrixXd inputs;       // N x horizon, one schedule per row
  std::vector<double> targets;  // profit F(q) per row
  SampleBox box;
  std::uint64_t seed = 0;
  Normalization normalization;

  int size() const { return static_cast<int>(targets.size()); }
  int horizon() const { return static_cast<int>(inputs.cols()); }
  Schedule schedule(int row) const;
  LabeledDataset subset(const std::vector<int>& rows) const;
  // FNV-1a over the raw bytes of inputs (row-major) then targets.
  std::uint64_t checksum() const;
};

// n rows drawn independently and uniformly from the box's effective
// intervals (inflated box ∩ inflated power bounds).
Eigen::MatrixXd sample_box(const SampleBox& box, const StorageParams& p, int n, std::uint64_t seed);

struct SplitIndices {
  std::vector<int> train;
  std::vector<int> valid;
};

// Deterministic 80:20 shuffle split; train gets ceil(0.8 N) rows.
SplitIndices split_indices(int n, std::uint64_t seed);

std::pair<LabeledDataset, LabeledDataset> split_dataset(const LabeledDataset& d, std::uint64_t seed);

// Samples, labels through the oracle and normalizes using the training split
// that split_dataset(d, seed) will produce.
LabeledDataset build_dataset(const LowerLevelOracle& oracle, const SampleBox& box,
                             const StorageParams& p, int n, std::uint64_t seed, int workers = 1);

Normalization compute_normalization(const LabeledDataset& d, const StorageParams& p,
                                    const std::vector<int>& train_rows);

// CSV with header q_1,...,q_H,profit plus a JSON sidecar at path + ".meta.json"
// holding box, seed, normalization and checksum.
void save_dataset(const LabeledDataset& d, const std::string& path);
LabeledDataset load_dataset(const std::string& path);

std::string dataset_meta_path(const std::string& csv_path);

}  // namespace esmeta
