#pragma once

#include <memory>
#include <string>

#include "json.hpp"

#include "esmeta/meta_optimizer.hpp"
#include "esmeta/oracle.hpp"
#include "esmeta/storage.hpp"

namespace esmeta {

enum class OracleKind { Synthetic, PriceTaker, Dc };

struct OracleConfig {
  OracleKind kind = OracleKind::Synthetic;
  SyntheticPriceParams synthetic;  // Synthetic and PriceTaker (linearized at idle)
  NetworkCase network;             // Dc
  DcMarketOptions market;
};

struct RunConfig {
  OracleConfig oracle;
  StorageParams storage;
  SchemeConfig scheme;
  std::string output_dir = "out";
  nlohmann::json resolved;  // every field after defaults, as written to the output directory
};

// Parses a run configuration. Unknown keys and invalid values raise
// ConfigError naming the dotted field path. Relative network case paths are
// resolved against `base_dir`.
RunConfig parse_run_config(const nlohmann::json& j, const std::string& base_dir = ".");
RunConfig load_run_config(const std::string& path);

// Re-derives `resolved` after command-line overrides.
void refresh_resolved(RunConfig& cfg);

std::unique_ptr<LowerLevelOracle> make_oracle(const OracleConfig& cfg, int horizon);
// Price-taker linearization of the configured oracle at the idle schedule.
std::unique_ptr<LowerLevelOracle> make_linear_oracle(const LowerLevelOracle& oracle);

std::string oracle_kind_name(OracleKind kind);

}  // namespace esmeta
