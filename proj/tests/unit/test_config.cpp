#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "esmeta/config.hpp"
#include "esmeta/errors.hpp"

using namespace esmeta;
using nlohmann::json;

namespace {

std::string field_of(const json& j) {
  try {
    parse_run_config(j);
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "<accepted>";
}

}  // namespace

TEST(Config, MissingOracleIsRejected) {
  EXPECT_EQ(field_of(json::object()), "oracle");
  EXPECT_EQ(field_of(json{{"oracle", json::object()}}), "oracle.type");
}

TEST(Config, UnknownFieldsNameTheirPath) {
  EXPECT_EQ(field_of(json{{"oracle", {{"type", "synthetic"}}}, {"colour", 1}}), "colour");
  EXPECT_EQ(field_of(json{{"oracle", {{"type", "synthetic"}}}, {"train", {{"epoch", 3}}}}), "train.epoch");
  EXPECT_EQ(field_of(json{{"oracle", {{"type", "synthetic"}, {"load", {{"hgt", 1}}}}}}), "oracle.load.hgt");
}

TEST(Config, InvalidValuesNameTheirPath) {
  EXPECT_EQ(field_of(json{{"oracle", {{"type", "hydro"}}}}), "oracle.type");
  EXPECT_EQ(field_of(json{{"oracle", {{"type", "synthetic"}}}, {"train", {{"epochs", "many"}}}}), "train.epochs");
  EXPECT_EQ(field_of(json{{"oracle", {{"type", "synthetic"}}}, {"storage", {{"eta_ch", 1.5}}}}), "storage");
  EXPECT_EQ(field_of(json{{"oracle", {{"type", "synthetic"}, {"d", {1.0, 2.0}}}}}), "oracle.d");
  EXPECT_EQ(field_of(json{{"oracle", {{"type", "synthetic"}}}, {"seed", -1}}), "seed");
}

TEST(Config, DefaultsMatchLibraryDefaults) {
  const RunConfig cfg = parse_run_config(json{{"oracle", {{"type", "synthetic"}}}});
  EXPECT_EQ(cfg.storage.horizon, 24);
  EXPECT_EQ(cfg.scheme.dataset_size, 2000);
  EXPECT_EQ(cfg.scheme.members, 4);
  EXPECT_EQ(cfg.scheme.train.epochs, TrainConfig{}.epochs);
  EXPECT_EQ(cfg.scheme.architecture.hidden_channels, ArchitectureOptions{}.hidden_channels);
  const auto def = default_synthetic_params(24);
  EXPECT_EQ(cfg.oracle.synthetic.d, def.d);
  EXPECT_EQ(cfg.oracle.synthetic.a, def.a);
}

TEST(Config, ResolvedConfigRoundTrips) {
  const json in = {{"oracle", {{"type", "synthetic"}, {"a", 12.0}, {"c", 0.25}}},
                   {"storage", {{"soe_max", 2.0}, {"horizon", 12}}},
                   {"train", {{"epochs", 7}, {"lookahead", false}}},
                   {"seed", 99},
                   {"output_dir", "elsewhere"}};
  const RunConfig a = parse_run_config(in);
  const RunConfig b = parse_run_config(a.resolved);
  EXPECT_EQ(a.resolved.dump(), b.resolved.dump());
  EXPECT_EQ(b.storage.horizon, 12);
  EXPECT_EQ(b.oracle.synthetic.a, std::vector<double>(12, 12.0));
  EXPECT_EQ(b.scheme.train.epochs, 7);
  EXPECT_FALSE(b.scheme.train.lookahead);
  EXPECT_EQ(b.scheme.seed, 99u);
  EXPECT_EQ(b.output_dir, "elsewhere");
}

TEST(Config, OverridesRefreshResolved) {
  RunConfig cfg = parse_run_config(json{{"oracle", {{"type", "price_taker"}}}});
  cfg.scheme.seed = 5;
  cfg.scheme.iterations_max = 3;
  refresh_resolved(cfg);
  const RunConfig back = parse_run_config(cfg.resolved);
  EXPECT_EQ(back.scheme.seed, 5u);
  EXPECT_EQ(back.scheme.iterations_max, 3);
  EXPECT_EQ(back.oracle.kind, OracleKind::PriceTaker);
}

TEST(Config, PriceTakerOracleIgnoresSchedule) {
  const RunConfig cfg = parse_run_config(json{{"oracle", {{"type", "price_taker"}}}});
  const auto oracle = make_oracle(cfg.oracle, cfg.storage.horizon);
  const auto idle = oracle->evaluate(Schedule::zeros(24)).lambda;
  const auto busy = oracle->evaluate(Schedule(std::vector<double>(24, 0.3))).lambda;
  EXPECT_EQ(idle, busy);
}

TEST(Config, NetworkCasePathIsRelativeToConfig) {
  const auto dir = std::filesystem::temp_directory_path() / "esmeta_config_test";
  std::filesystem::create_directories(dir / "cases");
  const json network = {{"buses", {{{"id", 1}, {"demand", {0.0, 0.0}}}, {{"id", 2}, {"demand", {0.5, 1.0}}}}},
                        {"generators", {{{"bus", 1}, {"cost_linear", 10.0}, {"p_max", 2.0}}}},
                        {"lines", {{{"from", 1}, {"to", 2}, {"flow_limit", 5.0}}}},
                        {"storage_bus", 2},
                        {"reference_bus", 1}};
  std::ofstream(dir / "cases" / "two.json") << network.dump();
  const json cfg = {{"oracle", {{"type", "dc"}, {"case", "cases/two.json"}}}, {"storage", {{"horizon", 2}}}};
  std::ofstream(dir / "run.json") << cfg.dump();

  const RunConfig parsed = load_run_config((dir / "run.json").string());
  EXPECT_EQ(parsed.oracle.kind, OracleKind::Dc);
  EXPECT_EQ(parsed.oracle.network.buses.size(), 2u);
  // The resolved form embeds the case so it no longer depends on the file.
  EXPECT_TRUE(parsed.resolved.at("oracle").at("case").is_object());

  const json wrong = {{"oracle", {{"type", "dc"}, {"case", "cases/two.json"}}}};
  std::ofstream(dir / "wrong.json") << wrong.dump();
  try {
    load_run_config((dir / "wrong.json").string());
    FAIL() << "horizon mismatch accepted";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "oracle.case");
  }
  std::filesystem::remove_all(dir);
}

TEST(Config, UnreadableFileIsConfigError) {
  EXPECT_THROW(load_run_config("/nonexistent/run.json"), ConfigError);
  const auto path = std::filesystem::temp_directory_path() / "esmeta_not_json.json";
  std::ofstream(path) << "{ nope";
  EXPECT_THROW(load_run_config(path.string()), ConfigError);
  std::filesystem::remove(path);
}
