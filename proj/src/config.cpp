#include "esmeta/config.hpp"

#include <filesystem>
#include <fstream>
#include <set>

#include "esmeta/errors.hpp"

namespace esmeta {

namespace {

using nlohmann::json;

std::string join(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

// Thin cursor over one JSON object that remembers its path and which keys were used.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  Section child(const std::string& key) {
    used_.insert(key);
    if (!j_.contains(key)) return Section(empty(), join(path_, key));
    return Section(j_.at(key), join(path_, key));
  }

  Section required_child(const std::string& key) {
    if (!j_.contains(key)) throw ConfigError(join(path_, key), "missing required section");
    return child(key);
  }

  const json& raw(const std::string& key) {
    used_.insert(key);
    return j_.at(key);
  }

  double number(const std::string& key, double fallback) {
    used_.insert(key);
    if (!j_.contains(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_number()) throw ConfigError(join(path_, key), "expected a number");
    return v.get<double>();
  }

  long integer(const std::string& key, long fallback) {
    used_.insert(key);
    if (!j_.contains(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_number_integer()) throw ConfigError(join(path_, key), "expected an integer");
    return v.get<long>();
  }

  std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback) {
    used_.insert(key);
    if (!j_.contains(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<long long>() < 0))
      throw ConfigError(join(path_, key), "expected a non-negative integer");
    return v.get<std::uint64_t>();
  }

  bool boolean(const std::string& key, bool fallback) {
    used_.insert(key);
    if (!j_.contains(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_boolean()) throw ConfigError(join(path_, key), "expected true or false");
    return v.get<bool>();
  }

  std::string string(const std::string& key, const std::string& fallback) {
    used_.insert(key);
    if (!j_.contains(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_string()) throw ConfigError(join(path_, key), "expected a string");
    return v.get<std::string>();
  }

  // A number broadcast over the horizon, or an explicit array.
  std::vector<double> profile(const std::string& key, int horizon, const std::vector<double>& fallback) {
    used_.insert(key);
    if (!j_.contains(key)) return fallback;
    const json& v = j_.at(key);
    if (v.is_number()) return std::vector<double>(horizon, v.get<double>());
    if (!v.is_array()) throw ConfigError(join(path_, key), "expected a number or an array");
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number()) throw ConfigError(join(path_, key), "array entries must be numbers");
      out.push_back(e.get<double>());
    }
    if (static_cast<int>(out.size()) != horizon)
      throw ConfigError(join(path_, key), "expected " + std::to_string(horizon) + " entries");
    return out;
  }

  const std::string& path() const { return path_; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!used_.count(it.key())) throw ConfigError(join(path_, it.key()), "unknown field");
  }

 private:
  static const json& empty() {
    static const json e = json::object();
    return e;
  }

  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

template <class F>
void check(const std::string& field, F&& validate) {
  try {
    validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(field, e.what());
  }
}

int to_int(long v, const std::string& field) {
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
    throw ConfigError(field, "out of range");
  return static_cast<int>(v);
}

StorageParams parse_storage(Section s) {
  StorageParams p;
  p.soe_max = s.number("soe_max", p.soe_max);
  p.q_ch_max = s.number("q_ch_max", p.q_ch_max);
  p.q_dis_max = s.number("q_dis_max", p.q_dis_max);
  p.eta_ch = s.number("eta_ch", p.eta_ch);
  p.eta_dis = s.number("eta_dis", p.eta_dis);
  p.soe_init = s.number("soe_init", p.soe_init);
  p.horizon = to_int(s.integer("horizon", p.horizon), join(s.path(), "horizon"));
  s.finish();
  check(s.path(), [&] { p.validate(); });
  return p;
}

OracleConfig parse_oracle(Section s, int horizon, const std::string& base_dir) {
  OracleConfig o;
  if (!s.has("type")) throw ConfigError(join(s.path(), "type"), "missing oracle type");
  const std::string type = s.string("type", "");
  if (type == "synthetic" || type == "price_taker") {
    o.kind = type == "synthetic" ? OracleKind::Synthetic : OracleKind::PriceTaker;
    const SyntheticPriceParams def = default_synthetic_params(horizon);
    o.synthetic.a = s.profile("a", horizon, def.a);
    o.synthetic.b = s.number("b", def.b);
    o.synthetic.c = s.number("c", def.c);
    if (s.has("d") && s.has("load"))
      throw ConfigError(join(s.path(), "d"), "give either d or load, not both");
    if (s.has("load")) {
      Section l = s.child("load");
      LoadProfileParams lp = default_load_profile();
      lp.base = l.number("base", lp.base);
      lp.morning_peak = l.number("morning_peak", lp.morning_peak);
      lp.evening_peak = l.number("evening_peak", lp.evening_peak);
      lp.morning_hour = l.number("morning_hour", lp.morning_hour);
      lp.evening_hour = l.number("evening_hour", lp.evening_hour);
      lp.width_hours = l.number("width_hours", lp.width_hours);
      lp.night_dip = l.number("night_dip", lp.night_dip);
      lp.night_hour = l.number("night_hour", lp.night_hour);
      lp.night_width_hours = l.number("night_width_hours", lp.night_width_hours);
      l.finish();
      if (!(lp.width_hours > 0.0)) throw ConfigError(join(l.path(), "width_hours"), "must be > 0");
      if (!(lp.night_width_hours > 0.0))
        throw ConfigError(join(l.path(), "night_width_hours"), "must be > 0");
      o.synthetic.d = daily_load_profile(horizon, lp);
    } else {
      o.synthetic.d = s.profile("d", horizon, def.d);
    }
    check(s.path(), [&] { o.synthetic.validate(); });
  } else if (type == "dc") {
    o.kind = OracleKind::Dc;
    if (!s.has("case")) throw ConfigError(join(s.path(), "case"), "missing network case");
    const json& c = s.raw("case");
    try {
      if (c.is_string()) {
        std::filesystem::path path = c.get<std::string>();
        if (path.is_relative()) path = std::filesystem::path(base_dir) / path;
        o.network = load_network_case(path.string());
      } else {
        o.network = network_case_from_json(c);
      }
    } catch (const std::exception& e) {
      throw ConfigError(join(s.path(), "case"), e.what());
    }
    if (o.network.horizon() != horizon)
      throw ConfigError(join(s.path(), "case"), "demand length differs from storage.horizon");
    o.market.segments = to_int(s.integer("segments", o.market.segments), join(s.path(), "segments"));
    o.market.penalty = s.number("penalty", o.market.penalty);
    if (o.market.segments < 1) throw ConfigError(join(s.path(), "segments"), "must be >= 1");
    if (!(o.market.penalty >= 0.0)) throw ConfigError(join(s.path(), "penalty"), "must be >= 0");
  } else {
    throw ConfigError(join(s.path(), "type"), "unknown oracle type '" + type + "' (synthetic, price_taker, dc)");
  }
  s.finish();
  return o;
}

json oracle_to_json(const OracleConfig& o) {
  json j;
  j["type"] = oracle_kind_name(o.kind);
  if (o.kind == OracleKind::Dc) {
    j["case"] = to_json(o.network);
    j["segments"] = o.market.segments;
    j["penalty"] = o.market.penalty;
  } else {
    j["a"] = o.synthetic.a;
    j["b"] = o.synthetic.b;
    j["c"] = o.synthetic.c;
    j["d"] = o.synthetic.d;
  }
  return j;
}

}  // namespace

std::string oracle_kind_name(OracleKind kind) {
  switch (kind) {
    case OracleKind::Synthetic: return "synthetic";
    case OracleKind::PriceTaker: return "price_taker";
    case OracleKind::Dc: return "dc";
  }
  return "unknown";
}

RunConfig parse_run_config(const json& j, const std::string& base_dir) {
  Section root(j, "");
  RunConfig cfg;
  cfg.storage = parse_storage(root.child("storage"));
  cfg.oracle = parse_oracle(root.required_child("oracle"), cfg.storage.horizon, base_dir);

  SchemeConfig& s = cfg.scheme;
  {
    Section d = root.child("dataset");
    s.dataset_size = to_int(d.integer("n", s.dataset_size), "dataset.n");
    d.finish();
    if (s.dataset_size < 5) throw ConfigError("dataset.n", "must be >= 5");
  }
  {
    Section e = root.child("ensemble");
    s.members = to_int(e.integer("members", s.members), "ensemble.members");
    e.finish();
    if (s.members < 1) throw ConfigError("ensemble.members", "must be >= 1");
  }
  {
    Section t = root.child("train");
    TrainConfig& tc = s.train;
    tc.epochs = to_int(t.integer("epochs", tc.epochs), "train.epochs");
    tc.max_lr = t.number("max_lr", tc.max_lr);
    tc.batch_size = to_int(t.integer("batch_size", tc.batch_size), "train.batch_size");
    tc.weight_decay = t.number("weight_decay", tc.weight_decay);
    tc.moment_decay_1 = t.number("moment_decay_1", tc.moment_decay_1);
    tc.moment_decay_2 = t.number("moment_decay_2", tc.moment_decay_2);
    tc.adam_epsilon = t.number("adam_epsilon", tc.adam_epsilon);
    tc.lookahead = t.boolean("lookahead", tc.lookahead);
    tc.lookahead_sync_period = to_int(t.integer("lookahead_sync_period", tc.lookahead_sync_period),
                                      "train.lookahead_sync_period");
    tc.lookahead_blend = t.number("lookahead_blend", tc.lookahead_blend);
    tc.flat_fraction = t.number("flat_fraction", tc.flat_fraction);
    t.finish();
    check("train", [&] { tc.validate(); });
  }
  {
    Section a = root.child("surrogate");
    ArchitectureOptions& ao = s.architecture;
    if (a.has("hidden_channels")) {
      const json& hc = a.raw("hidden_channels");
      if (!hc.is_array() || hc.size() != 6) throw ConfigError("surrogate.hidden_channels", "expected six integers");
      for (std::size_t k = 0; k < 6; ++k) {
        if (!hc[k].is_number_integer() || hc[k].get<long>() < 1)
          throw ConfigError("surrogate.hidden_channels", "entries must be positive integers");
        ao.hidden_channels[k] = hc[k].get<int>();
      }
    }
    ao.beta = a.number("beta", ao.beta);
    a.finish();
    if (!(ao.beta > 0.0)) throw ConfigError("surrogate.beta", "must be > 0");
    try {
      build_default_architecture(cfg.storage.horizon, ao);
    } catch (const std::exception& e) {
      throw ConfigError("storage.horizon", e.what());
    }
  }
  {
    Section m = root.child("maximizer");
    SurrogateMaxConfig& mc = s.maximizer;
    mc.starts = to_int(m.integer("starts", mc.starts), "maximizer.starts");
    mc.steps = to_int(m.integer("steps", mc.steps), "maximizer.steps");
    mc.step_size = m.number("step_size", mc.step_size);
    mc.penalty_weight = m.number("penalty_weight", mc.penalty_weight);
    m.finish();
    check("maximizer", [&] { mc.validate(); });
  }
  {
    Section sc = root.child("scheme");
    s.epsilon = sc.number("epsilon", s.epsilon);
    s.gamma = sc.number("gamma", s.gamma);
    s.iterations_max = to_int(sc.integer("iterations_max", s.iterations_max), "scheme.iterations_max");
    sc.finish();
    if (!(s.epsilon >= 0.0)) throw ConfigError("scheme.epsilon", "must be >= 0");
    if (!(s.gamma > 0.0)) throw ConfigError("scheme.gamma", "must be > 0");
    if (s.iterations_max < 1) throw ConfigError("scheme.iterations_max", "must be >= 1");
  }
  s.workers = to_int(root.integer("workers", s.workers), "workers");
  if (s.workers < 1) throw ConfigError("workers", "must be >= 1");
  s.seed = root.unsigned_integer("seed", s.seed);
  cfg.output_dir = root.string("output_dir", cfg.output_dir);
  root.finish();
  refresh_resolved(cfg);
  return cfg;
}

void refresh_resolved(RunConfig& cfg) {
  const SchemeConfig& s = cfg.scheme;
  const StorageParams& p = cfg.storage;
  const TrainConfig& t = s.train;
  const SurrogateMaxConfig& m = s.maximizer;
  json j;
  j["oracle"] = oracle_to_json(cfg.oracle);
  j["storage"] = {{"soe_max", p.soe_max}, {"q_ch_max", p.q_ch_max}, {"q_dis_max", p.q_dis_max},
                  {"eta_ch", p.eta_ch},   {"eta_dis", p.eta_dis},   {"soe_init", p.soe_init},
                  {"horizon", p.horizon}};
  j["dataset"] = {{"n", s.dataset_size}};
  j["ensemble"] = {{"members", s.members}};
  j["train"] = {{"epochs", t.epochs},
                {"max_lr", t.max_lr},
                {"batch_size", t.batch_size},
                {"weight_decay", t.weight_decay},
                {"moment_decay_1", t.moment_decay_1},
                {"moment_decay_2", t.moment_decay_2},
                {"adam_epsilon", t.adam_epsilon},
                {"lookahead", t.lookahead},
                {"lookahead_sync_period", t.lookahead_sync_period},
                {"lookahead_blend", t.lookahead_blend},
                {"flat_fraction", t.flat_fraction}};
  j["surrogate"] = {{"hidden_channels", s.architecture.hidden_channels}, {"beta", s.architecture.beta}};
  j["maximizer"] = {{"starts", m.starts},
                    {"steps", m.steps},
                    {"step_size", m.step_size},
                    {"penalty_weight", m.penalty_weight}};
  j["scheme"] = {{"epsilon", s.epsilon}, {"gamma", s.gamma}, {"iterations_max", s.iterations_max}};
  j["workers"] = s.workers;
  j["seed"] = s.seed;
  j["output_dir"] = cfg.output_dir;
  cfg.resolved = std::move(j);
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot open config " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("<file>", std::string("not valid JSON: ") + e.what());
  }
  const auto dir = std::filesystem::path(path).parent_path();
  return parse_run_config(j, dir.empty() ? "." : dir.string());
}

std::unique_ptr<LowerLevelOracle> make_oracle(const OracleConfig& cfg, int horizon) {
  switch (cfg.kind) {
    case OracleKind::Synthetic:
      return std::make_unique<SyntheticPriceOracle>(cfg.synthetic);
    case OracleKind::PriceTaker: {
      const SyntheticPriceOracle base(cfg.synthetic);
      return std::make_unique<SyntheticPriceOracle>(linearize_at_idle(base));
    }
    case OracleKind::Dc: {
      auto o = std::make_unique<DcMarketOracle>(cfg.network, cfg.market);
      if (o->horizon() != horizon) throw ConfigError("oracle.case", "demand length differs from storage.horizon");
      return o;
    }
  }
  throw ConfigError("oracle.type", "unsupported oracle");
}

std::unique_ptr<LowerLevelOracle> make_linear_oracle(const LowerLevelOracle& oracle) {
  return std::make_unique<SyntheticPriceOracle>(linearize_at_idle(oracle));
}

}  // namespace esmeta
