#include "cbcr/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "cbcr/errors.hpp"
#include "json.hpp"

namespace cbcr {

using nlohmann::json;

std::string_view to_string(AlgorithmKind kind) {
  switch (kind) {
    case AlgorithmKind::fw_linucb: return "fw_linucb";
    case AlgorithmKind::fw_squarecb: return "fw_squarecb";
    case AlgorithmKind::fw_eps_greedy: return "fw_eps_greedy";
    case AlgorithmKind::fw_linucbrank: return "fw_linucbrank";
    case AlgorithmKind::linucbrank: return "linucbrank";
    case AlgorithmKind::unbiased_linucbrank: return "unbiased_linucbrank";
    case AlgorithmKind::fairlearn: return "fairlearn";
  }
  return "unknown";
}

AlgorithmKind algorithm_kind_from_string(std::string_view name) {
  for (AlgorithmKind kind :
       {AlgorithmKind::fw_linucb, AlgorithmKind::fw_squarecb, AlgorithmKind::fw_eps_greedy,
        AlgorithmKind::fw_linucbrank, AlgorithmKind::linucbrank,
        AlgorithmKind::unbiased_linucbrank, AlgorithmKind::fairlearn}) {
    if (to_string(kind) == name) return kind;
  }
  throw ArgumentError("unknown algorithm '" + std::string(name) + "'");
}

bool is_ranking_algorithm(AlgorithmKind kind) {
  return kind == AlgorithmKind::fw_linucbrank || kind == AlgorithmKind::linucbrank ||
         kind == AlgorithmKind::unbiased_linucbrank || kind == AlgorithmKind::fairlearn;
}

namespace {

// Reads typed fields out of a JSON object, recording every problem instead of
// stopping at the first one, and rejecting keys it was never asked about.
class FieldReader {
 public:
  FieldReader(const json& object, std::string path, std::vector<std::string>& errors)
      : object_(object), path_(std::move(path)), errors_(errors) {
    if (!object_.is_object()) fail("", "must be a JSON object");
  }

  ~FieldReader() = default;

  bool has(const std::string& key) {
    seen_.insert(key);
    return object_.is_object() && object_.contains(key) && !object_.at(key).is_null();
  }

  template <typename T>
  void read(const std::string& key, T& out) {
    if (!has(key)) return;
    try {
      out = object_.at(key).get<T>();
    } catch (const json::exception&) {
      fail(key, "has the wrong type");
    }
  }

  void read_size(const std::string& key, std::size_t& out) {
    if (!has(key)) return;
    const json& v = object_.at(key);
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
      fail(key, "must be a non-negative integer");
      return;
    }
    out = v.get<std::size_t>();
  }

  template <typename Enum, typename Parse>
  void read_enum(const std::string& key, Enum& out, Parse parse) {
    if (!has(key)) return;
    const json& v = object_.at(key);
    if (!v.is_string()) {
      fail(key, "must be a string");
      return;
    }
    try {
      out = parse(v.get<std::string>());
    } catch (const ArgumentError& e) {
      fail(key, e.what());
    }
  }

  const json* child(const std::string& key) {
    if (!has(key)) return nullptr;
    return &object_.at(key);
  }

  void fail(const std::string& key, const std::string& message) {
    std::string where = path_;
    if (!key.empty()) where += (where.empty() ? "" : ".") + key;
    errors_.push_back(where + ": " + message);
  }

  void reject_unknown() {
    if (!object_.is_object()) return;
    for (const auto& item : object_.items()) {
      if (seen_.count(item.key()) == 0) fail(item.key(), "unknown field");
    }
  }

 private:
  const json& object_;
  std::string path_;
  std::vector<std::string>& errors_;
  std::set<std::string> seen_;
};

void parse_env(const json& j, EnvConfig& env, std::vector<std::string>& errors) {
  FieldReader r(j, "env", errors);
  std::string type = "synthetic";
  r.read("type", type);
  if (type == "synthetic") {
    env.kind = EnvKind::synthetic;
    r.read_size("reward_dim", env.synthetic.reward_dim);
    r.read_size("arm_count", env.synthetic.arm_count);
    r.read_size("context_dim", env.synthetic.context_dim);
    r.read("noise_scale", env.synthetic.noise_scale);
    r.read_size("pool_size", env.synthetic.pool_size);
    r.read("reward_upper", env.synthetic.reward_upper);
    if (r.has("seed")) {
      std::uint64_t seed = 0;
      r.read("seed", seed);
      env.seed = seed;
    }
  } else if (type == "lowrank") {
    env.kind = EnvKind::lowrank;
    r.read_size("users", env.users);
    r.read_size("items", env.items);
    r.read_size("latent_dim", env.latent_dim);
    r.read_size("k_bar", env.k_bar);
    r.read_enum("position_weights", env.positions, position_preset_from_string);
    if (r.has("factors")) {
      std::string path;
      r.read("factors", path);
      env.factors = path;
    }
    r.read("factor_seed", env.factor_seed);
  } else {
    r.fail("type", "must be 'synthetic' or 'lowrank'");
  }
  r.reject_unknown();
}

void parse_objective(const json& j, ObjectiveConfig& obj, std::vector<std::string>& errors) {
  FieldReader r(j, "objective", errors);
  r.read_enum("kind", obj.kind, objective_kind_from_string);
  if (const json* w = r.child("weights")) {
    if (w->is_string() && w->get<std::string>() == "geometric") {
      obj.weights.reset();
    } else {
      r.read("weights", obj.weights.emplace());
    }
  }
  r.read("trade_off", obj.trade_off);
  r.read("welfare_exponent", obj.welfare_exponent);
  if (r.has("lipschitz")) {
    double l = 0.0;
    r.read("lipschitz", l);
    obj.lipschitz = l;
  }
  r.reject_unknown();
}

void parse_smoothing(const json& j, SmoothingConfig& s, std::vector<std::string>& errors) {
  FieldReader r(j, "smoothing", errors);
  r.read_enum("method", s.method, smoothing_method_from_string);
  r.read("beta0", s.beta0);
  r.read("prox_tolerance", s.prox_tolerance);
  r.read_size("prox_max_iters", s.prox_max_iters);
  r.read_size("samples", s.sample_count);
  r.reject_unknown();
}

void parse_algorithm(const json& j, AlgorithmConfig& a, std::vector<std::string>& errors) {
  FieldReader r(j, "algorithm", errors);
  r.read_enum("type", a.kind, algorithm_kind_from_string);
  r.read("lambda", a.lambda);
  r.read("delta_prime", a.delta_prime);
  r.read("exploration_scale", a.exploration_scale);
  if (r.has("d_theta")) {
    double v = 0.0;
    r.read("d_theta", v);
    a.d_theta = v;
  }
  r.read("reward_half_width", a.reward_half_width);
  r.read("gamma0", a.gamma0);
  r.read_enum("squarecb_mode", a.squarecb_mode, squarecb_mode_from_string);
  r.read("epsilon", a.epsilon);
  r.read("c", a.fairlearn_c);
  r.read("alpha", a.fairlearn_alpha);
  r.reject_unknown();
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

RunConfig parse_config(std::string_view json_text) {
  json root;
  try {
    root = json::parse(json_text.begin(), json_text.end());
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
  RunConfig cfg;
  std::vector<std::string> errors;
  {
    FieldReader r(root, "", errors);
    r.read("name", cfg.name);
    if (const json* env = r.child("env")) parse_env(*env, cfg.env, errors);
    if (const json* obj = r.child("objective")) parse_objective(*obj, cfg.objective, errors);
    if (const json* sm = r.child("smoothing")) parse_smoothing(*sm, cfg.smoothing, errors);
    if (const json* alg = r.child("algorithm")) parse_algorithm(*alg, cfg.algorithm, errors);
    r.read_size("steps", cfg.steps);
    if (const json* seeds = r.child("seeds")) {
      if (seeds->is_string()) {
        try {
          cfg.seeds = parse_seed_list(seeds->get<std::string>());
        } catch (const ArgumentError& e) {
          r.fail("seeds", e.what());
        }
      } else {
        r.read("seeds", cfg.seeds);
      }
    }
    r.read_size("metrics_stride", cfg.metrics_stride);
    if (r.has("output_path")) {
      std::string out;
      r.read("output_path", out);
      cfg.output_path = out;
    }
    r.read("record_timing", cfg.record_timing);
    if (const json* oracle = r.child("oracle")) {
      FieldReader o(*oracle, "oracle", errors);
      o.read_size("max_iters", cfg.oracle.max_iters);
      o.read("tolerance", cfg.oracle.tolerance);
      o.reject_unknown();
    }
    r.reject_unknown();
  }
  if (!errors.empty()) {
    std::string message = "invalid configuration:";
    for (const std::string& e : errors) message += "\n  " + e;
    throw ConfigError(message);
  }
  cfg.hash = config_hash(cfg);
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read configuration " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  RunConfig cfg = parse_config(buffer.str());
  if (cfg.env.factors && cfg.env.factors->is_relative()) {
    cfg.env.factors = path.parent_path() / *cfg.env.factors;
  }
  return cfg;
}

std::string canonical_config(const RunConfig& cfg) {
  json j;
  j["name"] = cfg.name;
  json env;
  if (cfg.env.kind == EnvKind::synthetic) {
    env["type"] = "synthetic";
    env["reward_dim"] = cfg.env.synthetic.reward_dim;
    env["arm_count"] = cfg.env.synthetic.arm_count;
    env["context_dim"] = cfg.env.synthetic.context_dim;
    env["noise_scale"] = cfg.env.synthetic.noise_scale;
    env["pool_size"] = cfg.env.synthetic.pool_size;
    env["reward_upper"] = cfg.env.synthetic.reward_upper;
    env["seed"] = cfg.env.seed ? json(*cfg.env.seed) : json(nullptr);
  } else {
    env["type"] = "lowrank";
    env["users"] = cfg.env.users;
    env["items"] = cfg.env.items;
    env["latent_dim"] = cfg.env.latent_dim;
    env["k_bar"] = cfg.env.k_bar;
    env["position_weights"] = std::string(to_string(cfg.env.positions));
    env["factors"] = cfg.env.factors ? json(cfg.env.factors->filename().string()) : json(nullptr);
    env["factor_seed"] = cfg.env.factor_seed;
  }
  j["env"] = env;
  json obj;
  obj["kind"] = std::string(to_string(cfg.objective.kind));
  obj["weights"] = cfg.objective.weights ? json(*cfg.objective.weights) : json("geometric");
  obj["trade_off"] = cfg.objective.trade_off;
  obj["welfare_exponent"] = cfg.objective.welfare_exponent;
  obj["lipschitz"] = cfg.objective.lipschitz ? json(*cfg.objective.lipschitz) : json(nullptr);
  j["objective"] = obj;
  json sm;
  sm["method"] = std::string(to_string(cfg.smoothing.method));
  sm["beta0"] = cfg.smoothing.beta0;
  sm["prox_tolerance"] = cfg.smoothing.prox_tolerance;
  sm["prox_max_iters"] = cfg.smoothing.prox_max_iters;
  sm["samples"] = cfg.smoothing.sample_count;
  j["smoothing"] = sm;
  json alg;
  alg["type"] = std::string(to_string(cfg.algorithm.kind));
  alg["lambda"] = cfg.algorithm.lambda;
  alg["delta_prime"] = cfg.algorithm.delta_prime;
  alg["exploration_scale"] = cfg.algorithm.exploration_scale;
  alg["d_theta"] = cfg.algorithm.d_theta ? json(*cfg.algorithm.d_theta) : json(nullptr);
  alg["reward_half_width"] = cfg.algorithm.reward_half_width;
  alg["gamma0"] = cfg.algorithm.gamma0;
  alg["squarecb_mode"] = std::string(to_string(cfg.algorithm.squarecb_mode));
  alg["epsilon"] = cfg.algorithm.epsilon;
  alg["c"] = cfg.algorithm.fairlearn_c;
  alg["alpha"] = cfg.algorithm.fairlearn_alpha;
  j["algorithm"] = alg;
  j["steps"] = cfg.steps;
  j["seeds"] = cfg.seeds;
  j["metrics_stride"] = cfg.metrics_stride;
  j["record_timing"] = cfg.record_timing;
  j["oracle"] = {{"max_iters", cfg.oracle.max_iters}, {"tolerance", cfg.oracle.tolerance}};
  return j.dump();
}

std::string config_hash(const RunConfig& cfg) {
  return hex64(Rng::hash_tag(canonical_config(cfg)));
}

std::vector<std::uint64_t> parse_seed_list(std::string_view text) {
  auto parse_one = [](std::string_view s) {
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
    std::uint64_t v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
      throw ArgumentError("invalid seed '" + std::string(s) + "'");
    }
    return v;
  };
  std::vector<std::uint64_t> seeds;
  if (const auto dots = text.find(".."); dots != std::string_view::npos) {
    const std::uint64_t lo = parse_one(text.substr(0, dots));
    const std::uint64_t hi = parse_one(text.substr(dots + 2));
    if (hi < lo) throw ArgumentError("seed range must be increasing");
    for (std::uint64_t s = lo; s <= hi; ++s) seeds.push_back(s);
    return seeds;
  }
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = text.find(',', start);
    seeds.push_back(parse_one(text.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return seeds;
}

RewardBox environment_box(const RunConfig& cfg) {
  if (cfg.env.kind == EnvKind::synthetic) {
    return RewardBox::uniform(cfg.env.synthetic.reward_dim, 0.0, cfg.env.synthetic.reward_upper);
  }
  return ranking_reward_box(cfg.env.items, cfg.env.k_bar);
}

ObjectiveSpec build_objective(const RunConfig& cfg) {
  const ObjectiveConfig& o = cfg.objective;
  RewardBox box = environment_box(cfg);
  ObjectiveSpec spec;
  switch (o.kind) {
    case ObjectiveKind::ggf: {
      Eigen::VectorXd w = o.weights ? Eigen::Map<const Eigen::VectorXd>(
                                          o.weights->data(), static_cast<Eigen::Index>(o.weights->size()))
                                    : geometric_ggf_weights(box.dim());
      spec = make_ggf(std::move(w), std::move(box));
      break;
    }
    case ObjectiveKind::linear: {
      if (!o.weights) throw ConfigError("linear objective requires explicit weights");
      spec = make_linear(Eigen::Map<const Eigen::VectorXd>(
                             o.weights->data(), static_cast<Eigen::Index>(o.weights->size())),
                         std::move(box));
      break;
    }
    default: {
      if (cfg.env.kind != EnvKind::lowrank) {
        throw ConfigError(std::string(to_string(o.kind)) + " objective requires a ranking environment");
      }
      spec = make_ranking_objective(o.kind, cfg.env.items, o.trade_off, std::move(box),
                                    o.welfare_exponent);
      break;
    }
  }
  if (o.lipschitz) spec.lipschitz = *o.lipschitz;
  spec.validate();
  return spec;
}

std::vector<std::string> validate_config(const RunConfig& cfg) {
  std::vector<std::string> v;
  if (cfg.steps < 1) v.push_back("steps must be >= 1");
  if (cfg.seeds.empty()) v.push_back("seeds must be non-empty");
  if (cfg.metrics_stride < 1) v.push_back("metrics_stride must be >= 1");
  if (cfg.oracle.max_iters < 1) v.push_back("oracle.max_iters must be >= 1");
  if (!(cfg.oracle.tolerance > 0.0)) v.push_back("oracle.tolerance must be positive");

  const bool ranking_env = cfg.env.kind == EnvKind::lowrank;
  if (ranking_env) {
    if (cfg.env.users == 0 || cfg.env.items == 0 || cfg.env.latent_dim == 0) {
      v.push_back("lowrank environment dimensions must be positive");
    }
    if (cfg.env.k_bar < 1 || cfg.env.k_bar > cfg.env.items) {
      v.push_back("env.k_bar must lie in [1, items]");
    }
    if (cfg.env.factors && !std::filesystem::exists(*cfg.env.factors)) {
      v.push_back("factor file " + cfg.env.factors->string() + " does not exist");
    }
  } else {
    try {
      cfg.env.synthetic.validate();
    } catch (const std::exception& e) {
      v.push_back(e.what());
    }
  }
  if (ranking_env != is_ranking_algorithm(cfg.algorithm.kind)) {
    v.push_back("algorithm " + std::string(to_string(cfg.algorithm.kind)) +
                " does not match the " + (ranking_env ? "lowrank" : "synthetic") + " environment");
  }
  const bool ranking_objective = cfg.objective.kind != ObjectiveKind::ggf &&
                                 cfg.objective.kind != ObjectiveKind::linear;
  if (ranking_objective != ranking_env) {
    v.push_back("objective " + std::string(to_string(cfg.objective.kind)) +
                " does not match the " + (ranking_env ? "lowrank" : "synthetic") + " environment");
  }

  const AlgorithmConfig& a = cfg.algorithm;
  if (!(a.lambda > 0.0)) v.push_back("algorithm.lambda must be positive");
  if (!(a.delta_prime > 0.0 && a.delta_prime < 1.0)) {
    v.push_back("algorithm.delta_prime must lie in (0, 1)");
  }
  if (!(a.exploration_scale >= 0.0)) v.push_back("algorithm.exploration_scale must be >= 0");
  if (a.d_theta && !(*a.d_theta > 0.0)) v.push_back("algorithm.d_theta must be positive");
  if (!(a.reward_half_width > 0.0)) v.push_back("algorithm.reward_half_width must be positive");
  if (a.kind == AlgorithmKind::fw_squarecb && !(a.gamma0 > 0.0)) {
    v.push_back("algorithm.gamma0 must be positive");
  }
  if (a.kind == AlgorithmKind::fw_eps_greedy && !(a.epsilon >= 0.0 && a.epsilon <= 1.0)) {
    v.push_back("algorithm.epsilon must lie in [0, 1]");
  }
  if (a.kind == AlgorithmKind::fairlearn) {
    if (!(a.fairlearn_c >= 0.0)) v.push_back("algorithm.c must be >= 0");
    if (!(a.fairlearn_alpha >= 0.0)) v.push_back("algorithm.alpha must be >= 0");
    if (cfg.env.items > 0 &&
        a.fairlearn_c > static_cast<double>(cfg.env.k_bar) / static_cast<double>(cfg.env.items) + 1e-12) {
      v.push_back("FairLearn is infeasible: c must not exceed k_bar / m");
    }
  }

  if (ranking_objective == ranking_env) {
    const ObjectiveConfig& o = cfg.objective;
    if (o.kind == ObjectiveKind::ggf && o.weights) {
      for (std::size_t i = 1; i < o.weights->size(); ++i) {
        if ((*o.weights)[i] > (*o.weights)[i - 1]) {
          v.push_back("ggf weights must be non-increasing");
          break;
        }
      }
    }
    try {
      const ObjectiveSpec spec = build_objective(cfg);
      try {
        cfg.smoothing.validate(spec);
      } catch (const std::exception& e) {
        v.push_back(e.what());
      }
    } catch (const std::exception& e) {
      const std::string what = e.what();
      if (what != "ggf weights must be non-increasing") v.push_back(what);
    }
  }
  return v;
}

}  // namespace cbcr
