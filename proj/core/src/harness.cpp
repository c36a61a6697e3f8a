#include "cbcr/harness.hpp"

#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <string>
#include <thread>

#include "cbcr/errors.hpp"
#include "json.hpp"

namespace cbcr {

namespace {

void write_double(std::ostream& out, double v) {
  char buffer[64];
  const auto res = std::to_chars(buffer, buffer + sizeof(buffer), v);
  out.write(buffer, res.ptr - buffer);
}

std::vector<std::string_view> split_cells(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    cells.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

template <typename T>
T parse_cell(std::string_view cell, std::size_t line) {
  T value{};
  const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (cell.empty() || res.ec != std::errc() || res.ptr != cell.data() + cell.size()) {
    throw FormatError("invalid number '" + std::string(cell) + "'", line);
  }
  return value;
}

}  // namespace

std::array<std::optional<double>, 8> metric_values(const MetricsRow& row) {
  return {row.f_value,
          row.f_star,
          row.regret,
          row.scalar_regret_cum,
          row.pseudo_regret_gap,
          row.user_utility,
          row.item_gini,
          static_cast<double>(row.wall_clock_ns)};
}

void write_metrics_header(std::ostream& out) {
  for (std::size_t c = 0; c < kMetricsColumns.size(); ++c) {
    out << (c == 0 ? "" : ",") << kMetricsColumns[c];
  }
  out << '\n';
}

void write_metrics_row(std::ostream& out, const MetricsRow& row) {
  const auto values = metric_values(row);
  for (std::size_t c = 0; c < values.size(); ++c) {
    if (values[c] && !std::isfinite(*values[c])) {
      throw NumericError("non-finite " + std::string(kMetricValueColumns[c]) + " at step " +
                         std::to_string(row.step));
    }
  }
  out << row.step << ',' << row.seed;
  for (std::size_t c = 0; c + 1 < values.size(); ++c) {
    out << ',';
    if (values[c]) write_double(out, *values[c]);
  }
  out << ',' << row.wall_clock_ns << '\n';
}

RunMetrics read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open metrics file " + path.string(), 0);
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) throw FormatError("metrics file is empty", 1);
  const auto header = split_cells(line);
  for (std::size_t c = 0; c < kMetricsColumns.size(); ++c) {
    if (c >= header.size() || header[c] != kMetricsColumns[c]) {
      throw FormatError("missing column " + std::string(kMetricsColumns[c]), 1);
    }
  }
  if (header.size() != kMetricsColumns.size()) throw FormatError("unexpected extra columns", 1);
  RunMetrics rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split_cells(line);
    if (cells.size() != kMetricsColumns.size()) {
      throw FormatError("expected " + std::to_string(kMetricsColumns.size()) + " fields", line_no);
    }
    MetricsRow row;
    row.step = parse_cell<std::size_t>(cells[0], line_no);
    row.seed = parse_cell<std::uint64_t>(cells[1], line_no);
    row.f_value = parse_cell<double>(cells[2], line_no);
    row.f_star = parse_cell<double>(cells[3], line_no);
    row.regret = parse_cell<double>(cells[4], line_no);
    std::optional<double>* optional_fields[] = {&row.scalar_regret_cum, &row.pseudo_regret_gap,
                                                &row.user_utility, &row.item_gini};
    for (std::size_t k = 0; k < 4; ++k) {
      if (!cells[5 + k].empty()) *optional_fields[k] = parse_cell<double>(cells[5 + k], line_no);
    }
    row.wall_clock_ns = parse_cell<std::int64_t>(cells[9], line_no);
    rows.push_back(row);
  }
  return rows;
}

std::vector<AggregateRow> aggregate_metrics(const std::vector<RunMetrics>& runs) {
  std::vector<AggregateRow> out;
  if (runs.empty()) return out;
  const std::size_t count = runs.front().size();
  for (const RunMetrics& run : runs) {
    if (run.size() != count) throw ArgumentError("runs log different numbers of rows");
  }
  const double n = static_cast<double>(runs.size());
  for (std::size_t r = 0; r < count; ++r) {
    AggregateRow agg;
    agg.step = runs.front()[r].step;
    agg.seeds = runs.size();
    for (std::size_t c = 0; c < kMetricValueColumns.size(); ++c) {
      double sum = 0.0;
      bool present = true;
      for (const RunMetrics& run : runs) {
        if (run[r].step != agg.step) throw ArgumentError("runs log different steps");
        const auto v = metric_values(run[r])[c];
        if (!v) {
          present = false;
          break;
        }
        sum += *v;
      }
      if (!present) continue;
      const double mean = sum / n;
      double sq = 0.0;
      for (const RunMetrics& run : runs) {
        const double d = *metric_values(run[r])[c] - mean;
        sq += d * d;
      }
      agg.mean[c] = mean;
      agg.stderr_[c] = runs.size() > 1 ? std::sqrt(sq / (n - 1.0)) / std::sqrt(n) : 0.0;
    }
    out.push_back(agg);
  }
  return out;
}

void write_aggregate_csv(std::ostream& out, const std::vector<AggregateRow>& rows) {
  out << "step,seeds";
  for (std::string_view c : kMetricValueColumns) out << ',' << c << "_mean," << c << "_stderr";
  out << '\n';
  for (const AggregateRow& row : rows) {
    out << row.step << ',' << row.seeds;
    for (std::size_t c = 0; c < kMetricValueColumns.size(); ++c) {
      for (const auto* value : {&row.mean[c], &row.stderr_[c]}) {
        out << ',';
        if (*value) {
          if (!std::isfinite(**value)) throw NumericError("non-finite aggregate value");
          write_double(out, **value);
        }
      }
    }
    out << '\n';
  }
}

const KnownRewardModel& EnvironmentHandle::model() const {
  if (synthetic) return *synthetic;
  if (lowrank) return *lowrank;
  throw ContractError("environment handle is empty");
}

std::uint64_t environment_seed(const RunConfig& cfg, std::uint64_t run_seed) {
  if (cfg.env.kind == EnvKind::lowrank) return cfg.env.factor_seed;
  return cfg.env.seed.value_or(run_seed);
}

EnvironmentHandle build_environment(const RunConfig& cfg, std::uint64_t run_seed) {
  EnvironmentHandle handle;
  handle.seed = environment_seed(cfg, run_seed);
  if (cfg.env.kind == EnvKind::synthetic) {
    SyntheticMOConfig sc = cfg.env.synthetic;
    sc.seed = handle.seed;
    handle.synthetic = std::make_shared<const SyntheticMOEnv>(sc);
    return handle;
  }
  LowRankFactors factors =
      cfg.env.factors ? load_factors(*cfg.env.factors)
                      : generate_lowrank_factors(cfg.env.users, cfg.env.items, cfg.env.latent_dim,
                                                 cfg.env.factor_seed);
  const auto m = static_cast<std::size_t>(factors.items.rows());
  if (m != cfg.env.items || static_cast<std::size_t>(factors.items.cols()) != cfg.env.latent_dim) {
    throw ConfigError("factor file does not match env.items / env.latent_dim");
  }
  handle.lowrank = std::make_shared<const LowRankEnv>(
      std::move(factors), cfg.env.k_bar, position_weights(cfg.env.positions, cfg.env.k_bar, m));
  return handle;
}

OracleSummary compute_oracle(const RunConfig& cfg, const EnvironmentHandle& env) {
  const ObjectiveSpec objective = build_objective(cfg);
  const OracleResult r =
      oracle_fstar(env.model(), objective, cfg.oracle.max_iters, cfg.oracle.tolerance);
  OracleSummary s;
  s.env_seed = env.seed;
  s.f_star = r.value;
  s.gap = r.gap;
  s.upper_bound = r.upper_bound;
  s.iterations = r.iterations;
  return s;
}

namespace {

void throw_if_invalid(const RunConfig& cfg) {
  const std::vector<std::string> violations = validate_config(cfg);
  if (violations.empty()) return;
  std::string message = "invalid configuration:";
  for (const std::string& v : violations) message += "\n  " + v;
  throw ConfigError(message);
}

LinUCBConfig linucb_config(const AlgorithmConfig& a, double default_d_theta) {
  LinUCBConfig lc;
  lc.delta_prime = a.delta_prime;
  lc.lambda = a.lambda;
  lc.d_theta = a.d_theta.value_or(default_d_theta);
  lc.reward_half_width = a.reward_half_width;
  lc.exploration_scale = a.exploration_scale;
  return lc;
}

class RowLogger {
 public:
  RowLogger(const RunConfig& cfg, const RowSink& sink, RunMetrics& rows)
      : cfg_(cfg), sink_(sink), rows_(rows), start_(std::chrono::steady_clock::now()) {}

  void maybe_log(const MetricsTracker& tracker, const FWState& state) {
    if (state.tau % cfg_.metrics_stride != 0 && state.tau != cfg_.steps) return;
    std::int64_t ns = 0;
    if (cfg_.record_timing) {
      ns = std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() -
                                                                start_)
               .count();
    }
    MetricsRow row = tracker.row(state, ns);
    for (const auto& v : metric_values(row)) {
      if (v && !std::isfinite(*v)) {
        throw NumericError("non-finite metric at step " + std::to_string(row.step));
      }
    }
    if (sink_) sink_(row);
    rows_.push_back(std::move(row));
  }

 private:
  const RunConfig& cfg_;
  const RowSink& sink_;
  RunMetrics& rows_;
  std::chrono::steady_clock::time_point start_;
};

RunResult run_synthetic(const RunConfig& cfg, std::uint64_t seed, const SyntheticMOEnv& env,
                        double f_star, const RowSink& sink) {
  const ObjectiveSpec objective = build_objective(cfg);
  SmoothingConfig smoothing = cfg.smoothing;
  smoothing.rng_seed = Rng(seed).split("smoothing").key();
  smoothing.validate(objective);
  GradientOracle gradient(objective, smoothing);

  const SyntheticMOConfig& ec = env.config();
  const AlgorithmConfig& a = cfg.algorithm;
  std::unique_ptr<ScalarReduction> bandit;
  switch (a.kind) {
    case AlgorithmKind::fw_linucb: {
      const double default_d_theta =
          std::sqrt(static_cast<double>(ec.reward_dim * ec.context_dim));
      bandit = std::make_unique<FwLinUcb>(ec.reward_dim, ec.context_dim,
                                          linucb_config(a, default_d_theta));
      break;
    }
    case AlgorithmKind::fw_squarecb: {
      SquareCBConfig sc;
      sc.mode = a.squarecb_mode;
      sc.gamma0 = a.gamma0;
      sc.lipschitz = objective.lipschitz;
      sc.arm_count = ec.arm_count;
      sc.d_k = objective.box.diameter;
      bandit = std::make_unique<FwRegressionBandit>(FwRegressionBandit::squarecb(
          ec.reward_dim, ec.context_dim, a.lambda, sc, a.delta_prime));
      break;
    }
    case AlgorithmKind::fw_eps_greedy:
      bandit = std::make_unique<FwRegressionBandit>(FwRegressionBandit::epsilon_greedy(
          ec.reward_dim, ec.context_dim, a.lambda, a.epsilon));
      break;
    default:
      throw ConfigError("ranking algorithm on the synthetic environment");
  }

  RunResult result;
  result.seed = seed;
  const Rng run = Rng(seed).split("run");
  FWState state = fw_initial_state(objective.box);
  MetricsTracker tracker(objective, f_star, seed, ec.reward_dim);
  RowLogger logger(cfg, sink, result.rows);
  for (std::size_t tau = 1; tau <= cfg.steps; ++tau) {
    const SyntheticStep step = synthetic_mo_step(env, run, tau);
    Rng policy = run.split("policy", tau);
    const FWStepResult fw = fw_step(state, gradient, *bandit, *step.context, policy);
    Rng noise = run.split("reward", tau);
    const Eigen::VectorXd reward =
        env.sample_reward(step.context_index, fw.arm, noise, &result.clamped_rewards);
    bandit->observe(fw.gradient, *step.context, fw.arm, reward);
    const Eigen::VectorXd expected = step.means->col(static_cast<Eigen::Index>(fw.arm));
    const double best_linear = (step.means->transpose() * fw.gradient).maxCoeff();
    state = fw_update(std::move(state), reward, objective.box);
    tracker.observe(state, reward, &fw.gradient, &expected, best_linear);
    logger.maybe_log(tracker, state);
  }
  result.clamped_smoothing = gradient.clamped_samples();
  result.final_state = std::move(state);
  return result;
}

RankingAlgorithm ranking_algorithm(AlgorithmKind kind) {
  switch (kind) {
    case AlgorithmKind::fw_linucbrank: return RankingAlgorithm::fw_linucbrank;
    case AlgorithmKind::linucbrank: return RankingAlgorithm::linucbrank;
    case AlgorithmKind::unbiased_linucbrank: return RankingAlgorithm::unbiased_linucbrank;
    case AlgorithmKind::fairlearn: return RankingAlgorithm::fairlearn;
    default: throw ConfigError("not a ranking algorithm");
  }
}

RunResult run_lowrank(const RunConfig& cfg, std::uint64_t seed, const LowRankEnv& env,
                      double f_star, const RowSink& sink) {
  const ObjectiveSpec objective = build_objective(cfg);
  SmoothingConfig smoothing = cfg.smoothing;
  smoothing.rng_seed = Rng(seed).split("smoothing").key();
  smoothing.validate(objective);

  RankingLearnerConfig rc;
  rc.algorithm = ranking_algorithm(cfg.algorithm.kind);
  rc.linucb = linucb_config(cfg.algorithm, std::sqrt(static_cast<double>(env.latent_dim())));
  rc.k_bar = env.k_bar();
  rc.fairlearn_c = cfg.algorithm.fairlearn_c;
  rc.fairlearn_alpha = cfg.algorithm.fairlearn_alpha;
  RankingLearner learner(rc, env.item_count(), env.feature_dim(), objective, smoothing);
  const bool has_gradient = rc.algorithm == RankingAlgorithm::fw_linucbrank;

  RunResult result;
  result.seed = seed;
  const Rng run = Rng(seed).split("run");
  MetricsTracker tracker(objective, f_star, seed, env.reward_dim());
  RowLogger logger(cfg, sink, result.rows);
  for (std::size_t tau = 1; tau <= cfg.steps; ++tau) {
    const LowRankStep step = lowrank_step(env, run, tau);
    const PermutationAction action = learner.choose(*step.features);
    Rng clicks = run.split("clicks", tau);
    const RankingFeedback feedback = pbm_sample(action, step.pbm, clicks);
    const Eigen::VectorXd reward = learner.observe(*step.features, action, feedback);
    const Eigen::VectorXd expected = env.expected_reward(step.user, action);
    if (has_gradient) {
      const Eigen::VectorXd& g = learner.last_gradient();
      tracker.observe(learner.fw_state(), reward, &g, &expected,
                      env.user_best_response(step.user, g).value);
    } else {
      tracker.observe(learner.fw_state(), reward, nullptr, &expected, std::nullopt);
    }
    logger.maybe_log(tracker, learner.fw_state());
  }
  result.final_state = learner.fw_state();
  return result;
}

std::string seed_file_name(const RunConfig& cfg, std::uint64_t seed) {
  return cfg.name + "_seed" + std::to_string(seed) + ".csv";
}

void commit_file(const std::filesystem::path& partial, const std::filesystem::path& final_path) {
  std::filesystem::rename(partial, final_path);
}

}  // namespace

RunResult run_single(const RunConfig& cfg, std::uint64_t seed, const EnvironmentHandle& env,
                     double f_star, const RowSink& sink) {
  throw_if_invalid(cfg);
  if (cfg.env.kind == EnvKind::synthetic) {
    if (!env.synthetic) throw ContractError("synthetic configuration needs a synthetic environment");
    return run_synthetic(cfg, seed, *env.synthetic, f_star, sink);
  }
  if (!env.lowrank) throw ContractError("lowrank configuration needs a lowrank environment");
  return run_lowrank(cfg, seed, *env.lowrank, f_star, sink);
}

std::string oracle_json(const RunConfig& cfg, const std::vector<OracleSummary>& oracles) {
  nlohmann::json j;
  j["name"] = cfg.name;
  j["config_hash"] = cfg.hash;
  nlohmann::json list = nlohmann::json::array();
  for (const OracleSummary& o : oracles) {
    list.push_back({{"env_seed", o.env_seed},
                    {"f_star", o.f_star},
                    {"gap", o.gap},
                    {"upper_bound", o.upper_bound},
                    {"iterations", o.iterations}});
  }
  if (oracles.size() == 1) {
    j["f_star"] = oracles.front().f_star;
    j["gap"] = oracles.front().gap;
  }
  j["oracles"] = list;
  return j.dump(2) + "\n";
}

ExperimentResult run_experiment(RunConfig cfg, const ExperimentOptions& options) {
  if (options.seeds) cfg.seeds = *options.seeds;
  if (options.out_dir) cfg.output_path = *options.out_dir;
  cfg.hash = config_hash(cfg);
  throw_if_invalid(cfg);
  std::filesystem::create_directories(cfg.output_path);

  const std::size_t n = cfg.seeds.size();
  const bool shared_env = cfg.env.kind == EnvKind::lowrank || cfg.env.seed.has_value();
  EnvironmentHandle shared;
  OracleSummary shared_oracle;
  if (shared_env) {
    shared = build_environment(cfg, cfg.seeds.front());
    shared_oracle = compute_oracle(cfg, shared);
  }

  ExperimentResult result;
  result.runs.resize(n);
  result.seed_files.resize(n);
  std::vector<OracleSummary> oracles(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};

  auto worker = [&]() {
    for (std::size_t i = next++; i < n; i = next++) {
      const std::uint64_t seed = cfg.seeds[i];
      const std::filesystem::path final_path = cfg.output_path / seed_file_name(cfg, seed);
      std::filesystem::path partial = final_path;
      partial += ".partial";
      try {
        EnvironmentHandle env = shared_env ? shared : build_environment(cfg, seed);
        oracles[i] = shared_env ? shared_oracle : compute_oracle(cfg, env);
        std::ofstream out(partial);
        if (!out) throw std::runtime_error("cannot write " + partial.string());
        write_metrics_header(out);
        result.runs[i] = run_single(cfg, seed, env, oracles[i].f_star,
                                    [&](const MetricsRow& row) { write_metrics_row(out, row); });
        out.close();
        if (!out) throw std::runtime_error("failed writing " + partial.string());
        commit_file(partial, final_path);
        result.seed_files[i] = final_path;
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };

  const std::size_t width = std::max<std::size_t>(1, std::min(options.workers, n));
  if (width == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(width);
    for (std::size_t w = 0; w < width; ++w) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::vector<RunMetrics> all;
  all.reserve(n);
  for (const RunResult& r : result.runs) all.push_back(r.rows);
  result.aggregate_file = cfg.output_path / (cfg.name + "_aggregate.csv");
  {
    std::filesystem::path partial = result.aggregate_file;
    partial += ".partial";
    std::ofstream out(partial);
    write_aggregate_csv(out, aggregate_metrics(all));
    out.close();
    commit_file(partial, result.aggregate_file);
  }

  if (shared_env) {
    result.oracles = {shared_oracle};
  } else {
    std::map<std::uint64_t, OracleSummary> unique;
    for (const OracleSummary& o : oracles) unique.emplace(o.env_seed, o);
    for (std::uint64_t seed : cfg.seeds) {
      if (auto it = unique.find(environment_seed(cfg, seed)); it != unique.end()) {
        result.oracles.push_back(it->second);
        unique.erase(it);
      }
    }
  }
  result.oracle_file = cfg.output_path / (cfg.name + "_oracle.json");
  std::ofstream(result.oracle_file) << oracle_json(cfg, result.oracles);
  return result;
}

}  // namespace cbcr
