#include <algorithm>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "cbcr/config.hpp"
#include "cbcr/errors.hpp"
#include "cbcr/harness.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

std::size_t worker_count(std::size_t requested) {
  if (const char* env = std::getenv("CBCR_WORKERS"); env != nullptr && *env != '\0') {
    try {
      const long value = std::stol(env);
      if (value >= 1) return static_cast<std::size_t>(value);
    } catch (const std::exception&) {
    }
    throw cbcr::ConfigError("CBCR_WORKERS must be a positive integer");
  }
  return requested;
}

cbcr::RunConfig load(const std::string& path, const std::optional<std::string>& seeds) {
  cbcr::RunConfig cfg = cbcr::load_config(path);
  if (seeds) {
    try {
      cfg.seeds = cbcr::parse_seed_list(*seeds);
    } catch (const cbcr::ArgumentError& e) {
      throw cbcr::ConfigError(std::string("--seeds: ") + e.what());
    }
    cfg.hash = cbcr::config_hash(cfg);
  }
  return cfg;
}

int run_command(const std::string& config_path, const std::optional<std::string>& seeds,
                const std::optional<std::string>& out_dir, std::size_t workers) {
  cbcr::RunConfig cfg = load(config_path, seeds);
  cbcr::ExperimentOptions options;
  if (out_dir) options.out_dir = *out_dir;
  options.workers = worker_count(workers);
  const cbcr::ExperimentResult result = cbcr::run_experiment(cfg, options);
  for (const cbcr::RunResult& run : result.runs) {
    const cbcr::MetricsRow& last = run.rows.back();
    std::cout << "seed " << run.seed << ": f(s_T) = " << last.f_value << ", f* = " << last.f_star
              << ", regret = " << last.regret;
    if (run.clamped_rewards > 0) std::cout << ", clamped reward coordinates = " << run.clamped_rewards;
    std::cout << '\n';
  }
  std::cout << "aggregate: " << result.aggregate_file.string() << '\n'
            << "oracle: " << result.oracle_file.string() << '\n';
  return kExitOk;
}

int oracle_command(const std::string& config_path, const std::optional<std::string>& seeds) {
  const cbcr::RunConfig cfg = load(config_path, seeds);
  const std::vector<std::string> violations = cbcr::validate_config(cfg);
  if (!violations.empty()) {
    for (const std::string& v : violations) std::cerr << "config: " << v << '\n';
    return kExitConfig;
  }
  std::vector<cbcr::OracleSummary> oracles;
  std::vector<std::uint64_t> done;
  for (std::uint64_t seed : cfg.seeds) {
    const std::uint64_t env_seed = cbcr::environment_seed(cfg, seed);
    if (std::find(done.begin(), done.end(), env_seed) != done.end()) continue;
    done.push_back(env_seed);
    oracles.push_back(cbcr::compute_oracle(cfg, cbcr::build_environment(cfg, seed)));
  }
  std::cout << cbcr::oracle_json(cfg, oracles);
  return kExitOk;
}

int validate_command(const std::string& config_path) {
  const cbcr::RunConfig cfg = cbcr::load_config(config_path);
  const std::vector<std::string> violations = cbcr::validate_config(cfg);
  if (violations.empty()) {
    std::cout << "ok (" << cfg.hash << ")\n";
    return kExitOk;
  }
  for (const std::string& v : violations) std::cout << "violation: " << v << '\n';
  return kExitConfig;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Contextual bandits with concave rewards: simulator and f* oracle"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::string> seeds;
  std::optional<std::string> out_dir;
  std::size_t workers = 1;

  CLI::App* run = app.add_subcommand("run", "Run every seed of a configuration and write metrics");
  run->add_option("--config", config_path, "JSON configuration")->required();
  run->add_option("--seeds", seeds, "Seeds as a range 0..9 or a list 1,2,5");
  run->add_option("--out", out_dir, "Output directory (overrides output_path)");
  run->add_option("--workers", workers, "Parallel runs (CBCR_WORKERS overrides)")
      ->check(CLI::PositiveNumber);

  CLI::App* oracle = app.add_subcommand("oracle", "Compute f* and its certified gap");
  oracle->add_option("--config", config_path, "JSON configuration")->required();
  oracle->add_option("--seeds", seeds, "Seeds as a range 0..9 or a list 1,2,5");

  CLI::App* validate = app.add_subcommand("validate", "Check a configuration");
  validate->add_option("--config", config_path, "JSON configuration")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (run->parsed()) return run_command(config_path, seeds, out_dir, workers);
    if (oracle->parsed()) return oracle_command(config_path, seeds);
    return validate_command(config_path);
  } catch (const cbcr::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << '\n';
    return kExitRuntime;
  }
}
