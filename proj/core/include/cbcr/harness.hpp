#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string_view>
#include <vector>

#include "cbcr/config.hpp"
#include "cbcr/environments.hpp"
#include "cbcr/fw_engine.hpp"

namespace cbcr {

/// Column order of every per-seed metrics CSV.
inline constexpr std::array<std::string_view, 10> kMetricsColumns = {
    "step",         "seed",           "f_value",           "f_star",
    "regret",       "scalar_regret_cum", "pseudo_regret_gap", "user_utility",
    "item_gini",    "wall_clock_ns"};

/// Numeric metric columns (everything but step and seed), in CSV order.
inline constexpr std::array<std::string_view, 8> kMetricValueColumns = {
    "f_value",      "f_star",       "regret",    "scalar_regret_cum", "pseudo_regret_gap",
    "user_utility", "item_gini",    "wall_clock_ns"};

std::array<std::optional<double>, 8> metric_values(const MetricsRow& row);

void write_metrics_header(std::ostream& out);
/// Writes one row; absent optional fields are empty cells. Throws NumericError
/// when any present value is NaN or infinite.
void write_metrics_row(std::ostream& out, const MetricsRow& row);
/// Parses a per-seed metrics CSV. Throws FormatError on schema mismatches.
RunMetrics read_metrics_csv(const std::filesystem::path& path);

/// Mean and standard error across seeds of every metric at one logged step.
struct AggregateRow {
  std::size_t step = 0;
  std::size_t seeds = 0;
  std::array<std::optional<double>, 8> mean;
  std::array<std::optional<double>, 8> stderr_;
};

/// Aggregates runs that share their logged steps; a column is present only
/// when every run has it at that step.
std::vector<AggregateRow> aggregate_metrics(const std::vector<RunMetrics>& runs);
void write_aggregate_csv(std::ostream& out, const std::vector<AggregateRow>& rows);

/// The environment of a run: exactly one of the two pointers is set.
struct EnvironmentHandle {
  std::shared_ptr<const SyntheticMOEnv> synthetic;
  std::shared_ptr<const LowRankEnv> lowrank;
  std::uint64_t seed = 0;

  const KnownRewardModel& model() const;
};

/// Seed of the environment used by run `run_seed` (the configured env seed
/// when present, otherwise the run seed; fixed factors for lowrank).
std::uint64_t environment_seed(const RunConfig& cfg, std::uint64_t run_seed);
EnvironmentHandle build_environment(const RunConfig& cfg, std::uint64_t run_seed);

struct OracleSummary {
  std::uint64_t env_seed = 0;
  double f_star = 0.0;
  double gap = 0.0;
  double upper_bound = 0.0;
  std::size_t iterations = 0;
};

OracleSummary compute_oracle(const RunConfig& cfg, const EnvironmentHandle& env);

struct RunResult {
  std::uint64_t seed = 0;
  RunMetrics rows;
  FWState final_state;
  std::size_t clamped_rewards = 0;
  std::size_t clamped_smoothing = 0;
};

using RowSink = std::function<void(const MetricsRow&)>;

/// One seeded run of the configured algorithm. Rows are logged every
/// `metrics_stride` steps and at the last step, and passed to `sink` as produced.
RunResult run_single(const RunConfig& cfg, std::uint64_t seed, const EnvironmentHandle& env,
                     double f_star, const RowSink& sink = {});

struct ExperimentOptions {
  std::optional<std::filesystem::path> out_dir;
  std::optional<std::vector<std::uint64_t>> seeds;
  std::size_t workers = 1;
};

struct ExperimentResult {
  std::vector<RunResult> runs;  ///< in seed order
  std::vector<OracleSummary> oracles;
  std::vector<std::filesystem::path> seed_files;
  std::filesystem::path aggregate_file;
  std::filesystem::path oracle_file;
};

/// Runs every seed on a pool of `workers` threads, writing
/// `<name>_seed<k>.csv` (as `.partial` until complete), `<name>_aggregate.csv`
/// and `<name>_oracle.json` into the output directory.
ExperimentResult run_experiment(RunConfig cfg, const ExperimentOptions& options);

/// Oracle JSON document (f*, FW gap, config hash).
std::string oracle_json(const RunConfig& cfg, const std::vector<OracleSummary>& oracles);

}  // namespace cbcr
