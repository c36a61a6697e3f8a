#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cbcr/environments.hpp"
#include "cbcr/objectives.hpp"
#include "cbcr/ranking.hpp"
#include "cbcr/scalar_bandits.hpp"

namespace cbcr {

enum class EnvKind { synthetic, lowrank };

struct EnvConfig {
  EnvKind kind = EnvKind::synthetic;
  SyntheticMOConfig synthetic;
  /// Synthetic environment seed; when absent each run seed builds its own environment.
  std::optional<std::uint64_t> seed;

  std::size_t users = 50;
  std::size_t items = 20;
  std::size_t latent_dim = 3;
  std::size_t k_bar = 5;
  PositionPreset positions = PositionPreset::dcg;
  /// Factor CSV; when absent factors are generated from `factor_seed`.
  std::optional<std::filesystem::path> factors;
  std::uint64_t factor_seed = 0;
};

struct ObjectiveConfig {
  ObjectiveKind kind = ObjectiveKind::ggf;
  /// ggf / linear weights; ggf defaults to w_i = 1/2^(i-1).
  std::optional<std::vector<double>> weights;
  double trade_off = 0.0;
  double welfare_exponent = 0.5;
  std::optional<double> lipschitz;
};

enum class AlgorithmKind {
  fw_linucb,
  fw_squarecb,
  fw_eps_greedy,
  fw_linucbrank,
  linucbrank,
  unbiased_linucbrank,
  fairlearn
};

std::string_view to_string(AlgorithmKind kind);
AlgorithmKind algorithm_kind_from_string(std::string_view name);
bool is_ranking_algorithm(AlgorithmKind kind);

struct AlgorithmConfig {
  AlgorithmKind kind = AlgorithmKind::fw_linucb;
  double lambda = 0.1;
  double delta_prime = 0.1;
  double exploration_scale = 1.0;
  std::optional<double> d_theta;
  double reward_half_width = 0.5;
  double gamma0 = 1e3;
  SquareCBMode squarecb_mode = SquareCBMode::empirical;
  double epsilon = 0.01;
  double fairlearn_c = 0.0;
  double fairlearn_alpha = 1.0;
};

struct OracleConfig {
  std::size_t max_iters = 5000;
  double tolerance = 1e-6;
};

/// Everything needed to run a batch of seeds.
struct RunConfig {
  std::string name = "run";
  EnvConfig env;
  ObjectiveConfig objective;
  SmoothingConfig smoothing;
  AlgorithmConfig algorithm;
  std::size_t steps = 1000;
  std::vector<std::uint64_t> seeds{0};
  std::size_t metrics_stride = 100;
  std::filesystem::path output_path = "out";
  bool record_timing = true;
  OracleConfig oracle;
  /// Hex digest of the canonical JSON form of the parsed configuration.
  std::string hash;
};

/// Parses a JSON configuration. Throws ConfigError listing every malformed field.
RunConfig parse_config(std::string_view json_text);
RunConfig load_config(const std::filesystem::path& path);
/// Canonical JSON form (sorted keys) of a configuration; the hash is computed from it.
std::string canonical_config(const RunConfig& cfg);
/// 64-bit FNV-1a digest of canonical_config, as 16 hex digits.
std::string config_hash(const RunConfig& cfg);

/// Cross-field checks; returns every violation (empty when valid).
std::vector<std::string> validate_config(const RunConfig& cfg);

/// Parses "0..9" (inclusive range) or "1,2,5".
std::vector<std::uint64_t> parse_seed_list(std::string_view text);

/// Objective of a configuration, bound to the environment's reward box.
ObjectiveSpec build_objective(const RunConfig& cfg);
/// Reward box of the configured environment.
RewardBox environment_box(const RunConfig& cfg);

}  // namespace cbcr
