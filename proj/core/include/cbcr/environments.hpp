#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

#include "cbcr/fw_engine.hpp"
#include "cbcr/objectives.hpp"
#include "cbcr/ranking.hpp"
#include "cbcr/rng.hpp"

namespace cbcr {

struct SyntheticMOConfig {
  std::size_t reward_dim = 5;    ///< D
  std::size_t arm_count = 50;    ///< K
  std::size_t context_dim = 10;  ///< d
  double noise_scale = 0.01;     ///< reward variance = noise_scale · (θx)²
  std::size_t pool_size = 10000;
  double reward_upper = 2.0;     ///< rewards are clamped to [0, reward_upper]^D
  std::uint64_t seed = 0;

  void validate() const;
};

/// Multi-objective linear environment: Θ ∈ [0,1]^{D×d}, context-arm vectors with
/// entries N(1/d, 1/d²), reward N(Θx_a, noise_scale·(Θx_a)²) per coordinate,
/// clamped to the reward box. Contexts are replayed i.i.d. from a fixed pool.
class SyntheticMOEnv final : public KnownRewardModel {
 public:
  explicit SyntheticMOEnv(SyntheticMOConfig cfg);

  const SyntheticMOConfig& config() const { return cfg_; }
  const Eigen::MatrixXd& theta() const { return theta_; }
  const RewardBox& box() const { return box_; }
  std::size_t pool_size() const { return pool_.size(); }

  /// Pool index of the context shown at step τ (1-based), from the run stream.
  std::size_t draw_context(const Rng& run, std::size_t tau) const;
  /// Context-arm matrix x (d × K).
  const Eigen::MatrixXd& context(std::size_t index) const { return pool_[index]; }
  /// Expected (clamped) reward of every arm, D × K.
  const Eigen::MatrixXd& mean_rewards(std::size_t index) const { return means_[index]; }
  /// Θx per arm before noise, D × K.
  Eigen::MatrixXd linear_means(std::size_t index) const { return theta_ * pool_[index]; }
  /// Reward of `arm` in context `index`; `clamped` counts coordinates moved into the box.
  Eigen::VectorXd sample_reward(std::size_t index, std::size_t arm, Rng& rng,
                                std::size_t* clamped = nullptr) const;

  std::size_t reward_dim() const override { return cfg_.reward_dim; }
  LinearResponse best_response(const Eigen::VectorXd& g) const override;

 private:
  SyntheticMOConfig cfg_;
  Eigen::MatrixXd theta_;
  std::vector<Eigen::MatrixXd> pool_;
  std::vector<Eigen::MatrixXd> means_;
  RewardBox box_;
};

/// E[clamp(N(mean, sd²), lo, hi)].
double clamped_normal_mean(double mean, double sd, double lo, double hi);

struct SyntheticStep {
  std::size_t context_index = 0;
  const Eigen::MatrixXd* context = nullptr;
  const Eigen::MatrixXd* means = nullptr;
};

/// Fresh context for step τ drawn from the run stream.
SyntheticStep synthetic_mo_step(const SyntheticMOEnv& env, const Rng& run, std::size_t tau);

/// User and item latent factors.
struct LowRankFactors {
  Eigen::MatrixXd users;  ///< n × d'
  Eigen::MatrixXd items;  ///< m × d'
};

/// Reads `kind,id,f0,...,f{d'-1}` rows (kind ∈ {user, item}, ids dense from 0).
/// Throws FormatError with the offending line number.
LowRankFactors load_factors(const std::filesystem::path& path);
/// Writes factors in the same format with round-trip exact decimal values.
void write_factors(const std::filesystem::path& path, const LowRankFactors& factors);
/// Factors with entries uniform on [0, 1/√d'] so that every uᵀv ∈ [0, 1].
LowRankFactors generate_lowrank_factors(std::size_t users, std::size_t items,
                                        std::size_t latent_dim, std::uint64_t seed);

enum class PositionPreset { dcg, logistic };

std::string_view to_string(PositionPreset preset);
PositionPreset position_preset_from_string(std::string_view name);

/// dcg: b_k = 1/log₂(1+k); logistic: b_k = ln 2/(1 + ln k); zero beyond k̄.
Eigen::VectorXd position_weights(PositionPreset preset, std::size_t k_bar, std::size_t m);

/// Low-rank recommendation environment: a user j uniform over [n] arrives each
/// step; item i has features flatten(u_j v_iᵀ) and click probability
/// clamp(u_jᵀv_i, 0, 1). The true parameter is flatten(I_{d'}).
class LowRankEnv final : public KnownRewardModel {
 public:
  LowRankEnv(LowRankFactors factors, std::size_t k_bar, Eigen::VectorXd position_weights);

  std::size_t user_count() const { return static_cast<std::size_t>(factors_.users.rows()); }
  std::size_t item_count() const { return static_cast<std::size_t>(factors_.items.rows()); }
  std::size_t latent_dim() const { return static_cast<std::size_t>(factors_.items.cols()); }
  std::size_t feature_dim() const { return latent_dim() * latent_dim(); }
  std::size_t k_bar() const { return k_bar_; }
  const Eigen::VectorXd& position_weights() const { return b_; }
  const LowRankFactors& factors() const { return factors_; }
  RewardBox box() const { return ranking_reward_box(item_count(), k_bar_); }
  /// flatten(I_{d'}), row-major like the features.
  Eigen::VectorXd true_parameter() const;

  std::size_t draw_user(const Rng& run, std::size_t tau) const;
  /// m × d'² matrix whose rows are flatten(u_j v_iᵀ).
  const Eigen::MatrixXd& item_features(std::size_t user) const { return features_[user]; }
  const Eigen::VectorXd& click_probabilities(std::size_t user) const { return clicks_[user]; }
  PBMParams pbm(std::size_t user) const { return PBMParams{b_, clicks_[user]}; }
  /// Expected reward (exposures b_{rank(i)}, expected clicks) of a ranking.
  Eigen::VectorXd expected_reward(std::size_t user, const PermutationAction& action) const;

  /// max over rankings of ⟨g, μ(x_j) a⟩ for a single user j.
  LinearResponse user_best_response(std::size_t user, const Eigen::VectorXd& g) const;

  std::size_t reward_dim() const override { return item_count() + 1; }
  LinearResponse best_response(const Eigen::VectorXd& g) const override;

 private:
  LowRankFactors factors_;
  std::size_t k_bar_;
  Eigen::VectorXd b_;
  std::vector<Eigen::MatrixXd> features_;
  std::vector<Eigen::VectorXd> clicks_;
};

struct LowRankStep {
  std::size_t user = 0;
  const Eigen::MatrixXd* features = nullptr;
  PBMParams pbm;
};

/// Fresh user for step τ, its item features and the PBM parameters.
LowRankStep lowrank_step(const LowRankEnv& env, const Rng& run, std::size_t tau);

}  // namespace cbcr
