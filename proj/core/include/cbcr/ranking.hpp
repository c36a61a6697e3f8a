#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "cbcr/fw_engine.hpp"
#include "cbcr/objectives.hpp"
#include "cbcr/rng.hpp"
#include "cbcr/scalar_bandits.hpp"

namespace cbcr {

/// A ranking of m items; `ranking[k]` is the (0-based) item shown at rank k + 1.
/// Only the top k̄ = ranking.size() slots carry exposure.
struct PermutationAction {
  std::size_t m = 0;
  std::vector<std::size_t> ranking;

  std::size_t k_bar() const { return ranking.size(); }
  /// 0-based rank of item i, or nullopt when unranked.
  std::optional<std::size_t> rank_of(std::size_t item) const;
  /// m × m permutation matrix a_{i,k}; unranked items fill the slots below k̄ in index order.
  Eigen::MatrixXd matrix() const;
  /// Throws ArgumentError when entries repeat or exceed m.
  void validate() const;
};

/// Position-based model: exposure probability b_k at rank k, click probability v_i when exposed.
struct PBMParams {
  Eigen::VectorXd b;
  Eigen::VectorXd v;

  /// Checks 1 ≥ b₁ ≥ … ≥ b_k̄ ≥ 0 = b_{k̄+1} = … and v ∈ [0,1]^m.
  void validate(std::size_t k_bar) const;
};

struct RankingFeedback {
  std::vector<std::uint8_t> exposed;
  std::vector<std::uint8_t> clicks;
};

/// Ranks items by g_{m+1}·v̂_i + g_i (descending, ties to the lower index) and keeps the top k̄.
PermutationAction topk_fw_action(const Eigen::VectorXd& grad, const Eigen::VectorXd& v_hat,
                                 std::size_t k_bar);

/// Expected linear value ⟨g, μ̂ a⟩ = Σ_i b_{rank(i)} (g_i + g_{m+1} v̂_i).
double ranking_linear_value(const Eigen::VectorXd& grad, const Eigen::VectorXd& v_hat,
                            const Eigen::VectorXd& b, const PermutationAction& action);

/// v̂_i = θ̂ᵀx_i + α‖x_i‖_{V⁻¹} for the rows x_i of `item_features` (m × d).
Eigen::VectorXd ranking_ucb(const RidgeState& state, const Eigen::MatrixXd& item_features,
                            double alpha);
/// Same with a per-item multiplier on the bonus.
Eigen::VectorXd ranking_ucb(const RidgeState& state, const Eigen::MatrixXd& item_features,
                            double alpha, const Eigen::VectorXd& bonus_factors);

/// e_i ~ Bern(b_{rank(i)}) independently, c_i ~ Bern(v_i) when exposed.
RankingFeedback pbm_sample(const PermutationAction& action, const PBMParams& params, Rng& rng);

/// r_i = e_i (i ≤ m), r_{m+1} = Σ c_i. Throws ContractError on a click without exposure.
Eigen::VectorXd ranking_reward(const RankingFeedback& feedback);

/// V += Σ e_i x_i x_iᵀ, y += Σ c_i x_i, t += 1.
RidgeState ranking_ridge_update(RidgeState state, const Eigen::MatrixXd& item_features,
                                const RankingFeedback& feedback);

/// η_i = 1 − N_i / ((1/k̄) Σ_j N_j); η ≡ 1 before any exposure.
Eigen::VectorXd unbiased_fairness_factor(const Eigen::VectorXd& exposure_counts,
                                         std::size_t k_bar);

/// Slot-by-slot FairLearn ranking at round t (1-based): an unchosen item with
/// ⌊ct⌋ − N_i > α − 1 is urgent; the most starved urgent item takes the slot,
/// otherwise the highest-UCB unchosen item does.
PermutationAction fairlearn_rank(const Eigen::VectorXd& counts, std::size_t t, double c,
                                 double alpha_tol, const Eigen::VectorXd& ucb_scores,
                                 std::size_t k_bar);

/// Reward set of the ranking problem: [0,1]^m × [0, k̄], diameter √(k̄(k̄+2)).
RewardBox ranking_reward_box(std::size_t m, std::size_t k_bar);

enum class RankingAlgorithm { fw_linucbrank, linucbrank, unbiased_linucbrank, fairlearn };

std::string_view to_string(RankingAlgorithm algorithm);

struct RankingLearnerConfig {
  RankingAlgorithm algorithm = RankingAlgorithm::fw_linucbrank;
  LinUCBConfig linucb;  ///< δ' is the overall level; the UCB uses δ'/3
  std::size_t k_bar = 1;
  double fairlearn_c = 0.0;
  double fairlearn_alpha = 1.0;

  /// Throws ArgumentError / ConfigError on infeasible settings.
  void validate(std::size_t m) const;
};

/// Ranking learner state: ridge statistics, FW state, exposure/selection counts.
class RankingLearner {
 public:
  RankingLearner(RankingLearnerConfig cfg, std::size_t m, std::size_t feature_dim,
                 ObjectiveSpec objective, SmoothingConfig smoothing,
                 const std::optional<Eigen::VectorXd>& s0 = std::nullopt);

  /// Chooses the ranking for the next round from item features (m × d).
  PermutationAction choose(const Eigen::MatrixXd& item_features);
  /// Feeds back the round's outcome; returns the reward vector.
  Eigen::VectorXd observe(const Eigen::MatrixXd& item_features, const PermutationAction& action,
                          const RankingFeedback& feedback);

  const RankingLearnerConfig& config() const { return cfg_; }
  const FWState& fw_state() const { return fw_; }
  const RidgeState& ridge() const { return ridge_; }
  const ObjectiveSpec& objective() const { return gradient_.spec(); }
  /// g_τ used by the last FW choice; empty for baselines.
  const Eigen::VectorXd& last_gradient() const { return gradient_value_; }
  const Eigen::VectorXd& last_ucb() const { return ucb_; }
  const Eigen::VectorXd& exposure_counts() const { return exposure_counts_; }
  const Eigen::VectorXd& selection_counts() const { return selection_counts_; }

 private:
  RankingLearnerConfig cfg_;
  std::size_t m_;
  GradientOracle gradient_;
  RidgeState ridge_;
  FWState fw_;
  Eigen::VectorXd exposure_counts_;
  Eigen::VectorXd selection_counts_;
  Eigen::VectorXd gradient_value_;
  Eigen::VectorXd ucb_;
};

struct RankingStepResult {
  PermutationAction action;
  RankingFeedback feedback;
  Eigen::VectorXd reward;
};

/// Full round: UCB with α(δ'/3) → top-k̄ of the FW scores (or the baseline
/// rule) → PBM sampling from `truth` → reward → FW and ridge updates.
RankingStepResult fw_linucbrank_step(RankingLearner& learner, const Eigen::MatrixXd& item_features,
                                     const PBMParams& truth, Rng& rng);

}  // namespace cbcr
