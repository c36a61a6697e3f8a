#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string_view>
#include <vector>

#include "cbcr/objectives.hpp"
#include "cbcr/rng.hpp"
#include "cbcr/scalar_bandits.hpp"

namespace cbcr {

/// Running state of a CBCR algorithm.
struct FWState {
  std::size_t dim = 0;
  Eigen::VectorXd s_hat;       ///< ŝ_τ, average observed reward
  Eigen::VectorXd z;           ///< z_τ, FW iterate (= ŝ_τ when ρ_τ = r_τ)
  std::size_t tau = 0;
  Eigen::VectorXd cum_reward;  ///< Σ r_τ
  double cum_scalar_regret = 0.0;
};

/// Initial state; ŝ₀ = z₀ = `s0` or the lower corner of the box.
FWState fw_initial_state(const RewardBox& box,
                         const std::optional<Eigen::VectorXd>& s0 = std::nullopt);

/// ŝ ← ŝ + (r − ŝ)/τ and z ← z + (ρ − z)/τ with ρ = r unless `direction` is given.
/// Throws ContractError when r leaves the box by more than 1e-9.
FWState fw_update(FWState state, const Eigen::VectorXd& reward, const RewardBox& box,
                  const Eigen::VectorXd* direction = nullptr);

/// Gradient-extended context x̃ = [g₁x; …; g_D x] of size (D·d) × K.
/// With θ̃ = row-major flatten(Θ) for Θ ∈ R^{D×d}: ⟨g, Θ x a⟩ = ⟨θ̃, x̃ a⟩.
struct ExtendedContext {
  Eigen::VectorXd g;
  Eigen::MatrixXd x;
  Eigen::MatrixXd stacked;

  static ExtendedContext build(const Eigen::VectorXd& g, const Eigen::MatrixXd& x);
};

/// Row-major flattening of a D × d parameter, matching ExtendedContext::stacked.
Eigen::VectorXd flatten_parameter(const Eigen::MatrixXd& theta);

/// Probability vector over arms; `point_mass` marks deterministic choices.
struct ActionDistribution {
  Eigen::VectorXd probabilities;
  std::size_t greedy = 0;
  bool point_mass = false;

  static ActionDistribution deterministic(std::size_t arms, std::size_t arm);
  static ActionDistribution from_probabilities(Eigen::VectorXd p);
};

/// Inverse-CDF draw; point masses consume no randomness.
std::size_t sample_action(const ActionDistribution& dist, Rng& rng);

/// A scalar bandit seen through the FW reduction: it receives the current
/// gradient g_τ and base context x (d × K) and returns a distribution over arms.
class ScalarReduction {
 public:
  virtual ~ScalarReduction() = default;
  virtual ActionDistribution distribution(const Eigen::VectorXd& g, const Eigen::MatrixXd& x) = 0;
  virtual void observe(const Eigen::VectorXd& g, const Eigen::MatrixXd& x, std::size_t arm,
                       const Eigen::VectorXd& reward) = 0;
  virtual std::string_view name() const = 0;
};

/// FW-LinUCB: LinUCB on the extended context, scalar reward ⟨g, r⟩.
class FwLinUcb final : public ScalarReduction {
 public:
  /// `cfg.delta_prime` is the overall δ'; the confidence radius uses δ'/2.
  FwLinUcb(std::size_t reward_dim, std::size_t context_dim, LinUCBConfig cfg);

  ActionDistribution distribution(const Eigen::VectorXd& g, const Eigen::MatrixXd& x) override;
  void observe(const Eigen::VectorXd& g, const Eigen::MatrixXd& x, std::size_t arm,
               const Eigen::VectorXd& reward) override;
  std::string_view name() const override { return "fw_linucb"; }

  const LinUcb& engine() const { return engine_; }

 private:
  LinUcb engine_;
  Eigen::MatrixXd stacked_;
};

/// Oracle-based reductions (SquareCB or ε-greedy) on scores ⟨g, μ̂(x)a⟩ from a
/// multi-output ridge regression of the reward vector.
class FwRegressionBandit final : public ScalarReduction {
 public:
  enum class Rule { squarecb, epsilon_greedy };

  static FwRegressionBandit squarecb(std::size_t reward_dim, std::size_t context_dim,
                                     double lambda, SquareCBConfig cfg, double delta_prime);
  static FwRegressionBandit epsilon_greedy(std::size_t reward_dim, std::size_t context_dim,
                                           double lambda, double epsilon);

  ActionDistribution distribution(const Eigen::VectorXd& g, const Eigen::MatrixXd& x) override;
  void observe(const Eigen::VectorXd& g, const Eigen::MatrixXd& x, std::size_t arm,
               const Eigen::VectorXd& reward) override;
  std::string_view name() const override {
    return rule_ == Rule::squarecb ? "fw_squarecb" : "fw_eps_greedy";
  }

  const MultiOutputRidge& regression() const { return regression_; }

 private:
  FwRegressionBandit(Rule rule, std::size_t reward_dim, std::size_t context_dim, double lambda);

  Rule rule_;
  MultiOutputRidge regression_;
  SquareCBConfig squarecb_;
  double delta_prime_ = 0.1;
  double epsilon_ = 0.0;
  std::size_t rounds_ = 0;
};

struct FWStepResult {
  Eigen::VectorXd gradient;  ///< g_τ
  ActionDistribution distribution;
  std::size_t arm = 0;
};

/// One decision: g_τ = ∇f_{τ−1}(z_{τ−1}), then the bandit's distribution and a sampled arm.
FWStepResult fw_step(const FWState& state, GradientOracle& gradient, ScalarReduction& bandit,
                     const Eigen::MatrixXd& context, Rng& rng);

/// Result of maximizing ⟨g, s⟩ over the achievable set S.
struct LinearResponse {
  Eigen::VectorXd point;  ///< s ∈ S attaining the maximum
  double value = 0.0;     ///< max_{s∈S} ⟨g, s⟩ = E_x max_a ⟨g, μ(x) a⟩
};

/// An environment with known mean rewards and a finite context distribution.
class KnownRewardModel {
 public:
  virtual ~KnownRewardModel() = default;
  virtual std::size_t reward_dim() const = 0;
  virtual LinearResponse best_response(const Eigen::VectorXd& g) const = 0;
};

/// Finite contexts with mean-reward matrices μ(x) (D × K) and probabilities.
class FiniteContextModel final : public KnownRewardModel {
 public:
  FiniteContextModel(std::vector<Eigen::MatrixXd> means, std::vector<double> probabilities);

  std::size_t reward_dim() const override;
  LinearResponse best_response(const Eigen::VectorXd& g) const override;

  const std::vector<Eigen::MatrixXd>& means() const { return means_; }
  const std::vector<double>& probabilities() const { return probabilities_; }

 private:
  std::vector<Eigen::MatrixXd> means_;
  std::vector<double> probabilities_;
};

struct OracleResult {
  double value = 0.0;        ///< f(s) of the best certified feasible point
  double gap = 0.0;          ///< upper bound − value; f* ∈ [value, value + gap]
  double upper_bound = 0.0;
  Eigen::VectorXd point;
  std::size_t iterations = 0;
};

/// f* = max_{s ∈ S} f(s) by Frank-Wolfe over S with the per-context argmax as
/// linear subproblem, stopping when the certified gap is ≤ tol or after `iters`.
OracleResult oracle_fstar(const KnownRewardModel& model, const ObjectiveSpec& objective,
                          std::size_t iters, double tol);

/// Value and mixed strategies of the zero-sum game max_p min_q pᵀ M q.
struct MatrixGameSolution {
  double value = 0.0;
  Eigen::VectorXd row_strategy;
  Eigen::VectorXd column_strategy;
};

MatrixGameSolution solve_matrix_game(const Eigen::MatrixXd& payoff);

/// One logged row of a run. Optional fields are absent (not zero) when unknown.
struct MetricsRow {
  std::size_t step = 0;
  std::uint64_t seed = 0;
  double f_value = 0.0;
  double f_star = 0.0;
  double regret = 0.0;
  std::optional<double> scalar_regret_cum;
  std::optional<double> pseudo_regret_gap;
  std::optional<double> user_utility;
  std::optional<double> item_gini;
  std::int64_t wall_clock_ns = 0;
};

using RunMetrics = std::vector<MetricsRow>;

/// Per-step record for offline metric recomputation.
struct StepRecord {
  Eigen::VectorXd reward;
  Eigen::VectorXd gradient;           ///< empty when the algorithm has none
  Eigen::VectorXd expected_reward;    ///< μ(x_τ) a_τ, empty when μ is unknown
  std::optional<double> best_linear;  ///< max_a ⟨g_τ, μ(x_τ) a⟩
};

/// Online accumulation of the logged metrics.
class MetricsTracker {
 public:
  MetricsTracker(const ObjectiveSpec& objective, double f_star, std::uint64_t seed,
                 std::size_t dim);

  /// Feed step τ (1-based, consecutive). `expected` and `best_linear` may be absent.
  void observe(const FWState& state, const Eigen::VectorXd& reward,
               const Eigen::VectorXd* gradient, const Eigen::VectorXd* expected,
               std::optional<double> best_linear);
  MetricsRow row(const FWState& state, std::int64_t wall_clock_ns) const;

 private:
  const ObjectiveSpec* objective_;
  double f_star_;
  std::uint64_t seed_;
  Eigen::VectorXd cum_expected_;
  bool has_expected_ = true;
  double cum_scalar_regret_ = 0.0;
  bool has_scalar_regret_ = true;
};

/// Objective components for ranking objectives: (user utility, Gini of exposures).
std::optional<std::pair<double, double>> ranking_components(const ObjectiveSpec& objective,
                                                            const Eigen::VectorXd& s_hat);

/// Metrics recomputed from a full history by direct sums, every `stride` steps and at the end.
RunMetrics regret_metrics(const std::vector<StepRecord>& history, const ObjectiveSpec& objective,
                          double f_star, std::size_t stride, std::uint64_t seed = 0);

}  // namespace cbcr
