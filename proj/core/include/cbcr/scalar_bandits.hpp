#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <functional>
#include <string_view>

namespace cbcr {

/// Regularized least-squares statistics: V = λI + Σ x xᵀ, y = Σ r x, θ̂ = V⁻¹y.
///
/// The Cholesky factor of V is maintained by rank-one updates and periodically
/// rebuilt from V; θ̂ and the log-determinant are read from the factor.
struct RidgeState {
  std::size_t dim = 0;
  Eigen::MatrixXd V;
  Eigen::VectorXd y;
  Eigen::VectorXd theta_hat;
  double lambda = 1.0;
  std::size_t t = 0;

  /// Cholesky factorization of V.
  Eigen::LLT<Eigen::MatrixXd> factor;
  std::size_t updates_since_refactor = 0;

  static RidgeState initial(std::size_t dim, double lambda);

  /// ln det V − dim · ln λ, i.e. ln(det V / det V₀).
  double log_det_ratio() const;
  /// ‖x‖_{V⁻¹} for each column of `arms`.
  Eigen::VectorXd inverse_norms(const Eigen::Ref<const Eigen::MatrixXd>& arms) const;
  /// ‖x‖_{V⁻¹}.
  double inverse_norm(const Eigen::Ref<const Eigen::VectorXd>& x) const;
};

/// One observation: V += x xᵀ, y += r x, θ̂ re-solved, t += 1.
RidgeState ridge_update(RidgeState state, const Eigen::Ref<const Eigen::VectorXd>& features,
                        double reward);

/// One round with several feature vectors (columns of `features`):
/// V += Σ_j gram_weight_j x_j x_jᵀ, y += Σ_j target_j x_j, t += 1.
RidgeState ridge_update_batch(RidgeState state, const Eigen::Ref<const Eigen::MatrixXd>& features,
                              const Eigen::Ref<const Eigen::VectorXd>& gram_weights,
                              const Eigen::Ref<const Eigen::VectorXd>& targets);

struct LinUCBConfig {
  double delta_prime = 0.1;
  double lambda = 0.1;
  double d_theta = 1.0;
  double d_x = 1.0;
  double reward_half_width = 0.5;
  double exploration_scale = 1.0;

  /// Throws ArgumentError when a field is out of range.
  void validate() const;
};

/// α_t(δ') = h·√(ln(det V / det V₀) − 2 ln δ') + √λ·D_θ with h = reward_half_width.
double linucb_alpha(const LinUCBConfig& cfg, std::size_t t, const Eigen::MatrixXd& V);
/// Same as above from the cached factor; `delta_prime` overrides cfg.delta_prime.
double linucb_alpha(const LinUCBConfig& cfg, const RidgeState& state, double delta_prime);

/// θ̂ᵀx_a + √ε · α · ‖x_a‖_{V⁻¹} for each column x_a of `arm_features` (d̃ × K).
Eigen::VectorXd linucb_scores(const RidgeState& state, const LinUCBConfig& cfg,
                              const Eigen::Ref<const Eigen::MatrixXd>& arm_features, double alpha);

/// Index of the largest entry, ties broken toward the lowest index.
std::size_t argmax_lowest(const Eigen::Ref<const Eigen::VectorXd>& scores);

/// LinUCB over finite arms; δ' in the config is used as given.
class LinUcb {
 public:
  LinUcb(std::size_t dim, LinUCBConfig cfg);

  double alpha() const;
  Eigen::VectorXd scores(const Eigen::Ref<const Eigen::MatrixXd>& arm_features) const;
  std::size_t select(const Eigen::Ref<const Eigen::MatrixXd>& arm_features) const;
  void update(const Eigen::Ref<const Eigen::VectorXd>& features, double reward);

  const RidgeState& state() const { return state_; }
  const LinUCBConfig& config() const { return cfg_; }

 private:
  LinUCBConfig cfg_;
  RidgeState state_;
};

/// Online ridge regression with vector outputs sharing one design matrix:
/// Θ̂ = (V⁻¹ Y)ᵀ with V = λI + Σ x xᵀ and Y = Σ x rᵀ. Used as the regression
/// oracle of the SquareCB and ε-greedy reductions.
class MultiOutputRidge {
 public:
  MultiOutputRidge(std::size_t feature_dim, std::size_t output_dim, double lambda);

  /// Predicted mean outputs, one column per arm: Θ̂ X (output_dim × K).
  Eigen::MatrixXd predict(const Eigen::Ref<const Eigen::MatrixXd>& arm_features) const;
  void update(const Eigen::Ref<const Eigen::VectorXd>& features,
              const Eigen::Ref<const Eigen::VectorXd>& outputs);

  const Eigen::MatrixXd& theta_hat() const { return theta_; }
  std::size_t observations() const { return t_; }

 private:
  double lambda_;
  Eigen::MatrixXd V_;
  Eigen::MatrixXd Y_;
  Eigen::LLT<Eigen::MatrixXd> factor_;
  Eigen::MatrixXd theta_;
  std::size_t t_ = 0;
  std::size_t updates_since_refactor_ = 0;
};

enum class SquareCBMode { theoretical, empirical };

std::string_view to_string(SquareCBMode mode);
SquareCBMode squarecb_mode_from_string(std::string_view name);

struct SquareCBConfig {
  SquareCBMode mode = SquareCBMode::empirical;
  double gamma0 = 1e3;
  double lipschitz = 1.0;
  std::size_t arm_count = 1;
  double d_k = 1.0;
  /// R_oracle(T), non-decreasing; required in theoretical mode.
  std::function<double(double)> oracle_regret_fn;

  void validate() const;
};

/// Inverse-gap weighting: p(a) = 1/(K + γ(max − score_a)) off the greedy arm; greedy takes the rest.
Eigen::VectorXd squarecb_distribution(const Eigen::Ref<const Eigen::VectorXd>& scores,
                                      double gamma);

/// theoretical: (2/L)·√(τK / (R(τ) + 8 D_K² ln(4τ²/δ'))); empirical: γ₀√τ.
double squarecb_gamma(const SquareCBConfig& cfg, std::size_t tau, double delta_prime);

/// Greedy arm gets 1 − ε + ε/K, all others ε/K.
Eigen::VectorXd epsilon_greedy_distribution(const Eigen::Ref<const Eigen::VectorXd>& scores,
                                            double epsilon);

}  // namespace cbcr
