#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string_view>
#include <vector>

namespace cbcr {

class Rng;

/// Axis-aligned bounds of the reward set K together with its Euclidean diameter D_K.
struct RewardBox {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  double diameter = 0.0;

  /// Box with diameter ‖upper − lower‖.
  static RewardBox full(Eigen::VectorXd lower, Eigen::VectorXd upper);
  /// Box [lo, hi]^dim.
  static RewardBox uniform(std::size_t dim, double lo, double hi);

  std::size_t dim() const { return static_cast<std::size_t>(lower.size()); }
  bool contains(const Eigen::VectorXd& z, double tol = 1e-9) const;
  Eigen::VectorXd clamp(const Eigen::VectorXd& z) const;
  /// Throws ArgumentError when the invariants do not hold.
  void validate() const;
};

enum class ObjectiveKind { ggf, gini_tradeoff, eq_exposure, welfare, user_only, linear };

std::string_view to_string(ObjectiveKind kind);
/// Throws ArgumentError for unknown names.
ObjectiveKind objective_kind_from_string(std::string_view name);

/// A concave objective over reward vectors.
///
/// Ranking kinds (gini_tradeoff, eq_exposure, welfare, user_only) act on
/// z = (item exposures z_1..z_m, user utility z_{m+1}).
struct ObjectiveSpec {
  ObjectiveKind kind = ObjectiveKind::linear;
  Eigen::VectorXd weights;         ///< ggf: non-increasing, >= 0; linear: any
  double trade_off = 0.0;          ///< β
  double welfare_exponent = 0.5;   ///< α in (0, 1]
  std::size_t item_count = 0;      ///< m
  double lipschitz = 1.0;          ///< L
  std::optional<double> smoothness;  ///< C, present only for smooth objectives
  RewardBox box;

  std::size_t dim() const;
  bool is_ranking_kind() const;
  /// f(cz) = c f(z) for c >= 0; enables the dual prox and game-based f* solvers.
  bool positively_homogeneous() const;
  /// Throws ArgumentError listing the first violated invariant.
  void validate() const;
};

/// Weights w_i = 1 / 2^(i-1), i = 1..dim.
Eigen::VectorXd geometric_ggf_weights(std::size_t dim);

/// Lipschitz constant of the objective w.r.t. the Euclidean norm, when it has a closed form.
/// Returns nullopt for welfare (unbounded gradient at zero exposure).
std::optional<double> analytic_lipschitz(const ObjectiveSpec& spec);

ObjectiveSpec make_ggf(Eigen::VectorXd weights, RewardBox box);
ObjectiveSpec make_linear(Eigen::VectorXd weights, RewardBox box);
ObjectiveSpec make_ranking_objective(ObjectiveKind kind, std::size_t item_count, double trade_off,
                                     RewardBox box, double welfare_exponent = 0.5);

double objective_eval(const ObjectiveSpec& spec, const Eigen::VectorXd& z);
Eigen::VectorXd objective_supergradient(const ObjectiveSpec& spec, const Eigen::VectorXd& z);

/// Gini index of exposures: (1 / 2m) Σ_i Σ_j |z_i − z_j|.
double gini_index(const Eigen::Ref<const Eigen::VectorXd>& exposures);

/// First-order oracle view of a concave function, consumed by the prox solver.
struct ConcaveOracle {
  std::function<double(const Eigen::VectorXd&)> value;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> supergradient;
  bool positively_homogeneous = false;
  /// Optional domain projection applied by the primal solver.
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> project;
  /// Optional exact prox (z, β) -> y*, used instead of the iterative solvers.
  std::function<Eigen::VectorXd(const Eigen::VectorXd&, double)> exact_prox;
};

ConcaveOracle make_oracle(const ObjectiveSpec& spec);

enum class SmoothingMethod { none, moreau, randomized };

std::string_view to_string(SmoothingMethod method);
SmoothingMethod smoothing_method_from_string(std::string_view name);

struct SmoothingConfig {
  SmoothingMethod method = SmoothingMethod::moreau;
  double beta0 = 1.0;
  double prox_tolerance = 1e-8;
  std::size_t prox_max_iters = 100000;
  std::size_t sample_count = 1;
  std::uint64_t rng_seed = 0;

  /// Throws ArgumentError on invalid fields or incompatibility with the objective.
  void validate(const ObjectiveSpec& spec) const;
};

/// Active set of the dual prox solver; reusing it across nearby calls makes
/// each solve a handful of least-squares updates.
struct ProxWarmStart {
  std::vector<Eigen::VectorXd> atoms;
  std::vector<double> weights;
};

struct ProxResult {
  Eigen::VectorXd point;     ///< y* = argmax_y f(y) − ‖y − z‖² / (2β)
  Eigen::VectorXd gradient;  ///< (y* − z) / β
  std::size_t iterations = 0;
  double residual = 0.0;     ///< certified bound on ‖y − y*‖ at exit
};

ProxResult solve_moreau_prox(const ConcaveOracle& f, const Eigen::VectorXd& z, double beta,
                             const SmoothingConfig& cfg, ProxWarmStart* warm = nullptr);

Eigen::VectorXd moreau_prox(const ObjectiveSpec& spec, const Eigen::VectorXd& z, double beta,
                            const SmoothingConfig& cfg);
Eigen::VectorXd moreau_gradient(const ObjectiveSpec& spec, const Eigen::VectorXd& z, double beta,
                                const SmoothingConfig& cfg);
/// f_β(z) = f(y*) − ‖y* − z‖² / (2β).
double moreau_envelope(const ObjectiveSpec& spec, const Eigen::VectorXd& z, double beta,
                       const SmoothingConfig& cfg);

/// Uniform draw from the unit Euclidean ball in R^dim.
Eigen::VectorXd sample_unit_ball(Rng& rng, Eigen::Index dim);

struct RandomizedGradient {
  Eigen::VectorXd gradient;
  std::size_t clamped_samples = 0;
};

/// Monte Carlo estimate of E[∇f(z + βξ)], ξ uniform in the unit ball, drawn from `rng`.
RandomizedGradient randomized_smoothing_gradient(const ObjectiveSpec& spec,
                                                 const Eigen::VectorXd& z, double beta,
                                                 std::size_t samples, std::uint64_t seed);
Eigen::VectorXd randomized_smoothing_gradient(const ObjectiveSpec& spec, const Eigen::VectorXd& z,
                                              double beta, const SmoothingConfig& cfg);

/// β_τ: moreau → β₀/√(τ+1); randomized → D^{1/4} D_K/√(τ+1). Throws ContractError for none.
double smoothing_schedule(SmoothingMethod method, std::size_t tau, const ObjectiveSpec& spec,
                          const SmoothingConfig& cfg);

/// g_τ = ∇f_{τ−1}(z): exact supergradient, Moreau gradient or randomized estimate.
Eigen::VectorXd smoothed_gradient(const ObjectiveSpec& spec, const SmoothingConfig& cfg,
                                  std::size_t tau, const Eigen::VectorXd& z);

/// Stateful version of smoothed_gradient used inside runs: keeps the prox
/// active set between consecutive steps and counts clamped smoothing samples.
/// Produces the same gradients as smoothed_gradient up to the prox tolerance.
class GradientOracle {
 public:
  GradientOracle(ObjectiveSpec spec, SmoothingConfig cfg);

  Eigen::VectorXd operator()(std::size_t tau, const Eigen::VectorXd& z);

  const ObjectiveSpec& spec() const { return spec_; }
  const SmoothingConfig& config() const { return cfg_; }
  std::size_t clamped_samples() const { return clamped_; }

 private:
  ObjectiveSpec spec_;
  SmoothingConfig cfg_;
  ConcaveOracle oracle_;
  ProxWarmStart warm_;
  std::size_t clamped_ = 0;
};

}  // namespace cbcr
