#include "cbcr/scalar_bandits.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "cbcr/errors.hpp"

namespace cbcr {

namespace {

constexpr std::size_t kRefactorPeriod = 4096;

Eigen::LLT<Eigen::MatrixXd> factorize(const Eigen::MatrixXd& V) {
  Eigen::LLT<Eigen::MatrixXd> llt(V);
  if (llt.info() != Eigen::Success) throw NumericError("design matrix is not positive definite");
  return llt;
}

void check_finite(const Eigen::Ref<const Eigen::MatrixXd>& m, const char* what) {
  if (!m.allFinite()) throw ArgumentError(std::string(what) + " contains non-finite values");
}

}  // namespace

RidgeState RidgeState::initial(std::size_t dim, double lambda) {
  if (dim == 0) throw ArgumentError("ridge dimension must be >= 1");
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw ArgumentError("ridge regularization must be positive");
  }
  const auto n = static_cast<Eigen::Index>(dim);
  RidgeState s;
  s.dim = dim;
  s.lambda = lambda;
  s.V = lambda * Eigen::MatrixXd::Identity(n, n);
  s.y = Eigen::VectorXd::Zero(n);
  s.theta_hat = Eigen::VectorXd::Zero(n);
  s.factor = factorize(s.V);
  return s;
}

double RidgeState::log_det_ratio() const {
  return 2.0 * factor.matrixLLT().diagonal().array().log().sum() -
         static_cast<double>(dim) * std::log(lambda);
}

Eigen::VectorXd RidgeState::inverse_norms(const Eigen::Ref<const Eigen::MatrixXd>& arms) const {
  const Eigen::MatrixXd w = factor.matrixL().solve(arms);
  return w.colwise().norm().transpose();
}

double RidgeState::inverse_norm(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  return factor.matrixL().solve(x).norm();
}

namespace {

void refresh(RidgeState& state, std::size_t rank_updates) {
  state.updates_since_refactor += rank_updates;
  if (state.updates_since_refactor >= kRefactorPeriod) {
    state.factor = factorize(state.V);
    state.updates_since_refactor = 0;
  }
  state.theta_hat = state.factor.solve(state.y);
  state.t += 1;
}

}  // namespace

RidgeState ridge_update(RidgeState state, const Eigen::Ref<const Eigen::VectorXd>& features,
                        double reward) {
  if (static_cast<std::size_t>(features.size()) != state.dim) {
    throw ArgumentError("ridge features have the wrong dimension");
  }
  check_finite(features, "ridge features");
  if (!std::isfinite(reward)) throw ArgumentError("ridge reward is not finite");
  state.V.noalias() += features * features.transpose();
  state.y += reward * features;
  state.factor.rankUpdate(features, 1.0);
  refresh(state, 1);
  return state;
}

RidgeState ridge_update_batch(RidgeState state, const Eigen::Ref<const Eigen::MatrixXd>& features,
                              const Eigen::Ref<const Eigen::VectorXd>& gram_weights,
                              const Eigen::Ref<const Eigen::VectorXd>& targets) {
  if (static_cast<std::size_t>(features.rows()) != state.dim ||
      features.cols() != gram_weights.size() || features.cols() != targets.size()) {
    throw ArgumentError("ridge batch has inconsistent dimensions");
  }
  check_finite(features, "ridge features");
  check_finite(targets, "ridge targets");
  if (!gram_weights.allFinite() || (gram_weights.array() < 0.0).any()) {
    throw ArgumentError("ridge gram weights must be finite and non-negative");
  }
  std::size_t rank_updates = 0;
  for (Eigen::Index j = 0; j < features.cols(); ++j) {
    const double w = gram_weights[j];
    if (w > 0.0) {
      state.V.noalias() += w * features.col(j) * features.col(j).transpose();
      state.factor.rankUpdate(features.col(j), w);
      ++rank_updates;
    }
    if (targets[j] != 0.0) state.y += targets[j] * features.col(j);
  }
  refresh(state, rank_updates);
  return state;
}

void LinUCBConfig::validate() const {
  if (!(delta_prime > 0.0 && delta_prime < 1.0)) {
    throw ArgumentError("delta_prime must lie in (0, 1)");
  }
  if (!(lambda > 0.0)) throw ArgumentError("lambda must be positive");
  if (!(d_theta > 0.0)) throw ArgumentError("d_theta must be positive");
  if (!(d_x > 0.0)) throw ArgumentError("d_x must be positive");
  if (!(reward_half_width > 0.0)) throw ArgumentError("reward_half_width must be positive");
  if (!(exploration_scale >= 0.0)) throw ArgumentError("exploration_scale must be >= 0");
}

namespace {
double alpha_from_logdet(const LinUCBConfig& cfg, double log_det_ratio, double delta_prime) {
  if (!(delta_prime > 0.0 && delta_prime <= 1.0)) {
    throw ArgumentError("delta_prime must lie in (0, 1]");
  }
  const double inside = std::max(log_det_ratio, 0.0) - 2.0 * std::log(delta_prime);
  return cfg.reward_half_width * std::sqrt(inside) + std::sqrt(cfg.lambda) * cfg.d_theta;
}
}  // namespace

double linucb_alpha(const LinUCBConfig& cfg, std::size_t /*t*/, const Eigen::MatrixXd& V) {
  if (V.rows() != V.cols() || V.rows() == 0) throw ArgumentError("V must be square");
  Eigen::LLT<Eigen::MatrixXd> llt(V);
  if (llt.info() != Eigen::Success) throw NumericError("V is not positive definite");
  const Eigen::MatrixXd L = llt.matrixL();
  const double log_det = 2.0 * L.diagonal().array().log().sum();
  const double ratio = log_det - static_cast<double>(V.rows()) * std::log(cfg.lambda);
  return alpha_from_logdet(cfg, ratio, cfg.delta_prime);
}

double linucb_alpha(const LinUCBConfig& cfg, const RidgeState& state, double delta_prime) {
  return alpha_from_logdet(cfg, state.log_det_ratio(), delta_prime);
}

Eigen::VectorXd linucb_scores(const RidgeState& state, const LinUCBConfig& cfg,
                              const Eigen::Ref<const Eigen::MatrixXd>& arm_features,
                              double alpha) {
  if (static_cast<std::size_t>(arm_features.rows()) != state.dim) {
    throw ArgumentError("arm features have the wrong dimension");
  }
  Eigen::VectorXd scores = arm_features.transpose() * state.theta_hat;
  const double bonus = std::sqrt(cfg.exploration_scale) * alpha;
  if (bonus != 0.0) scores += bonus * state.inverse_norms(arm_features);
  return scores;
}

std::size_t argmax_lowest(const Eigen::Ref<const Eigen::VectorXd>& scores) {
  if (scores.size() == 0) throw ArgumentError("cannot take argmax of an empty vector");
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  return static_cast<std::size_t>(best);
}

LinUcb::LinUcb(std::size_t dim, LinUCBConfig cfg)
    : cfg_(cfg), state_(RidgeState::initial(dim, cfg.lambda)) {}

double LinUcb::alpha() const { return linucb_alpha(cfg_, state_, cfg_.delta_prime); }

Eigen::VectorXd LinUcb::scores(const Eigen::Ref<const Eigen::MatrixXd>& arm_features) const {
  return linucb_scores(state_, cfg_, arm_features, alpha());
}

std::size_t LinUcb::select(const Eigen::Ref<const Eigen::MatrixXd>& arm_features) const {
  return argmax_lowest(scores(arm_features));
}

void LinUcb::update(const Eigen::Ref<const Eigen::VectorXd>& features, double reward) {
  state_ = ridge_update(std::move(state_), features, reward);
}

MultiOutputRidge::MultiOutputRidge(std::size_t feature_dim, std::size_t output_dim,
                                   double lambda)
    : lambda_(lambda) {
  if (feature_dim == 0 || output_dim == 0) throw ArgumentError("ridge dimensions must be >= 1");
  if (!(lambda > 0.0)) throw ArgumentError("ridge regularization must be positive");
  const auto d = static_cast<Eigen::Index>(feature_dim);
  const auto D = static_cast<Eigen::Index>(output_dim);
  V_ = lambda * Eigen::MatrixXd::Identity(d, d);
  Y_ = Eigen::MatrixXd::Zero(d, D);
  factor_ = factorize(V_);
  theta_ = Eigen::MatrixXd::Zero(D, d);
}

Eigen::MatrixXd MultiOutputRidge::predict(
    const Eigen::Ref<const Eigen::MatrixXd>& arm_features) const {
  return theta_ * arm_features;
}

void MultiOutputRidge::update(const Eigen::Ref<const Eigen::VectorXd>& features,
                              const Eigen::Ref<const Eigen::VectorXd>& outputs) {
  if (features.size() != V_.rows() || outputs.size() != Y_.cols()) {
    throw ArgumentError("regression update has the wrong dimension");
  }
  check_finite(features, "regression features");
  check_finite(outputs, "regression outputs");
  V_.noalias() += features * features.transpose();
  Y_.noalias() += features * outputs.transpose();
  factor_.rankUpdate(features, 1.0);
  if (++updates_since_refactor_ >= kRefactorPeriod) {
    factor_ = factorize(V_);
    updates_since_refactor_ = 0;
  }
  theta_ = factor_.solve(Y_).transpose();
  ++t_;
}

std::string_view to_string(SquareCBMode mode) {
  return mode == SquareCBMode::theoretical ? "theoretical" : "empirical";
}

SquareCBMode squarecb_mode_from_string(std::string_view name) {
  if (name == "theoretical") return SquareCBMode::theoretical;
  if (name == "empirical") return SquareCBMode::empirical;
  throw ArgumentError("unknown SquareCB mode '" + std::string(name) + "'");
}

void SquareCBConfig::validate() const {
  if (mode == SquareCBMode::empirical && !(gamma0 > 0.0)) {
    throw ArgumentError("gamma0 must be positive");
  }
  if (mode == SquareCBMode::theoretical) {
    if (!oracle_regret_fn) throw ArgumentError("theoretical SquareCB requires an oracle regret bound");
    if (!(lipschitz > 0.0)) throw ArgumentError("SquareCB lipschitz must be positive");
    if (arm_count == 0) throw ArgumentError("SquareCB requires at least one arm");
    if (!(d_k >= 0.0)) throw ArgumentError("d_k must be non-negative");
    double previous = -std::numeric_limits<double>::infinity();
    for (double T = 1.0; T <= 1e9; T *= 4.0) {
      const double r = oracle_regret_fn(T);
      if (!(r >= previous)) throw ArgumentError("oracle regret bound must be non-decreasing");
      previous = r;
    }
  }
}

Eigen::VectorXd squarecb_distribution(const Eigen::Ref<const Eigen::VectorXd>& scores,
                                      double gamma) {
  if (scores.size() == 0) throw ArgumentError("SquareCB needs at least one arm");
  if (!(gamma > 0.0)) throw ArgumentError("SquareCB gamma must be positive");
  const auto K = scores.size();
  const std::size_t greedy = argmax_lowest(scores);
  const double best = scores[static_cast<Eigen::Index>(greedy)];
  Eigen::VectorXd p(K);
  double others = 0.0;
  for (Eigen::Index a = 0; a < K; ++a) {
    if (a == static_cast<Eigen::Index>(greedy)) continue;
    p[a] = 1.0 / (static_cast<double>(K) + gamma * (best - scores[a]));
    others += p[a];
  }
  p[static_cast<Eigen::Index>(greedy)] = 1.0 - others;
  return p;
}

double squarecb_gamma(const SquareCBConfig& cfg, std::size_t tau, double delta_prime) {
  if (tau == 0) throw ArgumentError("SquareCB gamma is defined for tau >= 1");
  const double t = static_cast<double>(tau);
  if (cfg.mode == SquareCBMode::empirical) return cfg.gamma0 * std::sqrt(t);
  const double log_term = 8.0 * cfg.d_k * cfg.d_k * std::log(4.0 * t * t / delta_prime);
  const double denom = cfg.oracle_regret_fn(t) + log_term;
  return (2.0 / cfg.lipschitz) * std::sqrt(t * static_cast<double>(cfg.arm_count) / denom);
}

Eigen::VectorXd epsilon_greedy_distribution(const Eigen::Ref<const Eigen::VectorXd>& scores,
                                            double epsilon) {
  if (scores.size() == 0) throw ArgumentError("epsilon-greedy needs at least one arm");
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ArgumentError("epsilon must lie in [0, 1]");
  const auto K = static_cast<double>(scores.size());
  Eigen::VectorXd p = Eigen::VectorXd::Constant(scores.size(), epsilon / K);
  p[static_cast<Eigen::Index>(argmax_lowest(scores))] = 1.0 - epsilon + epsilon / K;
  return p;
}

}  // namespace cbcr
