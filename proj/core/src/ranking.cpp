#include "cbcr/ranking.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "cbcr/errors.hpp"

namespace cbcr {

std::optional<std::size_t> PermutationAction::rank_of(std::size_t item) const {
  for (std::size_t k = 0; k < ranking.size(); ++k) {
    if (ranking[k] == item) return k;
  }
  return std::nullopt;
}

Eigen::MatrixXd PermutationAction::matrix() const {
  const auto n = static_cast<Eigen::Index>(m);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  std::vector<bool> placed(m, false);
  for (std::size_t k = 0; k < ranking.size(); ++k) {
    a(static_cast<Eigen::Index>(ranking[k]), static_cast<Eigen::Index>(k)) = 1.0;
    placed[ranking[k]] = true;
  }
  std::size_t slot = ranking.size();
  for (std::size_t i = 0; i < m; ++i) {
    if (!placed[i]) a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(slot++)) = 1.0;
  }
  return a;
}

void PermutationAction::validate() const {
  if (ranking.size() > m) throw ArgumentError("ranking is longer than the item count");
  std::vector<bool> seen(m, false);
  for (std::size_t item : ranking) {
    if (item >= m) throw ArgumentError("ranked item index out of range");
    if (seen[item]) throw ArgumentError("ranking repeats an item");
    seen[item] = true;
  }
}

void PBMParams::validate(std::size_t k_bar) const {
  if (b.size() != v.size()) throw ArgumentError("PBM position weights and values differ in length");
  if (k_bar > static_cast<std::size_t>(b.size())) throw ArgumentError("k_bar exceeds item count");
  for (Eigen::Index k = 0; k < b.size(); ++k) {
    if (!(b[k] >= 0.0 && b[k] <= 1.0)) throw ArgumentError("position weights must lie in [0, 1]");
    if (k > 0 && b[k] > b[k - 1]) throw ArgumentError("position weights must be non-increasing");
    if (static_cast<std::size_t>(k) >= k_bar && b[k] != 0.0) {
      throw ArgumentError("position weights must vanish below rank k_bar");
    }
  }
  if (!((v.array() >= 0.0) && (v.array() <= 1.0)).all()) {
    throw ArgumentError("item values must lie in [0, 1]");
  }
}

PermutationAction topk_fw_action(const Eigen::VectorXd& grad, const Eigen::VectorXd& v_hat,
                                 std::size_t k_bar) {
  const auto m = static_cast<std::size_t>(v_hat.size());
  if (static_cast<std::size_t>(grad.size()) != m + 1) {
    throw ArgumentError("ranking gradient must have m + 1 entries");
  }
  if (k_bar == 0 || k_bar > m) throw ArgumentError("k_bar must lie in [1, m]");
  const double user_weight = grad[static_cast<Eigen::Index>(m)];
  if (!(user_weight > 0.0)) {
    throw ContractError("ranking step requires a positive user-utility gradient");
  }
  if (!v_hat.allFinite() || !grad.allFinite()) throw ArgumentError("ranking scores must be finite");
  const Eigen::VectorXd scores = user_weight * v_hat + grad.head(static_cast<Eigen::Index>(m));
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k_bar), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      const double sa = scores[static_cast<Eigen::Index>(a)];
                      const double sb = scores[static_cast<Eigen::Index>(b)];
                      return sa > sb || (sa == sb && a < b);
                    });
  PermutationAction action;
  action.m = m;
  action.ranking.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k_bar));
  return action;
}

double ranking_linear_value(const Eigen::VectorXd& grad, const Eigen::VectorXd& v_hat,
                            const Eigen::VectorXd& b, const PermutationAction& action) {
  const auto m = static_cast<Eigen::Index>(v_hat.size());
  double value = 0.0;
  for (std::size_t k = 0; k < action.ranking.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(action.ranking[k]);
    value += b[static_cast<Eigen::Index>(k)] * (grad[i] + grad[m] * v_hat[i]);
  }
  return value;
}

Eigen::VectorXd ranking_ucb(const RidgeState& state, const Eigen::MatrixXd& item_features,
                            double alpha) {
  if (static_cast<std::size_t>(item_features.cols()) != state.dim) {
    throw ArgumentError("item features have the wrong dimension");
  }
  if (!(alpha >= 0.0)) throw ArgumentError("confidence radius must be >= 0");
  Eigen::VectorXd v = item_features * state.theta_hat;
  if (alpha > 0.0) v += alpha * state.inverse_norms(item_features.transpose());
  return v;
}

Eigen::VectorXd ranking_ucb(const RidgeState& state, const Eigen::MatrixXd& item_features,
                            double alpha, const Eigen::VectorXd& bonus_factors) {
  if (bonus_factors.size() != item_features.rows()) {
    throw ArgumentError("bonus factors must have one entry per item");
  }
  if (static_cast<std::size_t>(item_features.cols()) != state.dim) {
    throw ArgumentError("item features have the wrong dimension");
  }
  Eigen::VectorXd v = item_features * state.theta_hat;
  v += alpha * bonus_factors.cwiseProduct(state.inverse_norms(item_features.transpose()));
  return v;
}

RankingFeedback pbm_sample(const PermutationAction& action, const PBMParams& params, Rng& rng) {
  RankingFeedback fb;
  fb.exposed.assign(action.m, 0);
  fb.clicks.assign(action.m, 0);
  for (std::size_t k = 0; k < action.ranking.size(); ++k) {
    const std::size_t item = action.ranking[k];
    const bool exposed = rng.bernoulli(params.b[static_cast<Eigen::Index>(k)]);
    if (!exposed) continue;
    fb.exposed[item] = 1;
    fb.clicks[item] = rng.bernoulli(params.v[static_cast<Eigen::Index>(item)]) ? 1 : 0;
  }
  return fb;
}

Eigen::VectorXd ranking_reward(const RankingFeedback& feedback) {
  const std::size_t m = feedback.exposed.size();
  if (feedback.clicks.size() != m) throw ArgumentError("feedback vectors differ in length");
  Eigen::VectorXd r = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m + 1));
  double clicks = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    if (feedback.clicks[i] && !feedback.exposed[i]) {
      throw ContractError("click recorded on an item that was not exposed");
    }
    r[static_cast<Eigen::Index>(i)] = feedback.exposed[i] ? 1.0 : 0.0;
    clicks += feedback.clicks[i] ? 1.0 : 0.0;
  }
  r[static_cast<Eigen::Index>(m)] = clicks;
  return r;
}

RidgeState ranking_ridge_update(RidgeState state, const Eigen::MatrixXd& item_features,
                                const RankingFeedback& feedback) {
  const auto m = item_features.rows();
  if (static_cast<std::size_t>(m) != feedback.exposed.size()) {
    throw ArgumentError("feedback does not match the item count");
  }
  Eigen::VectorXd gram(m);
  Eigen::VectorXd targets(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    if (feedback.clicks[idx] && !feedback.exposed[idx]) {
      throw ContractError("click recorded on an item that was not exposed");
    }
    gram[i] = feedback.exposed[idx] ? 1.0 : 0.0;
    targets[i] = feedback.clicks[idx] ? 1.0 : 0.0;
  }
  return ridge_update_batch(std::move(state), item_features.transpose(), gram, targets);
}

Eigen::VectorXd unbiased_fairness_factor(const Eigen::VectorXd& exposure_counts,
                                         std::size_t k_bar) {
  if ((exposure_counts.array() < 0.0).any()) {
    throw ArgumentError("exposure counts must be non-negative");
  }
  if (k_bar == 0) throw ArgumentError("k_bar must be >= 1");
  const double total = exposure_counts.sum();
  if (total <= 0.0) return Eigen::VectorXd::Ones(exposure_counts.size());
  const double average = total / static_cast<double>(k_bar);
  return (1.0 - exposure_counts.array() / average).matrix();
}

namespace {
double fairlearn_quota(double c, std::size_t t) { return std::floor(c * static_cast<double>(t)); }
}  // namespace

PermutationAction fairlearn_rank(const Eigen::VectorXd& counts, std::size_t t, double c,
                                 double alpha_tol, const Eigen::VectorXd& ucb_scores,
                                 std::size_t k_bar) {
  const auto m = static_cast<std::size_t>(counts.size());
  if (static_cast<std::size_t>(ucb_scores.size()) != m) {
    throw ArgumentError("FairLearn scores and counts differ in length");
  }
  if (k_bar == 0 || k_bar > m) throw ArgumentError("k_bar must lie in [1, m]");
  const double quota = fairlearn_quota(c, t);
  PermutationAction action;
  action.m = m;
  std::vector<bool> chosen(m, false);
  for (std::size_t slot = 0; slot < k_bar; ++slot) {
    std::optional<std::size_t> urgent;
    double worst = 0.0;
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < m; ++i) {
      if (chosen[i]) continue;
      const double deficit = quota - counts[static_cast<Eigen::Index>(i)];
      if (deficit > alpha_tol - 1.0 && (!urgent || deficit > worst)) {
        urgent = i;
        worst = deficit;
      }
      if (!best || ucb_scores[static_cast<Eigen::Index>(i)] >
                       ucb_scores[static_cast<Eigen::Index>(*best)]) {
        best = i;
      }
    }
    const std::size_t pick = urgent ? *urgent : *best;
    chosen[pick] = true;
    action.ranking.push_back(pick);
  }
  return action;
}

RewardBox ranking_reward_box(std::size_t m, std::size_t k_bar) {
  RewardBox box;
  box.lower = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m + 1));
  box.upper = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(m + 1));
  box.upper[static_cast<Eigen::Index>(m)] = static_cast<double>(k_bar);
  const double k = static_cast<double>(k_bar);
  box.diameter = std::sqrt(k * (k + 2.0));
  return box;
}

std::string_view to_string(RankingAlgorithm algorithm) {
  switch (algorithm) {
    case RankingAlgorithm::fw_linucbrank: return "fw_linucbrank";
    case RankingAlgorithm::linucbrank: return "linucbrank";
    case RankingAlgorithm::unbiased_linucbrank: return "unbiased_linucbrank";
    case RankingAlgorithm::fairlearn: return "fairlearn";
  }
  return "unknown";
}

void RankingLearnerConfig::validate(std::size_t m) const {
  if (k_bar == 0 || k_bar > m) throw ArgumentError("k_bar must lie in [1, m]");
  linucb.validate();
  if (algorithm == RankingAlgorithm::fairlearn) {
    if (!(fairlearn_c >= 0.0)) throw ArgumentError("FairLearn c must be >= 0");
    if (fairlearn_c > static_cast<double>(k_bar) / static_cast<double>(m) + 1e-12) {
      throw ConfigError("FairLearn is infeasible: c must not exceed k_bar / m");
    }
    if (!(fairlearn_alpha >= 0.0)) throw ArgumentError("FairLearn alpha must be >= 0");
  }
}

RankingLearner::RankingLearner(RankingLearnerConfig cfg, std::size_t m, std::size_t feature_dim,
                               ObjectiveSpec objective, SmoothingConfig smoothing,
                               const std::optional<Eigen::VectorXd>& s0)
    : cfg_(cfg),
      m_(m),
      gradient_(std::move(objective), smoothing),
      ridge_(RidgeState::initial(feature_dim, cfg.linucb.lambda)),
      fw_(fw_initial_state(gradient_.spec().box, s0)),
      exposure_counts_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m))),
      selection_counts_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m))) {
  cfg_.validate(m);
  if (gradient_.spec().dim() != m + 1) {
    throw ArgumentError("ranking objective must have m + 1 coordinates");
  }
}

PermutationAction RankingLearner::choose(const Eigen::MatrixXd& item_features) {
  if (static_cast<std::size_t>(item_features.rows()) != m_) {
    throw ArgumentError("item features must have one row per item");
  }
  const double alpha = std::sqrt(cfg_.linucb.exploration_scale) *
                       linucb_alpha(cfg_.linucb, ridge_, cfg_.linucb.delta_prime / 3.0);
  switch (cfg_.algorithm) {
    case RankingAlgorithm::fw_linucbrank: {
      ucb_ = ranking_ucb(ridge_, item_features, alpha);
      gradient_value_ = gradient_(fw_.tau, fw_.z);
      return topk_fw_action(gradient_value_, ucb_, cfg_.k_bar);
    }
    case RankingAlgorithm::linucbrank: {
      ucb_ = ranking_ucb(ridge_, item_features, alpha);
      break;
    }
    case RankingAlgorithm::unbiased_linucbrank: {
      ucb_ = ranking_ucb(ridge_, item_features, alpha,
                         unbiased_fairness_factor(exposure_counts_, cfg_.k_bar));
      break;
    }
    case RankingAlgorithm::fairlearn: {
      ucb_ = ranking_ucb(ridge_, item_features, alpha);
      return fairlearn_rank(selection_counts_, fw_.tau + 1, cfg_.fairlearn_c,
                            cfg_.fairlearn_alpha, ucb_, cfg_.k_bar);
    }
  }
  Eigen::VectorXd user_direction = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m_ + 1));
  user_direction[static_cast<Eigen::Index>(m_)] = 1.0;
  return topk_fw_action(user_direction, ucb_, cfg_.k_bar);
}

Eigen::VectorXd RankingLearner::observe(const Eigen::MatrixXd& item_features,
                                        const PermutationAction& action,
                                        const RankingFeedback& feedback) {
  Eigen::VectorXd reward = ranking_reward(feedback);
  ridge_ = ranking_ridge_update(std::move(ridge_), item_features, feedback);
  fw_ = fw_update(std::move(fw_), reward, gradient_.spec().box);
  exposure_counts_ += reward.head(static_cast<Eigen::Index>(m_));
  for (std::size_t item : action.ranking) selection_counts_[static_cast<Eigen::Index>(item)] += 1.0;
  return reward;
}

RankingStepResult fw_linucbrank_step(RankingLearner& learner, const Eigen::MatrixXd& item_features,
                                     const PBMParams& truth, Rng& rng) {
  RankingStepResult out;
  out.action = learner.choose(item_features);
  out.feedback = pbm_sample(out.action, truth, rng);
  out.reward = learner.observe(item_features, out.action, out.feedback);
  return out;
}

}  // namespace cbcr
