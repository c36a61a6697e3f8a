#include "cbcr/fw_engine.hpp"

#include <cmath>
#include <string>

#include "cbcr/errors.hpp"

namespace cbcr {

FWState fw_initial_state(const RewardBox& box, const std::optional<Eigen::VectorXd>& s0) {
  box.validate();
  FWState state;
  state.dim = box.dim();
  if (s0) {
    if (!box.contains(*s0)) throw ArgumentError("initial point s0 lies outside the reward box");
    state.s_hat = *s0;
  } else {
    state.s_hat = box.lower;
  }
  state.z = state.s_hat;
  state.cum_reward = Eigen::VectorXd::Zero(box.lower.size());
  return state;
}

FWState fw_update(FWState state, const Eigen::VectorXd& reward, const RewardBox& box,
                  const Eigen::VectorXd* direction) {
  if (static_cast<std::size_t>(reward.size()) != state.dim) {
    throw ArgumentError("reward has the wrong dimension");
  }
  if (!reward.allFinite() || !box.contains(reward)) {
    throw ContractError("observed reward lies outside the reward box");
  }
  if (direction != nullptr && (direction->size() != reward.size() || !direction->allFinite())) {
    throw ArgumentError("update direction has the wrong dimension or is not finite");
  }
  state.tau += 1;
  const double step = 1.0 / static_cast<double>(state.tau);
  state.s_hat += step * (reward - state.s_hat);
  const Eigen::VectorXd& rho = direction != nullptr ? *direction : reward;
  state.z += step * (rho - state.z);
  state.cum_reward += reward;
  return state;
}

ExtendedContext ExtendedContext::build(const Eigen::VectorXd& g, const Eigen::MatrixXd& x) {
  ExtendedContext ctx;
  ctx.g = g;
  ctx.x = x;
  const auto d = x.rows();
  ctx.stacked.resize(g.size() * d, x.cols());
  for (Eigen::Index i = 0; i < g.size(); ++i) ctx.stacked.middleRows(i * d, d) = g[i] * x;
  return ctx;
}

Eigen::VectorXd flatten_parameter(const Eigen::MatrixXd& theta) {
  Eigen::VectorXd flat(theta.size());
  for (Eigen::Index i = 0; i < theta.rows(); ++i) {
    flat.segment(i * theta.cols(), theta.cols()) = theta.row(i).transpose();
  }
  return flat;
}

ActionDistribution ActionDistribution::deterministic(std::size_t arms, std::size_t arm) {
  ActionDistribution dist;
  dist.probabilities = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(arms));
  dist.probabilities[static_cast<Eigen::Index>(arm)] = 1.0;
  dist.greedy = arm;
  dist.point_mass = true;
  return dist;
}

ActionDistribution ActionDistribution::from_probabilities(Eigen::VectorXd p) {
  ActionDistribution dist;
  dist.greedy = argmax_lowest(p);
  dist.point_mass = p[static_cast<Eigen::Index>(dist.greedy)] >= 1.0;
  dist.probabilities = std::move(p);
  return dist;
}

std::size_t sample_action(const ActionDistribution& dist, Rng& rng) {
  if (dist.point_mass) return dist.greedy;
  const double u = rng.uniform();
  double cum = 0.0;
  std::size_t last_positive = dist.greedy;
  for (Eigen::Index a = 0; a < dist.probabilities.size(); ++a) {
    const double p = dist.probabilities[a];
    if (p <= 0.0) continue;
    cum += p;
    last_positive = static_cast<std::size_t>(a);
    if (u < cum) return last_positive;
  }
  return last_positive;
}

namespace {
LinUCBConfig halve_delta(LinUCBConfig cfg) {
  cfg.validate();
  cfg.delta_prime /= 2.0;
  return cfg;
}

void build_stacked(Eigen::MatrixXd& out, const Eigen::VectorXd& g, const Eigen::MatrixXd& x) {
  const auto d = x.rows();
  out.resize(g.size() * d, x.cols());
  for (Eigen::Index i = 0; i < g.size(); ++i) out.middleRows(i * d, d) = g[i] * x;
}
}  // namespace

FwLinUcb::FwLinUcb(std::size_t reward_dim, std::size_t context_dim, LinUCBConfig cfg)
    : engine_(reward_dim * context_dim, halve_delta(cfg)) {}

ActionDistribution FwLinUcb::distribution(const Eigen::VectorXd& g, const Eigen::MatrixXd& x) {
  build_stacked(stacked_, g, x);
  return ActionDistribution::deterministic(static_cast<std::size_t>(x.cols()),
                                           engine_.select(stacked_));
}

void FwLinUcb::observe(const Eigen::VectorXd& g, const Eigen::MatrixXd& x, std::size_t arm,
                       const Eigen::VectorXd& reward) {
  build_stacked(stacked_, g, x);
  engine_.update(stacked_.col(static_cast<Eigen::Index>(arm)), g.dot(reward));
}

FwRegressionBandit::FwRegressionBandit(Rule rule, std::size_t reward_dim,
                                       std::size_t context_dim, double lambda)
    : rule_(rule), regression_(context_dim, reward_dim, lambda) {}

FwRegressionBandit FwRegressionBandit::squarecb(std::size_t reward_dim, std::size_t context_dim,
                                                double lambda, SquareCBConfig cfg,
                                                double delta_prime) {
  cfg.validate();
  FwRegressionBandit bandit(Rule::squarecb, reward_dim, context_dim, lambda);
  bandit.squarecb_ = std::move(cfg);
  bandit.delta_prime_ = delta_prime;
  return bandit;
}

FwRegressionBandit FwRegressionBandit::epsilon_greedy(std::size_t reward_dim,
                                                      std::size_t context_dim, double lambda,
                                                      double epsilon) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ArgumentError("epsilon must lie in [0, 1]");
  FwRegressionBandit bandit(Rule::epsilon_greedy, reward_dim, context_dim, lambda);
  bandit.epsilon_ = epsilon;
  return bandit;
}

ActionDistribution FwRegressionBandit::distribution(const Eigen::VectorXd& g,
                                                    const Eigen::MatrixXd& x) {
  const Eigen::VectorXd scores = (g.transpose() * regression_.predict(x)).transpose();
  ++rounds_;
  if (rule_ == Rule::squarecb) {
    const double gamma = squarecb_gamma(squarecb_, rounds_, delta_prime_);
    return ActionDistribution::from_probabilities(squarecb_distribution(scores, gamma));
  }
  return ActionDistribution::from_probabilities(epsilon_greedy_distribution(scores, epsilon_));
}

void FwRegressionBandit::observe(const Eigen::VectorXd& /*g*/, const Eigen::MatrixXd& x,
                                 std::size_t arm, const Eigen::VectorXd& reward) {
  regression_.update(x.col(static_cast<Eigen::Index>(arm)), reward);
}

FWStepResult fw_step(const FWState& state, GradientOracle& gradient, ScalarReduction& bandit,
                     const Eigen::MatrixXd& context, Rng& rng) {
  FWStepResult out;
  // g_τ = ∇f_{τ−1}(z_{τ−1}) at the upcoming step τ = state.tau + 1.
  out.gradient = gradient(state.tau, state.z);
  out.distribution = bandit.distribution(out.gradient, context);
  out.arm = sample_action(out.distribution, rng);
  return out;
}

std::optional<std::pair<double, double>> ranking_components(const ObjectiveSpec& objective,
                                                            const Eigen::VectorXd& s_hat) {
  if (!objective.is_ranking_kind()) return std::nullopt;
  const auto m = static_cast<Eigen::Index>(objective.item_count);
  return std::make_pair(s_hat[m], gini_index(s_hat.head(m)));
}

MetricsTracker::MetricsTracker(const ObjectiveSpec& objective, double f_star, std::uint64_t seed,
                               std::size_t dim)
    : objective_(&objective),
      f_star_(f_star),
      seed_(seed),
      cum_expected_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim))) {}

void MetricsTracker::observe(const FWState& /*state*/, const Eigen::VectorXd& reward,
                             const Eigen::VectorXd* gradient, const Eigen::VectorXd* expected,
                             std::optional<double> best_linear) {
  if (expected != nullptr && has_expected_) {
    cum_expected_ += *expected;
  } else {
    has_expected_ = false;
  }
  if (gradient != nullptr && best_linear && has_scalar_regret_) {
    cum_scalar_regret_ += *best_linear - gradient->dot(reward);
  } else {
    has_scalar_regret_ = false;
  }
}

MetricsRow MetricsTracker::row(const FWState& state, std::int64_t wall_clock_ns) const {
  MetricsRow row;
  row.step = state.tau;
  row.seed = seed_;
  row.f_value = objective_eval(*objective_, state.s_hat);
  row.f_star = f_star_;
  row.regret = f_star_ - row.f_value;
  if (has_scalar_regret_ && state.tau > 0) row.scalar_regret_cum = cum_scalar_regret_;
  if (has_expected_ && state.tau > 0) {
    const Eigen::VectorXd s_expected = cum_expected_ / static_cast<double>(state.tau);
    row.pseudo_regret_gap = objective_eval(*objective_, s_expected) - row.f_value;
  }
  if (auto parts = ranking_components(*objective_, state.s_hat)) {
    row.user_utility = parts->first;
    row.item_gini = parts->second;
  }
  row.wall_clock_ns = wall_clock_ns;
  return row;
}

RunMetrics regret_metrics(const std::vector<StepRecord>& history, const ObjectiveSpec& objective,
                          double f_star, std::size_t stride, std::uint64_t seed) {
  if (stride == 0) throw ArgumentError("metrics stride must be >= 1");
  RunMetrics out;
  if (history.empty()) return out;
  const auto dim = history.front().reward.size();
  Eigen::VectorXd sum_reward = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd sum_expected = Eigen::VectorXd::Zero(dim);
  bool has_expected = true;
  bool has_scalar = true;
  double scalar = 0.0;
  for (std::size_t t = 0; t < history.size(); ++t) {
    const StepRecord& rec = history[t];
    sum_reward += rec.reward;
    if (rec.expected_reward.size() == dim && has_expected) {
      sum_expected += rec.expected_reward;
    } else {
      has_expected = false;
    }
    if (rec.gradient.size() == dim && rec.best_linear && has_scalar) {
      scalar += *rec.best_linear - rec.gradient.dot(rec.reward);
    } else {
      has_scalar = false;
    }
    const std::size_t step = t + 1;
    if (step % stride != 0 && step != history.size()) continue;
    MetricsRow row;
    row.step = step;
    row.seed = seed;
    const Eigen::VectorXd s_hat = sum_reward / static_cast<double>(step);
    row.f_value = objective_eval(objective, s_hat);
    row.f_star = f_star;
    row.regret = f_star - row.f_value;
    if (has_scalar) row.scalar_regret_cum = scalar;
    if (has_expected) {
      row.pseudo_regret_gap =
          objective_eval(objective, Eigen::VectorXd(sum_expected / static_cast<double>(step))) -
          row.f_value;
    }
    if (auto parts = ranking_components(objective, s_hat)) {
      row.user_utility = parts->first;
      row.item_gini = parts->second;
    }
    out.push_back(row);
  }
  return out;
}

}  // namespace cbcr
