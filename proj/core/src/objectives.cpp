#include "cbcr/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "cbcr/errors.hpp"
#include "cbcr/rng.hpp"

namespace cbcr {

namespace {

constexpr double kWelfareFloor = 1e-12;

std::vector<std::size_t> stable_ascending_order(const Eigen::Ref<const Eigen::VectorXd>& z) {
  std::vector<std::size_t> order(static_cast<std::size_t>(z.size()));
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return z[a] < z[b]; });
  return order;
}

void check_input(const ObjectiveSpec& spec, const Eigen::VectorXd& z) {
  if (static_cast<std::size_t>(z.size()) != spec.dim()) {
    throw ArgumentError("objective expects a vector of dimension " + std::to_string(spec.dim()) +
                        ", got " + std::to_string(z.size()));
  }
  if (!z.allFinite()) {
    throw ArgumentError("objective input contains non-finite values");
  }
}

void check_welfare_domain(const ObjectiveSpec& spec, const Eigen::VectorXd& z) {
  for (std::size_t j = 0; j < spec.item_count; ++j) {
    if (z[j] < 0.0) {
      throw DomainError("welfare objective is undefined for negative exposure (coordinate " +
                        std::to_string(j) + ")");
    }
  }
}

}  // namespace

RewardBox RewardBox::full(Eigen::VectorXd lower, Eigen::VectorXd upper) {
  RewardBox box;
  box.lower = std::move(lower);
  box.upper = std::move(upper);
  box.diameter = (box.lower.size() == box.upper.size()) ? (box.upper - box.lower).norm() : 0.0;
  return box;
}

RewardBox RewardBox::uniform(std::size_t dim, double lo, double hi) {
  const auto n = static_cast<Eigen::Index>(dim);
  return full(Eigen::VectorXd::Constant(n, lo), Eigen::VectorXd::Constant(n, hi));
}

bool RewardBox::contains(const Eigen::VectorXd& z, double tol) const {
  if (z.size() != lower.size()) return false;
  return ((z.array() >= lower.array() - tol) && (z.array() <= upper.array() + tol)).all();
}

Eigen::VectorXd RewardBox::clamp(const Eigen::VectorXd& z) const {
  return z.cwiseMax(lower).cwiseMin(upper);
}

void RewardBox::validate() const {
  if (lower.size() == 0 || lower.size() != upper.size()) {
    throw ArgumentError("reward box bounds must be non-empty and of equal length");
  }
  if (!lower.allFinite() || !upper.allFinite() || !std::isfinite(diameter)) {
    throw ArgumentError("reward box must be finite");
  }
  if ((lower.array() > upper.array()).any()) {
    throw ArgumentError("reward box requires lower <= upper in every coordinate");
  }
  if (diameter + 1e-12 < (upper - lower).maxCoeff()) {
    throw ArgumentError("reward box diameter is smaller than its widest side");
  }
}

std::string_view to_string(ObjectiveKind kind) {
  switch (kind) {
    case ObjectiveKind::ggf: return "ggf";
    case ObjectiveKind::gini_tradeoff: return "gini_tradeoff";
    case ObjectiveKind::eq_exposure: return "eq_exposure";
    case ObjectiveKind::welfare: return "welfare";
    case ObjectiveKind::user_only: return "user_only";
    case ObjectiveKind::linear: return "linear";
  }
  return "unknown";
}

ObjectiveKind objective_kind_from_string(std::string_view name) {
  for (auto kind : {ObjectiveKind::ggf, ObjectiveKind::gini_tradeoff, ObjectiveKind::eq_exposure,
                    ObjectiveKind::welfare, ObjectiveKind::user_only, ObjectiveKind::linear}) {
    if (to_string(kind) == name) return kind;
  }
  throw ArgumentError("unknown objective kind '" + std::string(name) + "'");
}

std::size_t ObjectiveSpec::dim() const {
  if (is_ranking_kind()) return item_count + 1;
  return static_cast<std::size_t>(weights.size());
}

bool ObjectiveSpec::is_ranking_kind() const {
  return kind == ObjectiveKind::gini_tradeoff || kind == ObjectiveKind::eq_exposure ||
         kind == ObjectiveKind::welfare || kind == ObjectiveKind::user_only;
}

bool ObjectiveSpec::positively_homogeneous() const {
  return kind != ObjectiveKind::welfare || welfare_exponent == 1.0 || trade_off == 0.0;
}

void ObjectiveSpec::validate() const {
  if (is_ranking_kind()) {
    if (item_count == 0) throw ArgumentError("ranking objectives require item_count >= 1");
  } else if (weights.size() == 0) {
    throw ArgumentError(std::string(to_string(kind)) + " objective requires non-empty weights");
  }
  if (!weights.allFinite()) throw ArgumentError("objective weights must be finite");
  if (kind == ObjectiveKind::ggf) {
    if ((weights.array() < 0.0).any()) throw ArgumentError("ggf weights must be non-negative");
    for (Eigen::Index i = 1; i < weights.size(); ++i) {
      if (weights[i] > weights[i - 1]) {
        throw ArgumentError("ggf weights must be non-increasing");
      }
    }
  }
  if (!(trade_off >= 0.0) || !std::isfinite(trade_off)) {
    throw ArgumentError("trade_off must be finite and >= 0");
  }
  if (kind == ObjectiveKind::welfare && !(welfare_exponent > 0.0 && welfare_exponent <= 1.0)) {
    throw ArgumentError("welfare_exponent must lie in (0, 1]");
  }
  if (!(lipschitz > 0.0) || !std::isfinite(lipschitz)) {
    throw ArgumentError("lipschitz constant must be positive");
  }
  if (smoothness && !(*smoothness > 0.0)) {
    throw ArgumentError("smoothness constant must be positive when present");
  }
  box.validate();
  if (box.dim() != dim()) {
    throw ArgumentError("reward box dimension " + std::to_string(box.dim()) +
                        " does not match objective dimension " + std::to_string(dim()));
  }
}

Eigen::VectorXd geometric_ggf_weights(std::size_t dim) {
  Eigen::VectorXd w(static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = std::ldexp(1.0, -static_cast<int>(i));
  return w;
}

std::optional<double> analytic_lipschitz(const ObjectiveSpec& spec) {
  const double m = static_cast<double>(spec.item_count);
  const double beta = spec.trade_off;
  switch (spec.kind) {
    case ObjectiveKind::ggf:
    case ObjectiveKind::linear: return spec.weights.norm();
    case ObjectiveKind::user_only: return 1.0;
    case ObjectiveKind::gini_tradeoff:
      return std::sqrt(1.0 + beta * beta * (m * m - 1.0) / (3.0 * m));
    case ObjectiveKind::eq_exposure: return std::sqrt(1.0 + beta * beta / (m * m));
    case ObjectiveKind::welfare:
      if (beta == 0.0) return 1.0;
      if (spec.welfare_exponent == 1.0) return std::sqrt(1.0 + beta * beta * m);
      return std::nullopt;
  }
  return std::nullopt;
}

ObjectiveSpec make_ggf(Eigen::VectorXd weights, RewardBox box) {
  ObjectiveSpec spec;
  spec.kind = ObjectiveKind::ggf;
  spec.weights = std::move(weights);
  spec.box = std::move(box);
  spec.lipschitz = spec.weights.norm();
  spec.validate();
  return spec;
}

ObjectiveSpec make_linear(Eigen::VectorXd weights, RewardBox box) {
  ObjectiveSpec spec;
  spec.kind = ObjectiveKind::linear;
  spec.weights = std::move(weights);
  spec.box = std::move(box);
  spec.lipschitz = std::max(spec.weights.norm(), 1e-300);
  spec.smoothness = 1.0;
  spec.validate();
  return spec;
}

ObjectiveSpec make_ranking_objective(ObjectiveKind kind, std::size_t item_count, double trade_off,
                                     RewardBox box, double welfare_exponent) {
  ObjectiveSpec spec;
  spec.kind = kind;
  spec.item_count = item_count;
  spec.trade_off = trade_off;
  spec.welfare_exponent = welfare_exponent;
  spec.box = std::move(box);
  if (!spec.is_ranking_kind()) throw ArgumentError("not a ranking objective kind");
  spec.lipschitz = analytic_lipschitz(spec).value_or(1.0);
  if (kind == ObjectiveKind::user_only || trade_off == 0.0) spec.smoothness = 1.0;
  spec.validate();
  return spec;
}

double gini_index(const Eigen::Ref<const Eigen::VectorXd>& exposures) {
  const auto m = exposures.size();
  if (m == 0) return 0.0;
  Eigen::VectorXd sorted = exposures;
  std::sort(sorted.data(), sorted.data() + m);
  // Σ_i Σ_j |z_i − z_j| = 2 Σ_k (2k − m + 1) z_(k) for the ascending order (0-based k).
  double acc = 0.0;
  for (Eigen::Index k = 0; k < m; ++k) {
    acc += static_cast<double>(2 * k - m + 1) * sorted[k];
  }
  return acc / static_cast<double>(m);
}

double objective_eval(const ObjectiveSpec& spec, const Eigen::VectorXd& z) {
  check_input(spec, z);
  const auto m = static_cast<Eigen::Index>(spec.item_count);
  switch (spec.kind) {
    case ObjectiveKind::ggf: {
      Eigen::VectorXd sorted = z;
      std::sort(sorted.data(), sorted.data() + sorted.size());
      return spec.weights.dot(sorted);
    }
    case ObjectiveKind::linear: return spec.weights.dot(z);
    case ObjectiveKind::user_only: return z[m];
    case ObjectiveKind::gini_tradeoff: return z[m] - spec.trade_off * gini_index(z.head(m));
    case ObjectiveKind::eq_exposure: {
      const auto items = z.head(m);
      const double spread = (items.array() - items.mean()).matrix().norm();
      return z[m] - spec.trade_off * spread / static_cast<double>(m);
    }
    case ObjectiveKind::welfare: {
      check_welfare_domain(spec, z);
      return z[m] + spec.trade_off * z.head(m).array().pow(spec.welfare_exponent).sum();
    }
  }
  return 0.0;
}

Eigen::VectorXd objective_supergradient(const ObjectiveSpec& spec, const Eigen::VectorXd& z) {
  check_input(spec, z);
  const auto m = static_cast<Eigen::Index>(spec.item_count);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(z.size());
  switch (spec.kind) {
    case ObjectiveKind::ggf: {
      const auto order = stable_ascending_order(z);
      for (std::size_t k = 0; k < order.size(); ++k) {
        g[static_cast<Eigen::Index>(order[k])] = spec.weights[static_cast<Eigen::Index>(k)];
      }
      return g;
    }
    case ObjectiveKind::linear: return spec.weights;
    case ObjectiveKind::user_only: g[m] = 1.0; return g;
    case ObjectiveKind::gini_tradeoff: {
      // ∂/∂z_i of (1/2m)ΣΣ|z_a − z_b| is (1/m)Σ_j sign(z_i − z_j), sign(0) = 0.
      const auto order = stable_ascending_order(z.head(m));
      const double scale = spec.trade_off / static_cast<double>(m);
      std::size_t start = 0;
      const auto count = static_cast<std::size_t>(m);
      while (start < count) {
        std::size_t end = start + 1;
        while (end < count && z[static_cast<Eigen::Index>(order[end])] ==
                                  z[static_cast<Eigen::Index>(order[start])]) {
          ++end;
        }
        const double less = static_cast<double>(start);
        const double greater = static_cast<double>(count - end);
        for (std::size_t k = start; k < end; ++k) {
          g[static_cast<Eigen::Index>(order[k])] = -scale * (less - greater);
        }
        start = end;
      }
      g[m] = 1.0;
      return g;
    }
    case ObjectiveKind::eq_exposure: {
      Eigen::VectorXd centered = z.head(m).array() - z.head(m).mean();
      const double spread = centered.norm();
      if (spread > 0.0) {
        // Re-center after normalizing: at rounding-level spreads the division
        // amplifies the residual mean, which would leave the supergradient set.
        centered /= spread;
        centered.array() -= centered.mean();
        const double length = centered.norm();
        if (length > 0.5) {
          g.head(m) = -(spec.trade_off / static_cast<double>(m)) * centered / length;
        }
      }
      g[m] = 1.0;
      return g;
    }
    case ObjectiveKind::welfare: {
      check_welfare_domain(spec, z);
      const double a = spec.welfare_exponent;
      for (Eigen::Index j = 0; j < m; ++j) {
        g[j] = spec.trade_off * a * std::pow(std::max(z[j], kWelfareFloor), a - 1.0);
      }
      g[m] = 1.0;
      return g;
    }
  }
  return g;
}

std::string_view to_string(SmoothingMethod method) {
  switch (method) {
    case SmoothingMethod::none: return "none";
    case SmoothingMethod::moreau: return "moreau";
    case SmoothingMethod::randomized: return "randomized";
  }
  return "unknown";
}

SmoothingMethod smoothing_method_from_string(std::string_view name) {
  for (auto method : {SmoothingMethod::none, SmoothingMethod::moreau, SmoothingMethod::randomized}) {
    if (to_string(method) == name) return method;
  }
  throw ArgumentError("unknown smoothing method '" + std::string(name) + "'");
}

void SmoothingConfig::validate(const ObjectiveSpec& spec) const {
  if (method == SmoothingMethod::none && !spec.smoothness) {
    throw ArgumentError("nonsmooth objective requires smoothing");
  }
  if (!(beta0 > 0.0) || !std::isfinite(beta0)) throw ArgumentError("beta0 must be positive");
  if (!(prox_tolerance > 0.0)) throw ArgumentError("prox_tolerance must be positive");
  if (prox_max_iters == 0) throw ArgumentError("prox_max_iters must be >= 1");
  if (sample_count == 0) throw ArgumentError("sample_count must be >= 1");
}

Eigen::VectorXd sample_unit_ball(Rng& rng, Eigen::Index dim) {
  Eigen::VectorXd xi(dim);
  double norm2 = 0.0;
  do {
    for (Eigen::Index i = 0; i < dim; ++i) xi[i] = rng.normal();
    norm2 = xi.squaredNorm();
  } while (norm2 == 0.0);
  const double radius = std::pow(rng.uniform(), 1.0 / static_cast<double>(dim));
  return xi * (radius / std::sqrt(norm2));
}

RandomizedGradient randomized_smoothing_gradient(const ObjectiveSpec& spec,
                                                 const Eigen::VectorXd& z, double beta,
                                                 std::size_t samples, std::uint64_t seed) {
  if (!(beta > 0.0)) throw ArgumentError("smoothing beta must be positive");
  if (samples == 0) throw ArgumentError("sample_count must be >= 1");
  check_input(spec, z);
  RandomizedGradient out;
  out.gradient = Eigen::VectorXd::Zero(z.size());
  if (spec.kind == ObjectiveKind::linear) {
    out.gradient = spec.weights;
    return out;
  }
  Rng rng(seed);
  for (std::size_t k = 0; k < samples; ++k) {
    Eigen::VectorXd point = z + beta * sample_unit_ball(rng, z.size());
    if (!spec.box.contains(point, 0.0)) {
      point = spec.box.clamp(point);
      ++out.clamped_samples;
    }
    out.gradient += objective_supergradient(spec, point);
  }
  out.gradient /= static_cast<double>(samples);
  return out;
}

Eigen::VectorXd randomized_smoothing_gradient(const ObjectiveSpec& spec, const Eigen::VectorXd& z,
                                              double beta, const SmoothingConfig& cfg) {
  return randomized_smoothing_gradient(spec, z, beta, cfg.sample_count, cfg.rng_seed).gradient;
}

double smoothing_schedule(SmoothingMethod method, std::size_t tau, const ObjectiveSpec& spec,
                          const SmoothingConfig& cfg) {
  const double root = std::sqrt(static_cast<double>(tau) + 1.0);
  switch (method) {
    case SmoothingMethod::moreau: return cfg.beta0 / root;
    case SmoothingMethod::randomized:
      return std::pow(static_cast<double>(spec.dim()), 0.25) * spec.box.diameter / root;
    case SmoothingMethod::none: break;
  }
  throw ContractError("smoothing schedule is undefined without a smoothing method");
}

namespace {
std::uint64_t randomized_step_seed(std::uint64_t base, std::size_t tau) {
  return Rng(base).split("randomized_smoothing", tau).key();
}
}  // namespace

Eigen::VectorXd smoothed_gradient(const ObjectiveSpec& spec, const SmoothingConfig& cfg,
                                  std::size_t tau, const Eigen::VectorXd& z) {
  switch (cfg.method) {
    case SmoothingMethod::none: return objective_supergradient(spec, z);
    case SmoothingMethod::moreau:
      return moreau_gradient(spec, z, smoothing_schedule(cfg.method, tau, spec, cfg), cfg);
    case SmoothingMethod::randomized:
      return randomized_smoothing_gradient(spec, z, smoothing_schedule(cfg.method, tau, spec, cfg),
                                           cfg.sample_count, randomized_step_seed(cfg.rng_seed, tau))
          .gradient;
  }
  return objective_supergradient(spec, z);
}

GradientOracle::GradientOracle(ObjectiveSpec spec, SmoothingConfig cfg)
    : spec_(std::move(spec)), cfg_(cfg), oracle_(make_oracle(spec_)) {}

Eigen::VectorXd GradientOracle::operator()(std::size_t tau, const Eigen::VectorXd& z) {
  switch (cfg_.method) {
    case SmoothingMethod::none: return objective_supergradient(spec_, z);
    case SmoothingMethod::moreau: {
      const double beta = smoothing_schedule(cfg_.method, tau, spec_, cfg_);
      return solve_moreau_prox(oracle_, z, beta, cfg_, &warm_).gradient;
    }
    case SmoothingMethod::randomized: {
      auto est = randomized_smoothing_gradient(spec_, z,
                                               smoothing_schedule(cfg_.method, tau, spec_, cfg_),
                                               cfg_.sample_count,
                                               randomized_step_seed(cfg_.rng_seed, tau));
      clamped_ += est.clamped_samples;
      return est.gradient;
    }
  }
  return objective_supergradient(spec_, z);
}

}  // namespace cbcr
