#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "cbcr/errors.hpp"
#include "cbcr/objectives.hpp"

namespace cbcr {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

// Welfare prox is separable: the user coordinate moves by β, each item solves
// max_y b·y^a − (y − z)²/(2β) over y > 0, whose derivative is strictly decreasing.
double welfare_coordinate_prox(double z, double beta, double b, double a) {
  if (b == 0.0) return z;
  if (a == 1.0) return z + beta * b;
  auto slope = [&](double y) { return b * a * std::pow(y, a - 1.0) - (y - z) / beta; };
  double lo = 0.0;
  double hi = std::max(1.0, z + beta * b * a) + 1.0;
  for (int it = 0; it < 400; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (slope(mid) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

Eigen::VectorXd welfare_prox(const ObjectiveSpec& spec, const Eigen::VectorXd& z, double beta) {
  const auto m = static_cast<Eigen::Index>(spec.item_count);
  Eigen::VectorXd y = z;
  y[m] += beta;
  for (Eigen::Index j = 0; j < m; ++j) {
    y[j] = welfare_coordinate_prox(z[j], beta, spec.trade_off, spec.welfare_exponent);
  }
  return y;
}

Eigen::VectorXd eq_exposure_prox(const ObjectiveSpec& spec, const Eigen::VectorXd& z,
                                 double beta) {
  const auto m = static_cast<Eigen::Index>(spec.item_count);
  Eigen::VectorXd y = z;
  y[m] += beta;
  const double mean = z.head(m).mean();
  const Eigen::VectorXd centered = z.head(m).array() - mean;
  const double spread = centered.norm();
  const double shrink = beta * spec.trade_off / static_cast<double>(m);
  if (spread <= shrink) {
    y.head(m).setConstant(mean);
  } else {
    y.head(m) = (mean + (1.0 - shrink / spread) * centered.array()).matrix();
  }
  return y;
}

// argmin_y λ Σ_k c_k y_(k) + ‖y − z‖²/2 for non-decreasing c, y_(k) the k-th
// smallest entry: the minimizer is ordered like z, so on the ascending order it
// is the isotonic regression of z_(k) − λ c_k (pool adjacent violators).
Eigen::VectorXd sorted_weight_prox(const Eigen::VectorXd& z, double lambda,
                                   const Eigen::VectorXd& c) {
  const auto n = z.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return z[a] < z[b]; });
  std::vector<double> block_sum;
  std::vector<Eigen::Index> block_size;
  block_sum.reserve(static_cast<std::size_t>(n));
  block_size.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index k = 0; k < n; ++k) {
    double sum = z[order[static_cast<std::size_t>(k)]] - lambda * c[k];
    Eigen::Index size = 1;
    while (!block_sum.empty() &&
           block_sum.back() * static_cast<double>(size) > sum * static_cast<double>(block_size.back())) {
      sum += block_sum.back();
      size += block_size.back();
      block_sum.pop_back();
      block_size.pop_back();
    }
    block_sum.push_back(sum);
    block_size.push_back(size);
  }
  Eigen::VectorXd y(n);
  Eigen::Index k = 0;
  for (std::size_t b = 0; b < block_sum.size(); ++b) {
    const double mean = block_sum[b] / static_cast<double>(block_size[b]);
    for (Eigen::Index j = 0; j < block_size[b]; ++j, ++k) y[order[static_cast<std::size_t>(k)]] = mean;
  }
  return y;
}

Eigen::VectorXd ggf_prox(const Eigen::VectorXd& w, const Eigen::VectorXd& z, double beta) {
  return sorted_weight_prox(z, beta, -w);
}

Eigen::VectorXd gini_tradeoff_prox(const ObjectiveSpec& spec, const Eigen::VectorXd& z,
                                   double beta) {
  const auto m = static_cast<Eigen::Index>(spec.item_count);
  Eigen::VectorXd c(m);
  for (Eigen::Index k = 0; k < m; ++k) c[k] = static_cast<double>(2 * k - m + 1);
  Eigen::VectorXd y(m + 1);
  y.head(m) = sorted_weight_prox(z.head(m), beta * spec.trade_off / static_cast<double>(m), c);
  y[m] = z[m] + beta;
  return y;
}

struct AffineSolution {
  Eigen::VectorXd weights;
  bool ok = false;
};

// Minimizer of ‖g + shift‖² over the affine hull of the atoms, in barycentric weights.
AffineSolution affine_minimizer(const std::vector<Eigen::VectorXd>& atoms,
                                const Eigen::VectorXd& shift) {
  const auto k = static_cast<Eigen::Index>(atoms.size());
  AffineSolution out;
  out.weights = Eigen::VectorXd::Ones(k);
  if (k == 1) {
    out.ok = true;
    return out;
  }
  const auto dim = atoms[0].size();
  if (k - 1 > dim) return out;
  Eigen::MatrixXd basis(dim, k - 1);
  for (Eigen::Index j = 1; j < k; ++j) basis.col(j - 1) = atoms[static_cast<std::size_t>(j)] - atoms[0];
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(basis);
  qr.setThreshold(1e-10);
  if (qr.rank() < k - 1) return out;
  const Eigen::VectorXd mu = qr.solve(-(atoms[0] + shift));
  out.weights[0] = 1.0 - mu.sum();
  out.weights.tail(k - 1) = mu;
  out.ok = out.weights.allFinite();
  return out;
}

Eigen::VectorXd combine(const std::vector<Eigen::VectorXd>& atoms,
                        const std::vector<double>& weights) {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(atoms.front().size());
  for (std::size_t i = 0; i < atoms.size(); ++i) g += weights[i] * atoms[i];
  return g;
}

// Wolfe minor cycle: move the weights toward the affine minimizer until it lies
// in the relative interior of the active set, dropping atoms that hit zero.
// Returns false when the active set is affinely dependent.
bool minor_cycle(std::vector<Eigen::VectorXd>& atoms, std::vector<double>& weights,
                 const Eigen::VectorXd& shift) {
  for (std::size_t guard = 0; guard <= atoms.size() + 1; ++guard) {
    const AffineSolution aff = affine_minimizer(atoms, shift);
    if (!aff.ok) return false;
    if ((aff.weights.array() > 0.0).all()) {
      for (std::size_t i = 0; i < atoms.size(); ++i) {
        weights[i] = aff.weights[static_cast<Eigen::Index>(i)];
      }
      return true;
    }
    double theta = 1.0;
    std::size_t leaving = 0;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
      const double a = aff.weights[static_cast<Eigen::Index>(i)];
      if (a <= 0.0) {
        const double t = weights[i] / (weights[i] - a);
        if (t < theta) {
          theta = t;
          leaving = i;
        }
      }
    }
    std::vector<Eigen::VectorXd> kept_atoms;
    std::vector<double> kept_weights;
    double total = 0.0;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
      const double w =
          theta * aff.weights[static_cast<Eigen::Index>(i)] + (1.0 - theta) * weights[i];
      if (i == leaving || w <= 1e-15) continue;
      kept_atoms.push_back(std::move(atoms[i]));
      kept_weights.push_back(w);
      total += w;
    }
    if (kept_atoms.empty()) return false;
    for (double& w : kept_weights) w /= total;
    atoms = std::move(kept_atoms);
    weights = std::move(kept_weights);
  }
  return true;
}

bool same_atom(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return (a - b).lpNorm<Eigen::Infinity>() <= 1e-14 * (1.0 + a.lpNorm<Eigen::Infinity>());
}

// For positively homogeneous concave f, f(y) = min_{c ∈ C} ⟨c, y⟩ with C = ∂f(0),
// and the prox is y* = z + β g* where g* = argmin_{g ∈ C} ‖g + z/β‖². The
// supergradient at y = z + βg is the linear-minimization oracle over C, so
// Wolfe's minimum-norm-point algorithm applies. The dual is β-strongly convex
// with Frank-Wolfe gap ⟨y, g − s⟩, so ‖y − y*‖² ≤ 2β⟨y, g − s⟩. Returns an empty
// optional when the iteration ends without that certificate.
std::optional<ProxResult> dual_wolfe_prox(const ConcaveOracle& f, const Eigen::VectorXd& z, double beta,
                           const SmoothingConfig& cfg, ProxWarmStart* warm) {
  const Eigen::VectorXd shift = z / beta;
  std::vector<Eigen::VectorXd> atoms;
  std::vector<double> weights;
  if (warm != nullptr && !warm->atoms.empty() && warm->atoms.front().size() == z.size() &&
      warm->atoms.size() == warm->weights.size()) {
    atoms = warm->atoms;
    weights = warm->weights;
    if (!minor_cycle(atoms, weights, shift)) {
      atoms.clear();
      weights.clear();
    }
  }
  if (atoms.empty()) {
    atoms.push_back(f.supergradient(z));
    weights.push_back(1.0);
  }

  ProxResult out;
  Eigen::VectorXd g = combine(atoms, weights);
  double residual = std::numeric_limits<double>::infinity();
  bool converged = false;
  std::size_t iter = 0;
  for (; iter < cfg.prox_max_iters; ++iter) {
    const Eigen::VectorXd y = z + beta * g;
    Eigen::VectorXd s = f.supergradient(y);
    const double gap = beta * y.dot(g - s);
    residual = std::sqrt(2.0 * std::max(gap, 0.0));
    const double floor =
        64.0 * kEps * beta * y.norm() * (g.norm() + s.norm()) * static_cast<double>(z.size());
    if (residual <= cfg.prox_tolerance || gap <= floor) {
      converged = true;
      break;
    }
    const bool known = std::any_of(atoms.begin(), atoms.end(),
                                   [&](const Eigen::VectorXd& a) { return same_atom(a, s); });
    if (known) break;
    const auto saved_atoms = atoms;
    const auto saved_weights = weights;
    atoms.push_back(std::move(s));
    weights.push_back(0.0);
    const Eigen::VectorXd newest = atoms.back();
    if (!minor_cycle(atoms, weights, shift)) {
      atoms = saved_atoms;
      weights = saved_weights;
      break;
    }
    g = combine(atoms, weights);
    const bool stalled = std::none_of(atoms.begin(), atoms.end(), [&](const Eigen::VectorXd& a) {
      return same_atom(a, newest);
    });
    if (stalled) break;
  }
  out.point = z + beta * g;
  out.gradient = g;
  out.iterations = iter;
  out.residual = std::isfinite(residual) ? residual : 0.0;
  if (!converged) {
    if (warm != nullptr) {
      warm->atoms.clear();
      warm->weights.clear();
    }
    return std::nullopt;
  }
  if (warm != nullptr) {
    warm->atoms = std::move(atoms);
    warm->weights = std::move(weights);
  }
  return out;
}

// Projected gradient ascent with backtracking on φ(y) = f(y) − ‖y − z‖²/(2β).
ProxResult primal_ascent_prox(const ConcaveOracle& f, const Eigen::VectorXd& z, double beta,
                              const SmoothingConfig& cfg) {
  auto project = [&](const Eigen::VectorXd& v) { return f.project ? f.project(v) : v; };
  auto phi = [&](const Eigen::VectorXd& y) { return f.value(y) - (y - z).squaredNorm() / (2.0 * beta); };
  Eigen::VectorXd y = project(z);
  double step = beta;
  double change = std::numeric_limits<double>::infinity();
  std::size_t iter = 0;
  for (; iter < cfg.prox_max_iters; ++iter) {
    const Eigen::VectorXd grad = f.supergradient(y) - (y - z) / beta;
    const double current = phi(y);
    Eigen::VectorXd next = project(y + step * grad);
    while (phi(next) < current + grad.dot(next - y) - (next - y).squaredNorm() / (2.0 * step) &&
           step > 1e-18 * beta) {
      step *= 0.5;
      next = project(y + step * grad);
    }
    change = (next - y).norm();
    y = std::move(next);
    step = std::min(step * 2.0, beta);
    if (change <= cfg.prox_tolerance) break;
  }
  ProxResult out;
  out.point = y;
  out.gradient = (y - z) / beta;
  out.iterations = iter;
  out.residual = change;
  if (change > cfg.prox_tolerance) {
    throw SolverError("Moreau prox did not converge within " + std::to_string(cfg.prox_max_iters) +
                          " iterations",
                      y, change);
  }
  return out;
}

}  // namespace

ConcaveOracle make_oracle(const ObjectiveSpec& spec) {
  ConcaveOracle f;
  f.value = [spec](const Eigen::VectorXd& z) { return objective_eval(spec, z); };
  f.supergradient = [spec](const Eigen::VectorXd& z) { return objective_supergradient(spec, z); };
  f.positively_homogeneous = spec.positively_homogeneous();
  switch (spec.kind) {
    case ObjectiveKind::linear:
      f.exact_prox = [w = spec.weights](const Eigen::VectorXd& z, double beta) {
        return Eigen::VectorXd(z + beta * w);
      };
      break;
    case ObjectiveKind::user_only:
      f.exact_prox = [m = static_cast<Eigen::Index>(spec.item_count)](const Eigen::VectorXd& z,
                                                                       double beta) {
        Eigen::VectorXd y = z;
        y[m] += beta;
        return y;
      };
      break;
    case ObjectiveKind::eq_exposure:
      f.exact_prox = [spec](const Eigen::VectorXd& z, double beta) {
        return eq_exposure_prox(spec, z, beta);
      };
      break;
    case ObjectiveKind::welfare:
      f.exact_prox = [spec](const Eigen::VectorXd& z, double beta) {
        return welfare_prox(spec, z, beta);
      };
      f.project = [m = static_cast<Eigen::Index>(spec.item_count)](const Eigen::VectorXd& z) {
        Eigen::VectorXd y = z;
        y.head(m) = y.head(m).cwiseMax(0.0);
        return y;
      };
      break;
    case ObjectiveKind::ggf:
      f.exact_prox = [w = spec.weights](const Eigen::VectorXd& z, double beta) {
        return ggf_prox(w, z, beta);
      };
      break;
    case ObjectiveKind::gini_tradeoff:
      f.exact_prox = [spec](const Eigen::VectorXd& z, double beta) {
        return gini_tradeoff_prox(spec, z, beta);
      };
      break;
  }
  return f;
}

ProxResult solve_moreau_prox(const ConcaveOracle& f, const Eigen::VectorXd& z, double beta,
                             const SmoothingConfig& cfg, ProxWarmStart* warm) {
  if (!(beta > 0.0) || !std::isfinite(beta)) throw ArgumentError("prox beta must be positive");
  if (!z.allFinite()) throw ArgumentError("prox input contains non-finite values");
  if (f.exact_prox) {
    ProxResult out;
    out.point = f.exact_prox(z, beta);
    out.gradient = (out.point - z) / beta;
    return out;
  }
  if (f.positively_homogeneous) {
    if (auto out = dual_wolfe_prox(f, z, beta, cfg, warm)) return *std::move(out);
  }
  return primal_ascent_prox(f, z, beta, cfg);
}

Eigen::VectorXd moreau_prox(const ObjectiveSpec& spec, const Eigen::VectorXd& z, double beta,
                            const SmoothingConfig& cfg) {
  return solve_moreau_prox(make_oracle(spec), z, beta, cfg).point;
}

Eigen::VectorXd moreau_gradient(const ObjectiveSpec& spec, const Eigen::VectorXd& z, double beta,
                                const SmoothingConfig& cfg) {
  return solve_moreau_prox(make_oracle(spec), z, beta, cfg).gradient;
}

double moreau_envelope(const ObjectiveSpec& spec, const Eigen::VectorXd& z, double beta,
                       const SmoothingConfig& cfg) {
  const Eigen::VectorXd y = moreau_prox(spec, z, beta, cfg);
  return objective_eval(spec, y) - (y - z).squaredNorm() / (2.0 * beta);
}

}  // namespace cbcr
