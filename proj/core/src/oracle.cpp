#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "cbcr/errors.hpp"
#include "cbcr/fw_engine.hpp"

namespace cbcr {

FiniteContextModel::FiniteContextModel(std::vector<Eigen::MatrixXd> means,
                                       std::vector<double> probabilities)
    : means_(std::move(means)), probabilities_(std::move(probabilities)) {
  if (means_.empty() || means_.size() != probabilities_.size()) {
    throw ArgumentError("finite context model needs one probability per context");
  }
  double total = 0.0;
  for (std::size_t c = 0; c < means_.size(); ++c) {
    if (means_[c].rows() != means_.front().rows() || means_[c].cols() == 0) {
      throw ArgumentError("context mean matrices must share the reward dimension");
    }
    if (!(probabilities_[c] >= 0.0)) throw ArgumentError("context probabilities must be >= 0");
    total += probabilities_[c];
  }
  if (std::abs(total - 1.0) > 1e-9) throw ArgumentError("context probabilities must sum to 1");
}

std::size_t FiniteContextModel::reward_dim() const {
  return static_cast<std::size_t>(means_.front().rows());
}

LinearResponse FiniteContextModel::best_response(const Eigen::VectorXd& g) const {
  LinearResponse out;
  out.point = Eigen::VectorXd::Zero(means_.front().rows());
  for (std::size_t c = 0; c < means_.size(); ++c) {
    const Eigen::VectorXd scores = (g.transpose() * means_[c]).transpose();
    const auto arm = static_cast<Eigen::Index>(argmax_lowest(scores));
    out.point += probabilities_[c] * means_[c].col(arm);
    out.value += probabilities_[c] * scores[arm];
  }
  return out;
}

namespace {

// max 1ᵀy s.t. A y ≤ 1, y ≥ 0 for a strictly positive A, by the tableau simplex
// method with Bland's rule. Returns (y, dual u).
std::pair<Eigen::VectorXd, Eigen::VectorXd> solve_positive_lp(const Eigen::MatrixXd& A) {
  const Eigen::Index p = A.rows();
  const Eigen::Index q = A.cols();
  const Eigen::Index cols = q + p + 1;
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(p + 1, cols);
  T.topLeftCorner(p, q) = A;
  T.block(0, q, p, p).setIdentity();
  T.col(cols - 1).head(p).setOnes();
  T.row(p).head(q).setOnes();  // reduced costs
  std::vector<Eigen::Index> basis(static_cast<std::size_t>(p));
  for (Eigen::Index i = 0; i < p; ++i) basis[static_cast<std::size_t>(i)] = q + i;

  constexpr double kTol = 1e-12;
  for (std::size_t guard = 0; guard < 100000; ++guard) {
    Eigen::Index entering = -1;
    for (Eigen::Index j = 0; j < q + p; ++j) {
      if (T(p, j) > kTol) {
        entering = j;
        break;
      }
    }
    if (entering < 0) break;
    Eigen::Index leaving = -1;
    double best_ratio = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < p; ++i) {
      if (T(i, entering) > kTol) {
        const double ratio = T(i, cols - 1) / T(i, entering);
        if (ratio < best_ratio - 1e-15 ||
            (std::abs(ratio - best_ratio) <= 1e-15 && leaving >= 0 &&
             basis[static_cast<std::size_t>(i)] < basis[static_cast<std::size_t>(leaving)])) {
          best_ratio = ratio;
          leaving = i;
        }
      }
    }
    if (leaving < 0) throw NumericError("matrix game LP is unbounded");
    T.row(leaving) /= T(leaving, entering);
    for (Eigen::Index i = 0; i <= p; ++i) {
      if (i != leaving && T(i, entering) != 0.0) {
        T.row(i) -= T(i, entering) * T.row(leaving);
      }
    }
    basis[static_cast<std::size_t>(leaving)] = entering;
  }
  Eigen::VectorXd y = Eigen::VectorXd::Zero(q);
  for (Eigen::Index i = 0; i < p; ++i) {
    const Eigen::Index var = basis[static_cast<std::size_t>(i)];
    if (var < q) y[var] = std::max(T(i, cols - 1), 0.0);
  }
  Eigen::VectorXd u = (-T.row(p).segment(q, p)).transpose().cwiseMax(0.0);
  return {y, u};
}

bool contains_point(const std::vector<Eigen::VectorXd>& points, const Eigen::VectorXd& v) {
  return std::any_of(points.begin(), points.end(), [&](const Eigen::VectorXd& p) {
    return (p - v).lpNorm<Eigen::Infinity>() <= 1e-13 * (1.0 + v.lpNorm<Eigen::Infinity>());
  });
}

double checked_eval(const ObjectiveSpec& objective, const Eigen::VectorXd& s) {
  const double v = objective_eval(objective, s);
  if (!std::isfinite(v)) throw NumericError("objective is not finite at an oracle iterate");
  return v;
}

Eigen::VectorXd oracle_start_direction(const ObjectiveSpec& objective) {
  return objective_supergradient(objective, 0.5 * (objective.box.lower + objective.box.upper));
}

// For positively homogeneous f, f* = max_{s∈S} min_{c∈C} ⟨c, s⟩ with C = ∂f(0):
// a bilinear game between the achievable set and the supergradient hull.
// Fully corrective Frank-Wolfe on both sides (double oracle): the restricted
// game is solved exactly, S grows by the per-context argmax at the current
// dual point and C by the supergradient at the current primal point.
OracleResult double_oracle(const KnownRewardModel& model, const ObjectiveSpec& objective,
                           std::size_t iters, double tol) {
  std::vector<Eigen::VectorXd> primal;
  std::vector<Eigen::VectorXd> dual;
  const Eigen::VectorXd g0 = oracle_start_direction(objective);
  LinearResponse first = model.best_response(g0);
  OracleResult out;
  out.upper_bound = first.value;
  out.point = first.point;
  out.value = checked_eval(objective, first.point);
  primal.push_back(first.point);
  dual.push_back(g0);
  const Eigen::VectorXd g1 = objective_supergradient(objective, first.point);
  if (!contains_point(dual, g1)) dual.push_back(g1);

  std::size_t it = 0;
  for (; it < iters; ++it) {
    Eigen::MatrixXd payoff(static_cast<Eigen::Index>(primal.size()),
                           static_cast<Eigen::Index>(dual.size()));
    for (std::size_t i = 0; i < primal.size(); ++i) {
      for (std::size_t j = 0; j < dual.size(); ++j) {
        payoff(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = primal[i].dot(dual[j]);
      }
    }
    const MatrixGameSolution game = solve_matrix_game(payoff);
    Eigen::VectorXd s = Eigen::VectorXd::Zero(primal.front().size());
    for (std::size_t i = 0; i < primal.size(); ++i) s += game.row_strategy[static_cast<Eigen::Index>(i)] * primal[i];
    Eigen::VectorXd g = Eigen::VectorXd::Zero(dual.front().size());
    for (std::size_t j = 0; j < dual.size(); ++j) g += game.column_strategy[static_cast<Eigen::Index>(j)] * dual[j];

    const double lower = checked_eval(objective, s);
    if (lower > out.value) {
      out.value = lower;
      out.point = s;
    }
    const LinearResponse response = model.best_response(g);
    out.upper_bound = std::min(out.upper_bound, response.value);
    if (out.upper_bound - out.value <= tol) {
      ++it;
      break;
    }
    const Eigen::VectorXd c = objective_supergradient(objective, s);
    const bool new_primal = !contains_point(primal, response.point);
    const bool new_dual = !contains_point(dual, c);
    if (new_primal) primal.push_back(response.point);
    if (new_dual) dual.push_back(c);
    if (!new_primal && !new_dual) {
      ++it;
      break;
    }
  }
  out.iterations = it;
  out.gap = std::max(out.upper_bound - out.value, 0.0);
  return out;
}

// Exact-gradient Frank-Wolfe with line search; the certificate
// f* ≤ f(s) + max_{s'∈S} ⟨g, s' − s⟩ holds for any concave f and g ∈ ∂f(s).
OracleResult gradient_frank_wolfe(const KnownRewardModel& model, const ObjectiveSpec& objective,
                                  std::size_t iters, double tol) {
  Eigen::VectorXd s = model.best_response(oracle_start_direction(objective)).point;
  OracleResult out;
  out.point = s;
  out.value = checked_eval(objective, s);
  out.upper_bound = std::numeric_limits<double>::infinity();
  std::size_t it = 0;
  for (; it < iters; ++it) {
    const double fs = checked_eval(objective, s);
    if (fs > out.value) {
      out.value = fs;
      out.point = s;
    }
    const Eigen::VectorXd g = objective_supergradient(objective, s);
    const LinearResponse response = model.best_response(g);
    out.upper_bound = std::min(out.upper_bound, fs + response.value - g.dot(s));
    if (out.upper_bound - out.value <= tol) {
      ++it;
      break;
    }
    const Eigen::VectorXd direction = response.point - s;
    double lo = 0.0;
    double hi = 1.0;
    const double ratio = 0.5 * (std::sqrt(5.0) - 1.0);
    auto along = [&](double step) { return checked_eval(objective, Eigen::VectorXd(s + step * direction)); };
    for (int k = 0; k < 80; ++k) {
      const double a = hi - ratio * (hi - lo);
      const double b = lo + ratio * (hi - lo);
      if (along(a) < along(b)) {
        lo = a;
      } else {
        hi = b;
      }
    }
    s += 0.5 * (lo + hi) * direction;
  }
  out.iterations = it;
  out.gap = std::max(out.upper_bound - out.value, 0.0);
  return out;
}

}  // namespace

MatrixGameSolution solve_matrix_game(const Eigen::MatrixXd& payoff) {
  if (payoff.size() == 0 || !payoff.allFinite()) {
    throw ArgumentError("matrix game payoff must be non-empty and finite");
  }
  const double shift = 1.0 - payoff.minCoeff();
  const Eigen::MatrixXd positive = payoff.array() + shift;
  auto [y, u] = solve_positive_lp(positive);
  const double total = y.sum();
  if (!(total > 0.0)) throw NumericError("matrix game LP returned a degenerate solution");
  MatrixGameSolution out;
  out.column_strategy = y / total;
  const double dual_total = u.sum();
  out.row_strategy = dual_total > 0.0
                         ? Eigen::VectorXd(u / dual_total)
                         : Eigen::VectorXd::Constant(payoff.rows(), 1.0 / static_cast<double>(payoff.rows()));
  out.value = 1.0 / total - shift;
  return out;
}

OracleResult oracle_fstar(const KnownRewardModel& model, const ObjectiveSpec& objective,
                          std::size_t iters, double tol) {
  if (model.reward_dim() != objective.dim()) {
    throw ArgumentError("environment reward dimension does not match the objective");
  }
  if (iters == 0) throw ArgumentError("oracle needs at least one iteration");
  if (objective.positively_homogeneous()) return double_oracle(model, objective, iters, tol);
  return gradient_frank_wolfe(model, objective, iters, tol);
}

}  // namespace cbcr
