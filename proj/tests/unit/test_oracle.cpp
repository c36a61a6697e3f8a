#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "cbcr/environments.hpp"
#include "cbcr/fw_engine.hpp"
#include "test_helpers.hpp"

namespace {

using cbcr::RewardBox;
using cbcr::Rng;

// Two equiprobable contexts with two arms each: every achievable mean reward
// is 0.5 μ₁(p, 1−p) + 0.5 μ₂(q, 1−q); search (p, q) on a fine grid.
double grid_fstar(const cbcr::ObjectiveSpec& spec, const Eigen::MatrixXd& m1,
                  const Eigen::MatrixXd& m2, int steps) {
  double best = -std::numeric_limits<double>::infinity();
  for (int i = 0; i <= steps; ++i) {
    const double p = static_cast<double>(i) / steps;
    const Eigen::VectorXd a = m1.col(0) * p + m1.col(1) * (1.0 - p);
    for (int j = 0; j <= steps; ++j) {
      const double q = static_cast<double>(j) / steps;
      const Eigen::VectorXd s = 0.5 * a + 0.5 * (m2.col(0) * q + m2.col(1) * (1.0 - q));
      best = std::max(best, cbcr::objective_eval(spec, s));
    }
  }
  return best;
}

TEST(Oracle, GgfOptimumMatchesGridSearch) {
  Rng rng(51);
  for (int rep = 0; rep < 5; ++rep) {
    const Eigen::MatrixXd m1 = cbcr::testing::uniform_matrix(rng, 2, 2, 0.0, 1.0);
    const Eigen::MatrixXd m2 = cbcr::testing::uniform_matrix(rng, 2, 2, 0.0, 1.0);
    const cbcr::FiniteContextModel model({m1, m2}, {0.5, 0.5});
    const auto spec = cbcr::make_ggf(Eigen::Vector2d(1.0, 0.5), RewardBox::uniform(2, 0.0, 1.0));
    const auto result = cbcr::oracle_fstar(model, spec, 5000, 1e-10);
    const double grid = grid_fstar(spec, m1, m2, 1000);
    EXPECT_GE(result.value, grid - 1e-9);
    // A grid cell moves s by at most 1e-3 · max‖μ(a) − μ(b)‖ ≤ 1e-3·√2.
    EXPECT_LE(result.value, grid + spec.lipschitz * 1e-3 * std::sqrt(2.0));
    EXPECT_LE(result.gap, 1e-10);
    EXPECT_GE(result.upper_bound, result.value - 1e-12);
  }
}

TEST(Oracle, LinearObjectiveOptimumIsTheBestResponse) {
  Rng rng(52);
  std::vector<Eigen::MatrixXd> means;
  for (int c = 0; c < 4; ++c) means.push_back(cbcr::testing::uniform_matrix(rng, 3, 5, 0.0, 1.0));
  const cbcr::FiniteContextModel model(means, {0.1, 0.2, 0.3, 0.4});
  const Eigen::Vector3d w(0.2, 1.0, 0.5);
  const auto spec = cbcr::make_linear(w, RewardBox::uniform(3, 0.0, 1.0));
  double expected = 0.0;
  for (int c = 0; c < 4; ++c) {
    expected += model.probabilities()[static_cast<std::size_t>(c)] * (w.transpose() * means[static_cast<std::size_t>(c)]).maxCoeff();
  }
  const auto result = cbcr::oracle_fstar(model, spec, 100, 1e-12);
  EXPECT_NEAR(result.value, expected, 1e-12);
}

TEST(Oracle, RankingOptimumDominatesEveryDeterministicPolicy) {
  const cbcr::LowRankEnv env(cbcr::generate_lowrank_factors(6, 4, 2, 3), 2,
                             cbcr::position_weights(cbcr::PositionPreset::dcg, 2, 4));
  const auto spec = cbcr::make_ranking_objective(cbcr::ObjectiveKind::gini_tradeoff, 4, 1.0, env.box());
  const auto result = cbcr::oracle_fstar(env, spec, 5000, 1e-8);
  EXPECT_LE(result.gap, 1e-8);
  Rng rng(53);
  for (int rep = 0; rep < 200; ++rep) {
    const Eigen::VectorXd g = cbcr::testing::uniform_vector(rng, 5, -1.0, 1.0);
    const auto response = env.best_response(g);
    EXPECT_LE(cbcr::objective_eval(spec, response.point), result.value + 1e-9);
  }
  // Uniform exposure is achievable by rotating items, so the optimum has (near) zero Gini.
  EXPECT_LE(cbcr::gini_index(result.point.head(4)), 0.05);
}

}  // namespace
