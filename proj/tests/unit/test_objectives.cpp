#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "cbcr/errors.hpp"
#include "cbcr/objectives.hpp"
#include "test_helpers.hpp"

namespace {

using cbcr::ObjectiveKind;
using cbcr::RewardBox;
using cbcr::Rng;
using cbcr::testing::uniform_vector;

double pairwise_gini(const Eigen::VectorXd& z) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    for (Eigen::Index j = 0; j < z.size(); ++j) acc += std::abs(z[i] - z[j]);
  }
  return acc / (2.0 * static_cast<double>(z.size()));
}

// min over all permutations σ of Σ_i w_i z_σ(i); equals the GGF for non-increasing w.
double ggf_by_permutations(const Eigen::VectorXd& w, const Eigen::VectorXd& z) {
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(z.size()));
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  double best = std::numeric_limits<double>::infinity();
  do {
    double v = 0.0;
    for (Eigen::Index i = 0; i < z.size(); ++i) v += w[i] * z[perm[static_cast<std::size_t>(i)]];
    best = std::min(best, v);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

std::vector<cbcr::ObjectiveSpec> all_objectives() {
  const std::size_t m = 4;
  const RewardBox ranking_box = RewardBox::uniform(m + 1, 0.0, 1.0);
  return {cbcr::make_ggf(cbcr::geometric_ggf_weights(5), RewardBox::uniform(5, 0.0, 1.0)),
          cbcr::make_linear(Eigen::Vector3d(1.0, -2.0, 0.5), RewardBox::uniform(3, 0.0, 1.0)),
          cbcr::make_ranking_objective(ObjectiveKind::gini_tradeoff, m, 0.7, ranking_box),
          cbcr::make_ranking_objective(ObjectiveKind::eq_exposure, m, 0.7, ranking_box),
          cbcr::make_ranking_objective(ObjectiveKind::welfare, m, 0.7, ranking_box, 0.5),
          cbcr::make_ranking_objective(ObjectiveKind::user_only, m, 0.0, ranking_box)};
}

TEST(Objectives, GeometricWeightsHalveEachStep) {
  const Eigen::VectorXd w = cbcr::geometric_ggf_weights(4);
  EXPECT_DOUBLE_EQ(w[0], 1.0);
  EXPECT_DOUBLE_EQ(w[1], 0.5);
  EXPECT_DOUBLE_EQ(w[2], 0.25);
  EXPECT_DOUBLE_EQ(w[3], 0.125);
}

TEST(Objectives, GiniMatchesPairwiseDefinition) {
  Rng rng(11);
  for (int rep = 0; rep < 50; ++rep) {
    const Eigen::VectorXd z = uniform_vector(rng, 7, 0.0, 2.0);
    EXPECT_NEAR(cbcr::gini_index(z), pairwise_gini(z), 1e-12);
  }
  EXPECT_NEAR(cbcr::gini_index(Eigen::VectorXd::Constant(5, 0.3)), 0.0, 1e-15);
}

TEST(Objectives, GgfMatchesMinimumOverPermutations) {
  Rng rng(12);
  const Eigen::VectorXd w = cbcr::geometric_ggf_weights(5);
  const auto spec = cbcr::make_ggf(w, RewardBox::uniform(5, 0.0, 1.0));
  for (int rep = 0; rep < 50; ++rep) {
    const Eigen::VectorXd z = uniform_vector(rng, 5, 0.0, 1.0);
    EXPECT_NEAR(cbcr::objective_eval(spec, z), ggf_by_permutations(w, z), 1e-12);
  }
}

TEST(Objectives, RankingValuesMatchDefinitions) {
  const std::size_t m = 4;
  const RewardBox box = RewardBox::uniform(m + 1, 0.0, 1.0);
  const Eigen::VectorXd z = (Eigen::VectorXd(5) << 0.1, 0.4, 0.2, 0.9, 0.6).finished();
  const Eigen::VectorXd items = z.head(4);
  const double beta = 0.8;

  const auto gini = cbcr::make_ranking_objective(ObjectiveKind::gini_tradeoff, m, beta, box);
  EXPECT_NEAR(cbcr::objective_eval(gini, z), 0.6 - beta * pairwise_gini(items), 1e-14);

  const auto eq = cbcr::make_ranking_objective(ObjectiveKind::eq_exposure, m, beta, box);
  double var = 0.0;
  const double mean = items.mean();
  for (Eigen::Index i = 0; i < 4; ++i) var += (items[i] - mean) * (items[i] - mean);
  EXPECT_NEAR(cbcr::objective_eval(eq, z), 0.6 - beta * std::sqrt(var) / 4.0, 1e-14);

  const auto welfare = cbcr::make_ranking_objective(ObjectiveKind::welfare, m, beta, box, 0.5);
  double roots = 0.0;
  for (Eigen::Index i = 0; i < 4; ++i) roots += std::sqrt(items[i]);
  EXPECT_NEAR(cbcr::objective_eval(welfare, z), 0.6 + beta * roots, 1e-14);

  const auto user = cbcr::make_ranking_objective(ObjectiveKind::user_only, m, 0.0, box);
  EXPECT_DOUBLE_EQ(cbcr::objective_eval(user, z), 0.6);
}

TEST(Objectives, SupergradientInequalityHolds) {
  Rng rng(13);
  for (const auto& spec : all_objectives()) {
    const auto n = static_cast<Eigen::Index>(spec.dim());
    for (int rep = 0; rep < 200; ++rep) {
      const Eigen::VectorXd z = uniform_vector(rng, n, 0.01, 1.0);
      const Eigen::VectorXd y = uniform_vector(rng, n, 0.01, 1.0);
      const Eigen::VectorXd g = cbcr::objective_supergradient(spec, z);
      EXPECT_LE(cbcr::objective_eval(spec, y),
                cbcr::objective_eval(spec, z) + g.dot(y - z) + 1e-12)
          << cbcr::to_string(spec.kind);
    }
  }
}

TEST(Objectives, AnalyticLipschitzBoundsDifferenceQuotients) {
  Rng rng(14);
  for (const auto& spec : all_objectives()) {
    if (spec.kind == ObjectiveKind::welfare) continue;
    const auto n = static_cast<Eigen::Index>(spec.dim());
    double worst = 0.0;
    for (int rep = 0; rep < 2000; ++rep) {
      const Eigen::VectorXd z = uniform_vector(rng, n, 0.0, 1.0);
      const Eigen::VectorXd y = uniform_vector(rng, n, 0.0, 1.0);
      worst = std::max(worst, std::abs(cbcr::objective_eval(spec, y) - cbcr::objective_eval(spec, z)) /
                                  (y - z).norm());
    }
    EXPECT_LE(worst, spec.lipschitz * (1.0 + 1e-12)) << cbcr::to_string(spec.kind);
  }
}

TEST(Objectives, GiniLipschitzIsAttainedByTheSortedSignVector) {
  // The supergradient at distinct coordinates is (-β/m)(2k − m + 1) on the
  // item sorted at position k, plus 1 on the user coordinate.
  const std::size_t m = 6;
  const double beta = 1.3;
  const auto spec = cbcr::make_ranking_objective(ObjectiveKind::gini_tradeoff, m, beta,
                                                 RewardBox::uniform(m + 1, 0.0, 1.0));
  double sq = 1.0;
  for (std::size_t k = 0; k < m; ++k) {
    const double c = (2.0 * static_cast<double>(k) - static_cast<double>(m) + 1.0) * beta /
                     static_cast<double>(m);
    sq += c * c;
  }
  EXPECT_NEAR(spec.lipschitz, std::sqrt(sq), 1e-12);
}

TEST(Objectives, WelfareLipschitzIsUnknownBelowExponentOne) {
  const auto spec = cbcr::make_ranking_objective(ObjectiveKind::welfare, 3, 1.0,
                                                 RewardBox::uniform(4, 0.0, 1.0), 0.5);
  EXPECT_FALSE(cbcr::analytic_lipschitz(spec).has_value());
}

TEST(Objectives, WelfareRejectsNegativeExposure) {
  const auto spec = cbcr::make_ranking_objective(ObjectiveKind::welfare, 2, 1.0,
                                                 RewardBox::uniform(3, 0.0, 1.0), 0.5);
  EXPECT_THROW(cbcr::objective_eval(spec, Eigen::Vector3d(-0.1, 0.2, 0.3)), cbcr::DomainError);
}

TEST(Objectives, GgfRejectsIncreasingWeights) {
  EXPECT_THROW(cbcr::make_ggf(Eigen::Vector2d(0.5, 1.0), RewardBox::uniform(2, 0.0, 1.0)),
               cbcr::ArgumentError);
}

TEST(Objectives, EqExposureSupergradientStaysCenteredNearConstantItems) {
  const auto spec = cbcr::make_ranking_objective(ObjectiveKind::eq_exposure, 5, 2.0,
                                                 RewardBox::uniform(6, 0.0, 1.0));
  Eigen::VectorXd z(6);
  z << 0.3, 0.3, 0.3, 0.3, 0.3, 0.9;
  for (int k = 0; k < 5; ++k) {
    z[k] += 1e-16 * (k - 2);
    const Eigen::VectorXd g = cbcr::objective_supergradient(spec, z);
    EXPECT_NEAR(g.head(5).sum(), 0.0, 1e-14);
    EXPECT_LE(g.head(5).norm(), 2.0 / 5.0 + 1e-14);
  }
}

TEST(Objectives, OnlyLinearKindsAreSmooth) {
  for (const auto& spec : all_objectives()) {
    const bool linear = spec.kind == ObjectiveKind::linear || spec.kind == ObjectiveKind::user_only;
    EXPECT_EQ(spec.smoothness.has_value(), linear) << cbcr::to_string(spec.kind);
  }
}

TEST(Objectives, KindNamesRoundTrip) {
  for (auto kind : {ObjectiveKind::ggf, ObjectiveKind::gini_tradeoff, ObjectiveKind::eq_exposure,
                    ObjectiveKind::welfare, ObjectiveKind::user_only, ObjectiveKind::linear}) {
    EXPECT_EQ(cbcr::objective_kind_from_string(cbcr::to_string(kind)), kind);
  }
}

TEST(RewardBox, ContainsAndClamp) {
  const RewardBox box = RewardBox::uniform(2, 0.0, 1.0);
  EXPECT_TRUE(box.contains(Eigen::Vector2d(0.0, 1.0)));
  EXPECT_FALSE(box.contains(Eigen::Vector2d(-0.1, 0.5)));
  const Eigen::VectorXd c = box.clamp(Eigen::Vector2d(-0.1, 1.5));
  EXPECT_DOUBLE_EQ(c[0], 0.0);
  EXPECT_DOUBLE_EQ(c[1], 1.0);
  EXPECT_NEAR(box.diameter, std::sqrt(2.0), 1e-15);
}

}  // namespace
