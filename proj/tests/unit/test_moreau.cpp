#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "cbcr/errors.hpp"
#include "cbcr/objectives.hpp"
#include "test_helpers.hpp"

namespace {

using cbcr::ObjectiveKind;
using cbcr::RewardBox;
using cbcr::Rng;
using cbcr::testing::uniform_vector;

double prox_objective(const cbcr::ObjectiveSpec& spec, const Eigen::VectorXd& y,
                      const Eigen::VectorXd& z, double beta) {
  return cbcr::objective_eval(spec, y) - (y - z).squaredNorm() / (2.0 * beta);
}

std::vector<cbcr::ObjectiveSpec> nonsmooth_objectives() {
  return {cbcr::make_ggf(cbcr::geometric_ggf_weights(6), RewardBox::uniform(6, 0.0, 1.0)),
          cbcr::make_ranking_objective(ObjectiveKind::gini_tradeoff, 5, 1.0,
                                       RewardBox::uniform(6, 0.0, 1.0)),
          cbcr::make_ranking_objective(ObjectiveKind::eq_exposure, 5, 2.0,
                                       RewardBox::uniform(6, 0.0, 1.0))};
}

TEST(Moreau, ProxPointBeatsEveryPerturbation) {
  Rng rng(21);
  cbcr::SmoothingConfig cfg;
  cfg.prox_tolerance = 1e-12;
  for (const auto& spec : nonsmooth_objectives()) {
    const auto n = static_cast<Eigen::Index>(spec.dim());
    for (double beta : {0.01, 0.3, 2.0}) {
      for (int rep = 0; rep < 20; ++rep) {
        const Eigen::VectorXd z = uniform_vector(rng, n, -0.5, 1.5);
        const Eigen::VectorXd y = cbcr::moreau_prox(spec, z, beta, cfg);
        const double best = prox_objective(spec, y, z, beta);
        for (int k = 0; k < 50; ++k) {
          const Eigen::VectorXd d = uniform_vector(rng, n, -1.0, 1.0) * (k < 25 ? 1e-3 : 1e-1);
          EXPECT_LE(prox_objective(spec, y + d, z, beta), best + 1e-12)
              << cbcr::to_string(spec.kind) << " beta=" << beta;
        }
      }
    }
  }
}

TEST(Moreau, ClosedFormProxAgreesWithGenericSolver) {
  Rng rng(22);
  cbcr::SmoothingConfig cfg;
  cfg.prox_tolerance = 1e-12;
  const std::vector<cbcr::ObjectiveSpec> specs = {
      cbcr::make_ggf(cbcr::geometric_ggf_weights(6), RewardBox::uniform(6, 0.0, 1.0)),
      cbcr::make_ggf((Eigen::VectorXd(4) << 1.0, 1.0, 0.3, 0.0).finished(),
                     RewardBox::uniform(4, 0.0, 1.0)),
      cbcr::make_ranking_objective(ObjectiveKind::gini_tradeoff, 5, 1.0,
                                   RewardBox::uniform(6, 0.0, 1.0)),
      cbcr::make_ranking_objective(ObjectiveKind::gini_tradeoff, 8, 0.25,
                                   RewardBox::uniform(9, 0.0, 1.0)),
      cbcr::make_ranking_objective(ObjectiveKind::eq_exposure, 5, 2.0,
                                   RewardBox::uniform(6, 0.0, 1.0))};
  for (const auto& spec : specs) {
    cbcr::ConcaveOracle exact = cbcr::make_oracle(spec);
    ASSERT_TRUE(static_cast<bool>(exact.exact_prox)) << cbcr::to_string(spec.kind);
    cbcr::ConcaveOracle generic = exact;
    generic.exact_prox = nullptr;
    const auto n = static_cast<Eigen::Index>(spec.dim());
    for (double beta : {0.01, 0.5, 3.0}) {
      for (int rep = 0; rep < 30; ++rep) {
        const Eigen::VectorXd z = uniform_vector(rng, n, -0.5, 1.5);
        const auto a = cbcr::solve_moreau_prox(exact, z, beta, cfg);
        SCOPED_TRACE(std::string(cbcr::to_string(spec.kind)) + " beta=" + std::to_string(beta));
        const auto b = cbcr::solve_moreau_prox(generic, z, beta, cfg);
        EXPECT_LE((a.point - b.point).norm(), 1e-8) << cbcr::to_string(spec.kind);
      }
    }
  }
}

TEST(Moreau, LinearProxIsAShift) {
  // argmax ⟨w, y⟩ − ‖y − z‖²/(2β) is y = z + βw; the envelope is ⟨w, z⟩ + β‖w‖²/2.
  const Eigen::Vector3d w(1.0, -2.0, 0.5);
  const auto spec = cbcr::make_linear(w, RewardBox::uniform(3, 0.0, 1.0));
  const Eigen::Vector3d z(0.2, 0.7, 0.1);
  const double beta = 0.3;
  cbcr::SmoothingConfig cfg;
  EXPECT_LE((cbcr::moreau_prox(spec, z, beta, cfg) - (z + beta * w)).norm(), 1e-14);
  EXPECT_LE((cbcr::moreau_gradient(spec, z, beta, cfg) - w).norm(), 1e-12);
  EXPECT_NEAR(cbcr::moreau_envelope(spec, z, beta, cfg), w.dot(z) + beta * w.squaredNorm() / 2.0,
              1e-14);
}

TEST(Moreau, WelfareProxSolvesItsStationarityEquation) {
  // Each item coordinate solves βαγ y^(α−1) = y − z, the user coordinate shifts by β.
  const double trade = 0.8;
  const double alpha = 0.5;
  const auto spec = cbcr::make_ranking_objective(ObjectiveKind::welfare, 3, trade,
                                                 RewardBox::uniform(4, 0.0, 1.0), alpha);
  const Eigen::Vector4d z(0.1, 0.5, 0.9, 0.4);
  const double beta = 0.2;
  cbcr::SmoothingConfig cfg;
  cfg.prox_tolerance = 1e-12;
  const Eigen::VectorXd y = cbcr::moreau_prox(spec, z, beta, cfg);
  for (Eigen::Index i = 0; i < 3; ++i) {
    EXPECT_NEAR(beta * trade * alpha * std::pow(y[i], alpha - 1.0), y[i] - z[i], 1e-9);
  }
  EXPECT_NEAR(y[3], z[3] + beta, 1e-12);
}

TEST(Moreau, GradientIsOneOverBetaLipschitz) {
  Rng rng(23);
  cbcr::SmoothingConfig cfg;
  for (const auto& spec : nonsmooth_objectives()) {
    const auto n = static_cast<Eigen::Index>(spec.dim());
    const double beta = 0.1;
    for (int rep = 0; rep < 200; ++rep) {
      const Eigen::VectorXd a = uniform_vector(rng, n, 0.0, 1.0);
      const Eigen::VectorXd b = a + uniform_vector(rng, n, -0.05, 0.05);
      const double lhs =
          (cbcr::moreau_gradient(spec, a, beta, cfg) - cbcr::moreau_gradient(spec, b, beta, cfg)).norm();
      EXPECT_LE(lhs, (a - b).norm() / beta + 1e-9);
    }
  }
}

TEST(Moreau, EnvelopeConvergesToObjectiveAsBetaShrinks) {
  const auto spec = cbcr::make_ggf(cbcr::geometric_ggf_weights(4), RewardBox::uniform(4, 0.0, 1.0));
  const Eigen::Vector4d z(0.3, 0.3, 0.8, 0.1);
  cbcr::SmoothingConfig cfg;
  const double f = cbcr::objective_eval(spec, z);
  double previous = std::numeric_limits<double>::infinity();
  for (double beta : {1.0, 0.1, 0.01, 0.001}) {
    const double fb = cbcr::moreau_envelope(spec, z, beta, cfg);
    EXPECT_GE(fb, f - 1e-12);
    EXPECT_LE(fb, previous + 1e-12);
    previous = fb;
  }
  EXPECT_NEAR(previous, f, spec.lipschitz * spec.lipschitz * 0.001 / 2.0 + 1e-12);
}

TEST(Moreau, RejectsNonPositiveBeta) {
  const auto spec = cbcr::make_ggf(cbcr::geometric_ggf_weights(2), RewardBox::uniform(2, 0.0, 1.0));
  cbcr::SmoothingConfig cfg;
  EXPECT_THROW(cbcr::moreau_prox(spec, Eigen::Vector2d(0.1, 0.2), 0.0, cfg), cbcr::ArgumentError);
}

TEST(Smoothing, ScheduleDecaysAsInverseSquareRoot) {
  const auto spec = cbcr::make_ggf(cbcr::geometric_ggf_weights(4), RewardBox::uniform(4, 0.0, 1.0));
  cbcr::SmoothingConfig cfg;
  cfg.beta0 = 0.5;
  EXPECT_NEAR(cbcr::smoothing_schedule(cbcr::SmoothingMethod::moreau, 3, spec, cfg), 0.25, 1e-15);
  // D^{1/4} · D_K / √(τ+1) with D = 4, D_K = 2.
  EXPECT_NEAR(cbcr::smoothing_schedule(cbcr::SmoothingMethod::randomized, 3, spec, cfg),
              std::sqrt(2.0) * 2.0 / 2.0, 1e-15);
  EXPECT_THROW(cbcr::smoothing_schedule(cbcr::SmoothingMethod::none, 3, spec, cfg),
               cbcr::ContractError);
}

TEST(Smoothing, NonsmoothObjectiveRequiresSmoothing) {
  const auto spec = cbcr::make_ggf(cbcr::geometric_ggf_weights(3), RewardBox::uniform(3, 0.0, 1.0));
  cbcr::SmoothingConfig cfg;
  cfg.method = cbcr::SmoothingMethod::none;
  EXPECT_THROW(cfg.validate(spec), cbcr::ArgumentError);
  const auto linear = cbcr::make_linear(Eigen::Vector3d(1.0, 1.0, 1.0), RewardBox::uniform(3, 0.0, 1.0));
  EXPECT_NO_THROW(cfg.validate(linear));
}

TEST(Smoothing, UnitBallSamplesHaveTheUniformRadiusLaw) {
  Rng rng(24);
  constexpr int kN = 100000;
  const Eigen::Index dim = 3;
  int inner = 0;
  for (int i = 0; i < kN; ++i) {
    const double r = cbcr::sample_unit_ball(rng, dim).norm();
    ASSERT_LE(r, 1.0);
    if (r <= 0.5) ++inner;
  }
  // P(‖ξ‖ ≤ 1/2) = (1/2)^3.
  const double p = 0.125;
  EXPECT_NEAR(static_cast<double>(inner) / kN, p, 4.0 * std::sqrt(p * (1.0 - p) / kN));
}

TEST(Smoothing, RandomizedGradientOfLinearObjectiveIsExact) {
  const Eigen::Vector3d w(0.5, -1.0, 2.0);
  const auto spec = cbcr::make_linear(w, RewardBox::uniform(3, 0.0, 1.0));
  const auto est =
      cbcr::randomized_smoothing_gradient(spec, Eigen::Vector3d(0.5, 0.5, 0.5), 0.1, 16, 9);
  EXPECT_LE((est.gradient - w).norm(), 1e-14);
  EXPECT_EQ(est.clamped_samples, 0u);
}

TEST(Smoothing, RandomizedGradientAveragesSupergradients) {
  // Near a kink of min(z1, z2) the smoothed gradient splits its mass evenly.
  const auto spec = cbcr::make_ggf(Eigen::Vector2d(1.0, 0.0), RewardBox::uniform(2, 0.0, 1.0));
  const auto est =
      cbcr::randomized_smoothing_gradient(spec, Eigen::Vector2d(0.5, 0.5), 0.1, 20000, 10);
  EXPECT_NEAR(est.gradient[0], 0.5, 0.02);
  EXPECT_NEAR(est.gradient[1], 0.5, 0.02);
}

TEST(Smoothing, GradientOracleMatchesStatelessGradient) {
  const auto spec = cbcr::make_ranking_objective(ObjectiveKind::gini_tradeoff, 4, 1.0,
                                                 RewardBox::uniform(5, 0.0, 1.0));
  cbcr::SmoothingConfig cfg;
  cfg.beta0 = 0.2;
  cbcr::GradientOracle oracle(spec, cfg);
  Rng rng(25);
  for (std::size_t tau = 0; tau < 20; ++tau) {
    const Eigen::VectorXd z = uniform_vector(rng, 5, 0.0, 1.0);
    EXPECT_LE((oracle(tau, z) - cbcr::smoothed_gradient(spec, cfg, tau, z)).norm(), 1e-10);
  }
}

}  // namespace
