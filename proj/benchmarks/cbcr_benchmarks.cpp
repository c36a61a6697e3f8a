#include <benchmark/benchmark.h>

#include <cmath>

#include "cbcr/environments.hpp"
#include "cbcr/fw_engine.hpp"
#include "cbcr/objectives.hpp"
#include "cbcr/ranking.hpp"
#include "cbcr/rng.hpp"
#include "cbcr/scalar_bandits.hpp"

namespace {

Eigen::VectorXd random_point(cbcr::Rng& rng, Eigen::Index n) {
  Eigen::VectorXd z(n);
  for (Eigen::Index i = 0; i < n; ++i) z[i] = 0.05 + 0.9 * rng.uniform();
  return z;
}

void BM_MoreauGradientGgf(benchmark::State& state) {
  const auto dim = static_cast<std::size_t>(state.range(0));
  const cbcr::ObjectiveSpec spec =
      cbcr::make_ggf(cbcr::geometric_ggf_weights(dim), cbcr::RewardBox::uniform(dim, 0.0, 1.0));
  cbcr::SmoothingConfig cfg;
  cbcr::Rng rng(1);
  const Eigen::VectorXd z = random_point(rng, static_cast<Eigen::Index>(dim));
  for (auto _ : state) benchmark::DoNotOptimize(cbcr::moreau_gradient(spec, z, 0.1, cfg));
}
BENCHMARK(BM_MoreauGradientGgf)->Arg(5)->Arg(50);

void BM_MoreauGradientGini(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const cbcr::ObjectiveSpec spec = cbcr::make_ranking_objective(
      cbcr::ObjectiveKind::gini_tradeoff, m, 1.0, cbcr::ranking_reward_box(m, 5));
  cbcr::SmoothingConfig cfg;
  cbcr::Rng rng(2);
  const Eigen::VectorXd z = random_point(rng, static_cast<Eigen::Index>(m + 1));
  for (auto _ : state) benchmark::DoNotOptimize(cbcr::moreau_gradient(spec, z, 0.1, cfg));
}
BENCHMARK(BM_MoreauGradientGini)->Arg(20)->Arg(200);

void BM_FwLinUcbStep(benchmark::State& state) {
  cbcr::SyntheticMOConfig ec;
  ec.pool_size = 1000;
  const cbcr::SyntheticMOEnv env(ec);
  const cbcr::ObjectiveSpec spec = cbcr::make_ggf(cbcr::geometric_ggf_weights(ec.reward_dim), env.box());
  cbcr::SmoothingConfig sc;
  sc.beta0 = 0.01;
  cbcr::GradientOracle gradient(spec, sc);
  cbcr::LinUCBConfig lc;
  lc.d_theta = std::sqrt(static_cast<double>(ec.reward_dim * ec.context_dim));
  cbcr::FwLinUcb bandit(ec.reward_dim, ec.context_dim, lc);
  cbcr::FWState fw = cbcr::fw_initial_state(env.box());
  const cbcr::Rng run = cbcr::Rng(3).split("run");
  std::size_t t = 0;
  for (auto _ : state) {
    ++t;
    const std::size_t idx = env.draw_context(run, t);
    cbcr::Rng policy = run.split("policy", t);
    const cbcr::FWStepResult step = cbcr::fw_step(fw, gradient, bandit, env.context(idx), policy);
    cbcr::Rng noise = run.split("reward", t);
    const Eigen::VectorXd r = env.sample_reward(idx, step.arm, noise);
    bandit.observe(step.gradient, env.context(idx), step.arm, r);
    fw = cbcr::fw_update(std::move(fw), r, env.box());
  }
}
BENCHMARK(BM_FwLinUcbStep);

void BM_FwLinUcbRankStep(benchmark::State& state) {
  const cbcr::LowRankEnv env(cbcr::generate_lowrank_factors(50, 20, 3, 0), 5,
                             cbcr::position_weights(cbcr::PositionPreset::dcg, 5, 20));
  const cbcr::ObjectiveSpec spec =
      cbcr::make_ranking_objective(cbcr::ObjectiveKind::gini_tradeoff, 20, 1.0, env.box());
  cbcr::SmoothingConfig sc;
  sc.beta0 = 0.01;
  cbcr::RankingLearnerConfig rc;
  rc.k_bar = 5;
  rc.linucb.d_theta = std::sqrt(3.0);
  cbcr::RankingLearner learner(rc, 20, env.feature_dim(), spec, sc);
  const cbcr::Rng run = cbcr::Rng(4).split("run");
  std::size_t t = 0;
  for (auto _ : state) {
    ++t;
    const cbcr::LowRankStep step = cbcr::lowrank_step(env, run, t);
    cbcr::Rng clicks = run.split("clicks", t);
    benchmark::DoNotOptimize(cbcr::fw_linucbrank_step(learner, *step.features, step.pbm, clicks));
  }
}
BENCHMARK(BM_FwLinUcbRankStep);

void BM_OracleSyntheticGgf(benchmark::State& state) {
  cbcr::SyntheticMOConfig ec;
  ec.pool_size = 1000;
  const cbcr::SyntheticMOEnv env(ec);
  const cbcr::ObjectiveSpec spec = cbcr::make_ggf(cbcr::geometric_ggf_weights(ec.reward_dim), env.box());
  for (auto _ : state) benchmark::DoNotOptimize(cbcr::oracle_fstar(env, spec, 5000, 1e-6));
}
BENCHMARK(BM_OracleSyntheticGgf)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
