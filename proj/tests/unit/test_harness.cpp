#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "cbcr/errors.hpp"
#include "cbcr/harness.hpp"
#include "cbcr/scalar_bandits.hpp"
#include "json.hpp"

namespace {

namespace fs = std::filesystem;

cbcr::RunConfig small_synthetic() {
  cbcr::RunConfig cfg;
  cfg.name = "small";
  cfg.env.synthetic.pool_size = 100;
  cfg.env.synthetic.arm_count = 8;
  cfg.env.synthetic.reward_dim = 3;
  cfg.env.synthetic.context_dim = 4;
  cfg.smoothing.beta0 = 0.05;
  cfg.steps = 55;
  cfg.metrics_stride = 10;
  cfg.seeds = {0, 1, 2};
  cfg.record_timing = false;
  cfg.hash = cbcr::config_hash(cfg);
  return cfg;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("cbcr_test_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

std::vector<std::vector<std::string>> read_cells(const fs::path& path) {
  std::ifstream in(path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

TEST(Harness, LogsEveryStrideAndTheLastStep) {
  const cbcr::RunConfig cfg = small_synthetic();
  const auto env = cbcr::build_environment(cfg, 0);
  const auto run = cbcr::run_single(cfg, 0, env, 1.0);
  std::vector<std::size_t> steps;
  for (const auto& row : run.rows) steps.push_back(row.step);
  EXPECT_EQ(steps, (std::vector<std::size_t>{10, 20, 30, 40, 50, 55}));
  EXPECT_EQ(run.final_state.tau, 55u);
}

TEST(Harness, SingleStepRunHasOneRow) {
  cbcr::RunConfig cfg = small_synthetic();
  cfg.steps = 1;
  const auto env = cbcr::build_environment(cfg, 0);
  const auto run = cbcr::run_single(cfg, 0, env, 1.0);
  ASSERT_EQ(run.rows.size(), 1u);
  EXPECT_EQ(run.rows[0].step, 1u);
  EXPECT_TRUE(run.rows[0].scalar_regret_cum.has_value());
  EXPECT_FALSE(run.rows[0].item_gini.has_value());
}

TEST(Harness, InvalidConfigurationIsRejectedBeforeRunning) {
  cbcr::RunConfig cfg = small_synthetic();
  cfg.smoothing.method = cbcr::SmoothingMethod::none;
  const auto env = cbcr::build_environment(small_synthetic(), 0);
  EXPECT_THROW(cbcr::run_single(cfg, 0, env, 1.0), cbcr::ConfigError);
}

TEST(Harness, RerunsAreByteIdentical) {
  const cbcr::RunConfig cfg = small_synthetic();
  const fs::path a = fresh_dir("rerun_a");
  const fs::path b = fresh_dir("rerun_b");
  const auto ra = cbcr::run_experiment(cfg, {a, std::nullopt, 2});
  const auto rb = cbcr::run_experiment(cfg, {b, std::nullopt, 1});
  ASSERT_EQ(ra.seed_files.size(), 3u);
  for (std::size_t i = 0; i < ra.seed_files.size(); ++i) {
    EXPECT_EQ(slurp(ra.seed_files[i]), slurp(rb.seed_files[i]));
    EXPECT_EQ(ra.seed_files[i].filename(), "small_seed" + std::to_string(i) + ".csv");
  }
  EXPECT_EQ(slurp(ra.aggregate_file), slurp(rb.aggregate_file));
  EXPECT_EQ(slurp(ra.oracle_file), slurp(rb.oracle_file));
  for (const auto& entry : fs::directory_iterator(a)) {
    EXPECT_NE(entry.path().extension(), ".partial");
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Harness, AggregateEqualsRecomputationFromSeedFiles) {
  const cbcr::RunConfig cfg = small_synthetic();
  const fs::path dir = fresh_dir("aggregate");
  const auto result = cbcr::run_experiment(cfg, {dir, std::nullopt, 1});
  std::vector<cbcr::RunMetrics> runs;
  for (const auto& file : result.seed_files) runs.push_back(cbcr::read_metrics_csv(file));

  const auto cells = read_cells(result.aggregate_file);
  ASSERT_EQ(cells.front()[0], "step");
  ASSERT_EQ(cells.front()[1], "seeds");
  ASSERT_EQ(cells.front()[2], "f_value_mean");
  ASSERT_EQ(cells.front()[3], "f_value_stderr");
  ASSERT_EQ(cells.size(), runs.front().size() + 1);
  for (std::size_t r = 0; r < runs.front().size(); ++r) {
    const auto& row = cells[r + 1];
    EXPECT_EQ(std::stoul(row[0]), runs.front()[r].step);
    EXPECT_EQ(row[1], "3");
    for (std::size_t col = 0; col < cbcr::kMetricValueColumns.size(); ++col) {
      std::vector<double> xs;
      for (const auto& run : runs) {
        const auto v = cbcr::metric_values(run[r])[col];
        if (v) xs.push_back(*v);
      }
      const std::string& mean_cell = row[2 + 2 * col];
      const std::string& se_cell = row[3 + 2 * col];
      if (xs.size() != runs.size()) {
        EXPECT_TRUE(mean_cell.empty());
        continue;
      }
      double mean = 0.0;
      for (double x : xs) mean += x;
      mean /= static_cast<double>(xs.size());
      double ss = 0.0;
      for (double x : xs) ss += (x - mean) * (x - mean);
      const double se = std::sqrt(ss / static_cast<double>(xs.size() - 1)) / std::sqrt(static_cast<double>(xs.size()));
      EXPECT_NEAR(std::stod(mean_cell), mean, 1e-12 * (1.0 + std::abs(mean))) << cbcr::kMetricValueColumns[col];
      EXPECT_NEAR(std::stod(se_cell), se, 1e-12 * (1.0 + std::abs(se))) << cbcr::kMetricValueColumns[col];
    }
  }

  const auto oracle = nlohmann::json::parse(slurp(result.oracle_file));
  EXPECT_EQ(oracle["name"], "small");
  EXPECT_EQ(oracle["config_hash"], cfg.hash);
  EXPECT_EQ(oracle["oracles"].size(), 3u);
  fs::remove_all(dir);
}

TEST(Harness, CsvRoundTripIsExact) {
  cbcr::MetricsRow row;
  row.step = 12;
  row.seed = 3;
  row.f_value = 0.1 + 0.2;
  row.f_star = 1.0 / 3.0;
  row.regret = row.f_star - row.f_value;
  row.user_utility = 0.7;
  row.item_gini = 1e-17;
  row.wall_clock_ns = 123456789;
  const fs::path path = fs::temp_directory_path() / "cbcr_test_roundtrip.csv";
  {
    std::ofstream out(path);
    cbcr::write_metrics_header(out);
    cbcr::write_metrics_row(out, row);
  }
  const auto rows = cbcr::read_metrics_csv(path);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].f_value, row.f_value);
  EXPECT_EQ(rows[0].f_star, row.f_star);
  EXPECT_EQ(rows[0].regret, row.regret);
  EXPECT_FALSE(rows[0].scalar_regret_cum.has_value());
  EXPECT_EQ(rows[0].item_gini, row.item_gini);
  EXPECT_EQ(rows[0].wall_clock_ns, row.wall_clock_ns);
  EXPECT_EQ(read_cells(path).front().size(), cbcr::kMetricsColumns.size());
  fs::remove(path);
}

TEST(Harness, NonFiniteMetricsAreRefused) {
  cbcr::MetricsRow row;
  row.f_value = std::numeric_limits<double>::quiet_NaN();
  std::ostringstream out;
  EXPECT_THROW(cbcr::write_metrics_row(out, row), cbcr::NumericError);
}

TEST(Harness, MalformedCsvIsAFormatError) {
  const fs::path path = fs::temp_directory_path() / "cbcr_test_bad.csv";
  std::ofstream(path) << "step,seed\n1,2\n";
  EXPECT_THROW(cbcr::read_metrics_csv(path), cbcr::FormatError);
  fs::remove(path);
}

TEST(Harness, IdentityObjectiveReplaysTheScalarBandit) {
  cbcr::RunConfig cfg = small_synthetic();
  cfg.env.synthetic.reward_dim = 1;
  cfg.objective.kind = cbcr::ObjectiveKind::linear;
  cfg.objective.weights = std::vector<double>{1.0};
  cfg.smoothing.method = cbcr::SmoothingMethod::none;
  cfg.steps = 2000;
  cfg.metrics_stride = 100;
  const auto env = cbcr::build_environment(cfg, 4);
  const auto run = cbcr::run_single(cfg, 4, env, 1.0);

  // The same learner without the Frank-Wolfe layer, at confidence δ'/2.
  const auto& ec = env.synthetic->config();
  cbcr::LinUCBConfig lc;
  lc.lambda = cfg.algorithm.lambda;
  lc.delta_prime = cfg.algorithm.delta_prime / 2.0;
  lc.d_theta = std::sqrt(static_cast<double>(ec.reward_dim * ec.context_dim));
  lc.reward_half_width = cfg.algorithm.reward_half_width;
  lc.exploration_scale = cfg.algorithm.exploration_scale;
  cbcr::LinUcb bare(ec.context_dim, lc);
  const cbcr::Rng stream = cbcr::Rng(4).split("run");
  double cumulative = 0.0;
  std::size_t next_row = 0;
  for (std::size_t t = 1; t <= cfg.steps; ++t) {
    const std::size_t idx = env.synthetic->draw_context(stream, t);
    const Eigen::MatrixXd& x = env.synthetic->context(idx);
    const std::size_t arm = bare.select(x);
    cbcr::Rng noise = stream.split("reward", t);
    const double r = env.synthetic->sample_reward(idx, arm, noise)[0];
    bare.update(x.col(static_cast<Eigen::Index>(arm)), r);
    cumulative += r;
    if (next_row < run.rows.size() && run.rows[next_row].step == t) {
      EXPECT_NEAR(run.rows[next_row].f_value * static_cast<double>(t), cumulative, 1e-9) << t;
      ++next_row;
    }
  }
  EXPECT_EQ(next_row, run.rows.size());
}

TEST(Harness, LowRankRunsReportUtilityAndGini) {
  cbcr::RunConfig cfg;
  cfg.name = "ranking";
  cfg.env.kind = cbcr::EnvKind::lowrank;
  cfg.env.users = 10;
  cfg.env.items = 6;
  cfg.env.latent_dim = 2;
  cfg.env.k_bar = 2;
  cfg.objective.kind = cbcr::ObjectiveKind::gini_tradeoff;
  cfg.objective.trade_off = 1.0;
  cfg.algorithm.kind = cbcr::AlgorithmKind::linucbrank;
  cfg.steps = 300;
  cfg.metrics_stride = 100;
  const auto env = cbcr::build_environment(cfg, 0);
  const auto run = cbcr::run_single(cfg, 0, env, 0.5);
  ASSERT_EQ(run.rows.size(), 3u);
  const auto& last = run.rows.back();
  ASSERT_TRUE(last.user_utility && last.item_gini);
  EXPECT_NEAR(last.f_value, *last.user_utility - *last.item_gini, 1e-12);
  EXPECT_FALSE(last.scalar_regret_cum.has_value());
  EXPECT_TRUE(last.pseudo_regret_gap.has_value());
}

TEST(Harness, LowRankEnvironmentIsSharedAcrossSeeds) {
  cbcr::RunConfig cfg;
  cfg.env.kind = cbcr::EnvKind::lowrank;
  cfg.objective.kind = cbcr::ObjectiveKind::gini_tradeoff;
  cfg.algorithm.kind = cbcr::AlgorithmKind::fw_linucbrank;
  EXPECT_EQ(cbcr::environment_seed(cfg, 0), cbcr::environment_seed(cfg, 7));
  cbcr::RunConfig syn;
  EXPECT_NE(cbcr::environment_seed(syn, 0), cbcr::environment_seed(syn, 7));
  syn.env.seed = 11;
  EXPECT_EQ(cbcr::environment_seed(syn, 0), 11u);
}

}  // namespace
