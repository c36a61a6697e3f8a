#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <string>

#include "cbcr/config.hpp"
#include "cbcr/errors.hpp"

namespace {

bool contains(const std::vector<std::string>& errors, const std::string& needle) {
  return std::any_of(errors.begin(), errors.end(),
                     [&](const std::string& e) { return e.find(needle) != std::string::npos; });
}

std::string config_error(const std::string& json) {
  try {
    cbcr::parse_config(json);
  } catch (const cbcr::ConfigError& e) {
    return e.what();
  }
  return {};
}

TEST(Config, DefaultConfigurationIsValid) {
  EXPECT_TRUE(cbcr::validate_config(cbcr::RunConfig{}).empty());
}

TEST(Config, ParsesEverySection) {
  const cbcr::RunConfig cfg = cbcr::parse_config(R"({
    "name": "demo",
    "env": {"type": "lowrank", "users": 30, "items": 10, "latent_dim": 2, "k_bar": 3,
            "position_weights": "logistic", "factor_seed": 4},
    "objective": {"kind": "gini_tradeoff", "trade_off": 0.5},
    "smoothing": {"method": "moreau", "beta0": 0.02},
    "algorithm": {"type": "fairlearn", "c": 0.2, "alpha": 2.0, "delta_prime": 0.05},
    "steps": 500, "seeds": "3..5", "metrics_stride": 50, "record_timing": false,
    "oracle": {"max_iters": 100, "tolerance": 1e-5}
  })");
  EXPECT_EQ(cfg.name, "demo");
  EXPECT_EQ(cfg.env.kind, cbcr::EnvKind::lowrank);
  EXPECT_EQ(cfg.env.items, 10u);
  EXPECT_EQ(cfg.env.positions, cbcr::PositionPreset::logistic);
  EXPECT_EQ(cfg.env.factor_seed, 4u);
  EXPECT_EQ(cfg.objective.kind, cbcr::ObjectiveKind::gini_tradeoff);
  EXPECT_DOUBLE_EQ(cfg.objective.trade_off, 0.5);
  EXPECT_DOUBLE_EQ(cfg.smoothing.beta0, 0.02);
  EXPECT_EQ(cfg.algorithm.kind, cbcr::AlgorithmKind::fairlearn);
  EXPECT_DOUBLE_EQ(cfg.algorithm.fairlearn_c, 0.2);
  EXPECT_DOUBLE_EQ(cfg.algorithm.fairlearn_alpha, 2.0);
  EXPECT_EQ(cfg.seeds, (std::vector<std::uint64_t>{3, 4, 5}));
  EXPECT_FALSE(cfg.record_timing);
  EXPECT_EQ(cfg.oracle.max_iters, 100u);
  EXPECT_EQ(cfg.hash.size(), 16u);
  EXPECT_TRUE(cbcr::validate_config(cfg).empty());
}

TEST(Config, ReportsEveryMalformedField) {
  const std::string what = config_error(R"({"steps": "many", "env": {"type": "synthetic", "arm_count": -3},
                                           "colour": 1})");
  EXPECT_NE(what.find("steps"), std::string::npos) << what;
  EXPECT_NE(what.find("env.arm_count"), std::string::npos) << what;
  EXPECT_NE(what.find("colour"), std::string::npos) << what;
}

TEST(Config, RejectsUnknownEnumValues) {
  EXPECT_NE(config_error(R"({"algorithm": {"type": "thompson"}})").find("algorithm.type"),
            std::string::npos);
  EXPECT_NE(config_error(R"({"env": {"type": "atari"}})").find("env.type"), std::string::npos);
  EXPECT_FALSE(config_error("[1, 2]").empty());
  EXPECT_FALSE(config_error("{ not json").empty());
}

TEST(Config, NonsmoothObjectiveRequiresSmoothing) {
  cbcr::RunConfig cfg;
  cfg.smoothing.method = cbcr::SmoothingMethod::none;
  EXPECT_TRUE(contains(cbcr::validate_config(cfg), "nonsmooth objective requires smoothing"));
  cfg.objective.kind = cbcr::ObjectiveKind::linear;
  cfg.objective.weights = std::vector<double>(5, 1.0);
  EXPECT_TRUE(cbcr::validate_config(cfg).empty());
}

TEST(Config, FairLearnAboveTheFeasibleRateIsRejected) {
  cbcr::RunConfig cfg;
  cfg.env.kind = cbcr::EnvKind::lowrank;
  cfg.objective.kind = cbcr::ObjectiveKind::gini_tradeoff;
  cfg.algorithm.kind = cbcr::AlgorithmKind::fairlearn;
  cfg.algorithm.fairlearn_c = 2.0 * static_cast<double>(cfg.env.k_bar) / static_cast<double>(cfg.env.items);
  EXPECT_TRUE(contains(cbcr::validate_config(cfg), "FairLearn is infeasible"));
  cfg.algorithm.fairlearn_c = static_cast<double>(cfg.env.k_bar) / static_cast<double>(cfg.env.items);
  EXPECT_TRUE(cbcr::validate_config(cfg).empty());
}

TEST(Config, AlgorithmMustMatchTheEnvironment) {
  cbcr::RunConfig cfg;
  cfg.algorithm.kind = cbcr::AlgorithmKind::fw_linucbrank;
  EXPECT_TRUE(contains(cbcr::validate_config(cfg), "does not match"));
}

TEST(Config, IncreasingGgfWeightsAreRejected) {
  cbcr::RunConfig cfg;
  cfg.objective.weights = std::vector<double>{0.1, 0.2, 0.3, 0.4, 0.5};
  EXPECT_TRUE(contains(cbcr::validate_config(cfg), "non-increasing"));
}

TEST(Config, SeedListsAndRanges) {
  EXPECT_EQ(cbcr::parse_seed_list("0..3"), (std::vector<std::uint64_t>{0, 1, 2, 3}));
  EXPECT_EQ(cbcr::parse_seed_list("1,2,5"), (std::vector<std::uint64_t>{1, 2, 5}));
  EXPECT_EQ(cbcr::parse_seed_list("7"), (std::vector<std::uint64_t>{7}));
  EXPECT_THROW(cbcr::parse_seed_list("3..1"), cbcr::ArgumentError);
  EXPECT_THROW(cbcr::parse_seed_list("1,,2"), cbcr::ArgumentError);
  EXPECT_THROW(cbcr::parse_seed_list("x"), cbcr::ArgumentError);
}

TEST(Config, HashIgnoresKeyOrderAndTracksValues) {
  const auto a = cbcr::parse_config(R"({"steps": 10, "name": "x", "seeds": [1, 2]})");
  const auto b = cbcr::parse_config(R"({"seeds": [1, 2], "name": "x", "steps": 10})");
  const auto c = cbcr::parse_config(R"({"seeds": [1, 2], "name": "x", "steps": 11})");
  EXPECT_EQ(a.hash, b.hash);
  EXPECT_NE(a.hash, c.hash);
  EXPECT_EQ(a.hash, cbcr::config_hash(a));
}

TEST(Config, CanonicalFormRoundTrips) {
  const auto a = cbcr::parse_config(R"({"env": {"type": "lowrank"}, "objective": {"kind": "welfare",
      "trade_off": 0.3}, "algorithm": {"type": "linucbrank"}, "steps": 7})");
  const auto b = cbcr::parse_config(cbcr::canonical_config(a));
  EXPECT_EQ(cbcr::canonical_config(a), cbcr::canonical_config(b));
  EXPECT_EQ(a.hash, b.hash);
}

TEST(Config, ShippedConfigurationsAreValid) {
  for (const auto& entry : std::filesystem::directory_iterator(CBCR_CONFIG_DIR)) {
    if (entry.path().extension() != ".json") continue;
    const cbcr::RunConfig cfg = cbcr::load_config(entry.path());
    EXPECT_TRUE(cbcr::validate_config(cfg).empty()) << entry.path();
  }
}

TEST(Config, FactorPathIsResolvedAgainstTheConfigDirectory) {
  const auto dir = std::filesystem::temp_directory_path() / "cbcr_test_config_dir";
  std::filesystem::create_directories(dir);
  const auto path = dir / "run.json";
  {
    std::ofstream out(path);
    out << R"({"env": {"type": "lowrank", "factors": "factors.csv"}, "objective": {"kind": "gini_tradeoff"},
              "algorithm": {"type": "fw_linucbrank"}})";
  }
  const cbcr::RunConfig cfg = cbcr::load_config(path);
  ASSERT_TRUE(cfg.env.factors.has_value());
  EXPECT_EQ(*cfg.env.factors, dir / "factors.csv");
  EXPECT_TRUE(contains(cbcr::validate_config(cfg), "does not exist"));
  std::filesystem::remove_all(dir);
}

}  // namespace
