#include "cbcr/environments.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <string>

#include "cbcr/errors.hpp"

namespace cbcr {

void SyntheticMOConfig::validate() const {
  if (reward_dim == 0 || arm_count == 0 || context_dim == 0) {
    throw ArgumentError("synthetic environment dimensions must be positive");
  }
  if (!(noise_scale >= 0.0)) throw ArgumentError("noise_scale must be >= 0");
  if (pool_size == 0) throw ArgumentError("context pool must be non-empty");
  if (!(reward_upper > 0.0)) throw ArgumentError("reward_upper must be positive");
}

double clamped_normal_mean(double mean, double sd, double lo, double hi) {
  if (!(sd > 0.0)) return std::clamp(mean, lo, hi);
  constexpr double kInvSqrt2 = 0.70710678118654752440;
  constexpr double kInvSqrt2Pi = 0.39894228040143267794;
  const double a = (lo - mean) / sd;
  const double b = (hi - mean) / sd;
  const double cdf_a = 0.5 * std::erfc(-a * kInvSqrt2);
  const double cdf_b = 0.5 * std::erfc(-b * kInvSqrt2);
  const double pdf_a = kInvSqrt2Pi * std::exp(-0.5 * a * a);
  const double pdf_b = kInvSqrt2Pi * std::exp(-0.5 * b * b);
  return lo * cdf_a + hi * (1.0 - cdf_b) + mean * (cdf_b - cdf_a) + sd * (pdf_a - pdf_b);
}

SyntheticMOEnv::SyntheticMOEnv(SyntheticMOConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  const auto D = static_cast<Eigen::Index>(cfg_.reward_dim);
  const auto d = static_cast<Eigen::Index>(cfg_.context_dim);
  const auto K = static_cast<Eigen::Index>(cfg_.arm_count);
  const Rng root(cfg_.seed);

  Rng theta_rng = root.split("theta");
  theta_.resize(D, d);
  for (Eigen::Index i = 0; i < D; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) theta_(i, j) = theta_rng.uniform();
  }
  box_ = RewardBox::uniform(cfg_.reward_dim, 0.0, cfg_.reward_upper);

  Rng pool_rng = root.split("context_pool");
  const double center = 1.0 / static_cast<double>(d);
  const double noise_sd = std::sqrt(cfg_.noise_scale);
  pool_.reserve(cfg_.pool_size);
  means_.reserve(cfg_.pool_size);
  for (std::size_t c = 0; c < cfg_.pool_size; ++c) {
    Eigen::MatrixXd x(d, K);
    for (Eigen::Index a = 0; a < K; ++a) {
      for (Eigen::Index j = 0; j < d; ++j) x(j, a) = pool_rng.normal(center, center);
    }
    Eigen::MatrixXd mu = theta_ * x;
    for (Eigen::Index a = 0; a < K; ++a) {
      for (Eigen::Index i = 0; i < D; ++i) {
        mu(i, a) = clamped_normal_mean(mu(i, a), noise_sd * std::abs(mu(i, a)), 0.0,
                                       cfg_.reward_upper);
      }
    }
    pool_.push_back(std::move(x));
    means_.push_back(std::move(mu));
  }
}

std::size_t SyntheticMOEnv::draw_context(const Rng& run, std::size_t tau) const {
  Rng rng = run.split("context", tau);
  return static_cast<std::size_t>(rng.below(pool_.size()));
}

Eigen::VectorXd SyntheticMOEnv::sample_reward(std::size_t index, std::size_t arm, Rng& rng,
                                              std::size_t* clamped) const {
  const Eigen::VectorXd mu = theta_ * pool_[index].col(static_cast<Eigen::Index>(arm));
  const double noise_sd = std::sqrt(cfg_.noise_scale);
  Eigen::VectorXd r(mu.size());
  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    const double draw = mu[i] + noise_sd * std::abs(mu[i]) * rng.normal();
    r[i] = std::clamp(draw, 0.0, cfg_.reward_upper);
    if (clamped != nullptr && r[i] != draw) ++*clamped;
  }
  return r;
}

LinearResponse SyntheticMOEnv::best_response(const Eigen::VectorXd& g) const {
  LinearResponse out;
  out.point = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(cfg_.reward_dim));
  const double weight = 1.0 / static_cast<double>(means_.size());
  for (const Eigen::MatrixXd& mu : means_) {
    const Eigen::VectorXd scores = mu.transpose() * g;
    const auto arm = static_cast<Eigen::Index>(argmax_lowest(scores));
    out.point += weight * mu.col(arm);
    out.value += weight * scores[arm];
  }
  return out;
}

SyntheticStep synthetic_mo_step(const SyntheticMOEnv& env, const Rng& run, std::size_t tau) {
  SyntheticStep step;
  step.context_index = env.draw_context(run, tau);
  step.context = &env.context(step.context_index);
  step.means = &env.mean_rewards(step.context_index);
  return step;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  return s;
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    cells.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

template <typename T>
bool parse_number(std::string_view cell, T& out) {
  const char* end = cell.data() + cell.size();
  const auto result = std::from_chars(cell.data(), end, out);
  return result.ec == std::errc() && result.ptr == end;
}

Eigen::MatrixXd assemble(const std::map<std::size_t, Eigen::VectorXd>& rows, std::size_t dim,
                         std::string_view kind) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dim));
  std::size_t expected = 0;
  for (const auto& [id, row] : rows) {
    if (id != expected) {
      throw FormatError(std::string(kind) + " ids are not dense: missing " + std::string(kind) +
                            " id " + std::to_string(expected),
                        0);
    }
    out.row(static_cast<Eigen::Index>(id)) = row.transpose();
    ++expected;
  }
  return out;
}

}  // namespace

LowRankFactors load_factors(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open factor file " + path.string(), 0);
  std::string line;
  std::size_t line_no = 0;
  std::size_t dim = 0;
  std::map<std::size_t, Eigen::VectorXd> users;
  std::map<std::size_t, Eigen::VectorXd> items;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = trim(line);
    if (view.empty()) continue;
    const std::vector<std::string_view> cells = split_csv(view);
    if (!header_seen) {
      header_seen = true;
      if (cells.size() < 3 || cells[0] != "kind" || cells[1] != "id") {
        throw FormatError("header must be kind,id,f0,...", line_no);
      }
      for (std::size_t k = 2; k < cells.size(); ++k) {
        if (cells[k] != "f" + std::to_string(k - 2)) {
          throw FormatError("factor columns must be named f0, f1, ...", line_no);
        }
      }
      dim = cells.size() - 2;
      continue;
    }
    if (cells.size() != dim + 2) {
      throw FormatError("expected " + std::to_string(dim + 2) + " fields, found " +
                            std::to_string(cells.size()),
                        line_no);
    }
    std::map<std::size_t, Eigen::VectorXd>* target = nullptr;
    if (cells[0] == "user") {
      target = &users;
    } else if (cells[0] == "item") {
      target = &items;
    } else {
      throw FormatError("kind must be user or item", line_no);
    }
    std::size_t id = 0;
    if (!parse_number(cells[1], id)) throw FormatError("invalid id", line_no);
    if (target->count(id) != 0) {
      throw FormatError("duplicate " + std::string(cells[0]) + " id " + std::to_string(id), line_no);
    }
    Eigen::VectorXd row(static_cast<Eigen::Index>(dim));
    for (std::size_t k = 0; k < dim; ++k) {
      double value = 0.0;
      if (!parse_number(cells[k + 2], value) || !std::isfinite(value)) {
        throw FormatError("invalid factor value '" + std::string(cells[k + 2]) + "'", line_no);
      }
      row[static_cast<Eigen::Index>(k)] = value;
    }
    target->emplace(id, std::move(row));
  }
  if (!header_seen) throw FormatError("factor file is empty", 0);
  if (users.empty() || items.empty()) throw FormatError("factor file needs users and items", 0);
  return LowRankFactors{assemble(users, dim, "user"), assemble(items, dim, "item")};
}

void write_factors(const std::filesystem::path& path, const LowRankFactors& factors) {
  if (factors.users.cols() != factors.items.cols()) {
    throw ArgumentError("user and item factors must share the latent dimension");
  }
  std::ofstream out(path);
  if (!out) throw ArgumentError("cannot write factor file " + path.string());
  out << "kind,id";
  for (Eigen::Index k = 0; k < factors.users.cols(); ++k) out << ",f" << k;
  out << '\n';
  char buffer[64];
  auto emit = [&](std::string_view kind, const Eigen::MatrixXd& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      out << kind << ',' << r;
      for (Eigen::Index k = 0; k < m.cols(); ++k) {
        const auto res = std::to_chars(buffer, buffer + sizeof(buffer), m(r, k));
        out << ',' << std::string_view(buffer, static_cast<std::size_t>(res.ptr - buffer));
      }
      out << '\n';
    }
  };
  emit("user", factors.users);
  emit("item", factors.items);
}

LowRankFactors generate_lowrank_factors(std::size_t users, std::size_t items,
                                        std::size_t latent_dim, std::uint64_t seed) {
  if (users == 0 || items == 0 || latent_dim == 0) {
    throw ArgumentError("factor dimensions must be positive");
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(latent_dim));
  const Rng root(seed);
  auto fill = [&](std::size_t rows, std::string_view tag) {
    Rng rng = root.split(tag);
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(latent_dim));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index k = 0; k < m.cols(); ++k) m(r, k) = scale * rng.uniform();
    }
    return m;
  };
  return LowRankFactors{fill(users, "user_factors"), fill(items, "item_factors")};
}

std::string_view to_string(PositionPreset preset) {
  return preset == PositionPreset::dcg ? "dcg" : "logistic";
}

PositionPreset position_preset_from_string(std::string_view name) {
  if (name == "dcg") return PositionPreset::dcg;
  if (name == "logistic") return PositionPreset::logistic;
  throw ArgumentError("unknown position-weight preset '" + std::string(name) + "'");
}

Eigen::VectorXd position_weights(PositionPreset preset, std::size_t k_bar, std::size_t m) {
  if (k_bar == 0 || k_bar > m) throw ArgumentError("k_bar must lie in [1, m]");
  Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m));
  for (std::size_t k = 1; k <= k_bar; ++k) {
    const double rank = static_cast<double>(k);
    b[static_cast<Eigen::Index>(k - 1)] = preset == PositionPreset::dcg
                                              ? 1.0 / std::log2(1.0 + rank)
                                              : std::log(2.0) / (1.0 + std::log(rank));
  }
  return b;
}

LowRankEnv::LowRankEnv(LowRankFactors factors, std::size_t k_bar, Eigen::VectorXd weights)
    : factors_(std::move(factors)), k_bar_(k_bar), b_(std::move(weights)) {
  const auto n = factors_.users.rows();
  const auto m = factors_.items.rows();
  const auto dl = factors_.items.cols();
  if (n == 0 || m == 0 || dl == 0 || factors_.users.cols() != dl) {
    throw ArgumentError("factors must be non-empty and share the latent dimension");
  }
  if (b_.size() != m) throw ArgumentError("position weights must have one entry per item");
  PBMParams check{b_, Eigen::VectorXd::Zero(m)};
  check.validate(k_bar_);
  if (k_bar_ == 0) throw ArgumentError("k_bar must be >= 1");

  features_.reserve(static_cast<std::size_t>(n));
  clicks_.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < n; ++j) {
    const Eigen::RowVectorXd u = factors_.users.row(j);
    Eigen::MatrixXd x(m, dl * dl);
    for (Eigen::Index i = 0; i < m; ++i) {
      for (Eigen::Index a = 0; a < dl; ++a) {
        x.block(i, a * dl, 1, dl) = u[a] * factors_.items.row(i);
      }
    }
    features_.push_back(std::move(x));
    clicks_.push_back((factors_.items * u.transpose()).cwiseMax(0.0).cwiseMin(1.0));
  }
}

Eigen::VectorXd LowRankEnv::true_parameter() const {
  const auto dl = static_cast<Eigen::Index>(latent_dim());
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(dl * dl);
  for (Eigen::Index a = 0; a < dl; ++a) theta[a * dl + a] = 1.0;
  return theta;
}

std::size_t LowRankEnv::draw_user(const Rng& run, std::size_t tau) const {
  Rng rng = run.split("user", tau);
  return static_cast<std::size_t>(rng.below(user_count()));
}

Eigen::VectorXd LowRankEnv::expected_reward(std::size_t user,
                                            const PermutationAction& action) const {
  const auto m = static_cast<Eigen::Index>(item_count());
  Eigen::VectorXd r = Eigen::VectorXd::Zero(m + 1);
  const Eigen::VectorXd& v = clicks_[user];
  for (std::size_t k = 0; k < action.ranking.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(action.ranking[k]);
    const double bk = b_[static_cast<Eigen::Index>(k)];
    r[i] = bk;
    r[m] += bk * v[i];
  }
  return r;
}

LinearResponse LowRankEnv::user_best_response(std::size_t user, const Eigen::VectorXd& g) const {
  const auto m = static_cast<Eigen::Index>(item_count());
  if (g.size() != m + 1) throw ArgumentError("direction has the wrong dimension");
  const Eigen::VectorXd& v = clicks_[user];
  const Eigen::VectorXd scores = g.head(m) + g[m] * v;
  std::vector<std::size_t> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[static_cast<Eigen::Index>(a)] > scores[static_cast<Eigen::Index>(b)];
  });
  LinearResponse out;
  out.point = Eigen::VectorXd::Zero(m + 1);
  for (Eigen::Index k = 0; k < m; ++k) {
    const double bk = b_[k];
    if (bk == 0.0) break;
    const auto i = static_cast<Eigen::Index>(order[static_cast<std::size_t>(k)]);
    out.point[i] = bk;
    out.point[m] += bk * v[i];
    out.value += bk * scores[i];
  }
  return out;
}

LinearResponse LowRankEnv::best_response(const Eigen::VectorXd& g) const {
  LinearResponse out;
  out.point = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(reward_dim()));
  const double weight = 1.0 / static_cast<double>(user_count());
  for (std::size_t j = 0; j < user_count(); ++j) {
    const LinearResponse r = user_best_response(j, g);
    out.point += weight * r.point;
    out.value += weight * r.value;
  }
  return out;
}

LowRankStep lowrank_step(const LowRankEnv& env, const Rng& run, std::size_t tau) {
  LowRankStep step;
  step.user = env.draw_user(run, tau);
  step.features = &env.item_features(step.user);
  step.pbm = env.pbm(step.user);
  return step;
}

}  // namespace cbcr
