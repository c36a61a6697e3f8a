#pragma once

#include <cstdint>
#include <limits>
#include <string_view>

namespace cbcr {

/// Portable counter-based generator.
///
/// Output i of a stream with key k is SplitMix64's finalizer applied to
/// k + (i + 1) * 0x9E3779B97F4A7C15. All derived quantities (uniforms,
/// normals, bounded integers) are computed with explicit integer and IEEE
/// arithmetic, so a (seed, stream) pair yields the same sequence on every
/// platform with a conforming libm.
///
/// Streams are split by hashing a tag (and optionally an index) into a fresh
/// key; splitting never depends on how many values the parent produced.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0) noexcept;

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }
  result_type operator()() noexcept { return next_u64(); }

  std::uint64_t next_u64() noexcept;
  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept;
  /// Uniform on (0, 1).
  double uniform_open() noexcept;
  /// Standard normal (Marsaglia polar method).
  double normal() noexcept;
  double normal(double mean, double stddev) noexcept { return mean + stddev * normal(); }
  /// Uniform integer in [0, n); n must be positive. Unbiased (rejection).
  std::uint64_t below(std::uint64_t n) noexcept;
  bool bernoulli(double p) noexcept { return uniform() < p; }

  /// Child stream identified by a tag.
  Rng split(std::uint64_t tag) const noexcept;
  /// Child stream identified by (tag, index), e.g. (purpose, step).
  Rng split(std::uint64_t tag, std::uint64_t index) const noexcept;
  Rng split(std::string_view tag) const noexcept { return split(hash_tag(tag)); }
  Rng split(std::string_view tag, std::uint64_t index) const noexcept {
    return split(hash_tag(tag), index);
  }

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t counter() const noexcept { return counter_; }

  static std::uint64_t mix(std::uint64_t z) noexcept;
  /// 64-bit FNV-1a of a tag string.
  static std::uint64_t hash_tag(std::string_view tag) noexcept;

 private:
  struct KeyTag {};
  Rng(std::uint64_t key, KeyTag) noexcept : key_(key) {}

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace cbcr
