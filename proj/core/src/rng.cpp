#include "cbcr/rng.hpp"

#include <cmath>

namespace cbcr {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
constexpr std::uint64_t kSeedSalt = 0xC2B2AE3D27D4EB4FULL;
constexpr std::uint64_t kSplitSalt = 0x165667B19E3779F9ULL;
}  // namespace

std::uint64_t Rng::mix(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t Rng::hash_tag(std::string_view tag) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : tag) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

Rng::Rng(std::uint64_t seed) noexcept : key_(mix(seed ^ kSeedSalt)) {}

std::uint64_t Rng::next_u64() noexcept {
  ++counter_;
  return mix(key_ + counter_ * kGolden);
}

double Rng::uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::uniform_open() noexcept {
  return (static_cast<double>(next_u64() >> 12) + 0.5) * 0x1.0p-52;
}

double Rng::normal() noexcept {
  if (has_spare_) {
    has_spare_ = false;
    return spare_normal_;
  }
  double u = 0.0;
  double v = 0.0;
  double s = 0.0;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double factor = std::sqrt(-2.0 * std::log(s) / s);
  spare_normal_ = v * factor;
  has_spare_ = true;
  return u * factor;
}

namespace {
__extension__ typedef unsigned __int128 uint128;
}  // namespace

std::uint64_t Rng::below(std::uint64_t n) noexcept {
  // Lemire's multiply-shift with rejection of the biased low region.
  const std::uint64_t threshold = (0 - n) % n;
  while (true) {
    const uint128 product = static_cast<uint128>(next_u64()) * n;
    if (static_cast<std::uint64_t>(product) >= threshold) {
      return static_cast<std::uint64_t>(product >> 64);
    }
  }
}

Rng Rng::split(std::uint64_t tag) const noexcept {
  return Rng(mix(key_ ^ mix(tag + kSplitSalt)), KeyTag{});
}

Rng Rng::split(std::uint64_t tag, std::uint64_t index) const noexcept {
  return Rng(mix(split(tag).key_ + mix(index ^ kGolden)), KeyTag{});
}

}  // namespace cbcr
