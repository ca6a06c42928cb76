#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace qkdioc {

using Engine = std::mt19937_64;

/// 64-bit FNV-1a. Stable across platforms, used for stream keys and content hashes.
std::uint64_t fnv1a64(std::string_view data) noexcept;

/// One master seed fanned out into independently keyed substreams, so adding a
/// consumer never perturbs the draws of another.
class RngStreams {
 public:
  explicit RngStreams(std::uint64_t master_seed) : seed_(master_seed) {}

  Engine stream(std::string_view key) const;
  std::uint64_t seed() const noexcept { return seed_; }

 private:
  std::uint64_t seed_;
};

}  // namespace qkdioc
