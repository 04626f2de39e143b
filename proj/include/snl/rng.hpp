#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace snl {

using Rng = std::mt19937_64;

/// Independent generator for a named purpose ("backbone", "folds", ...)
/// derived from one user seed.
inline Rng substream(std::uint64_t seed, std::string_view name) {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (unsigned char ch : name) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
  return Rng(seq);
}

}  // namespace snl
