#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace uncseg {

using Rng = std::mt19937_64;

/// Mixes a master seed with a tag and an index into an independent stream seed.
/// Used to split one experiment seed into named streams (scene-gen, segmenter, ...).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag, std::uint64_t index = 0);

inline Rng make_rng(std::uint64_t seed, std::string_view tag, std::uint64_t index = 0) {
  return Rng(derive_seed(seed, tag, index));
}

/// Draws a child seed from a parent stream. All stochastic components consume
/// exactly one draw per call through this, so in-process and remote
/// implementations stay in lock-step.
inline std::uint64_t draw_seed(Rng& rng) { return rng(); }

inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

}  // namespace uncseg
