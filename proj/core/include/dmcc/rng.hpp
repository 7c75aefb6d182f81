#pragma once

#include <cstdint>
#include <random>

namespace dmcc {

// Deterministic derived generator: the same (seed, stream) pair yields the
// same sequence on every platform and thread schedule. Stream ids partition
// the randomness of a run (init, shuffles, per-entry augmentation, per-scene
// synthesis) so components can be parallelized without sharing state.
inline std::mt19937_64 make_rng_stream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace dmcc
