// Copyright 2026 The RISExt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>

namespace risext {

/// SplitMix64 finaliser.
constexpr std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Seed of the independent stream for item `index` under `base_seed`:
/// splitmix64(splitmix64(base_seed) ^ index). Streams do not depend on the
/// order in which items are generated.
constexpr std::uint64_t mix64(std::uint64_t base_seed, std::uint64_t index) {
  return splitmix64(splitmix64(base_seed) ^ index);
}

inline std::mt19937_64 make_stream(std::uint64_t base_seed, std::uint64_t index) {
  return std::mt19937_64(mix64(base_seed, index));
}

// Reserved stream indices for non-sample draws.
inline constexpr std::uint64_t kSplitStream = 0xFFFF'FFFF'FFFF'FF01ULL;
inline constexpr std::uint64_t kInitStream = 0xFFFF'FFFF'FFFF'FF02ULL;
inline constexpr std::uint64_t kShuffleStream = 0xFFFF'FFFF'FFFF'FF03ULL;

}  // namespace risext
