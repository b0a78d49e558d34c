#pragma once

#include <cstdint>
#include <random>

namespace purify {

using Rng = std::mt19937_64;

// Each Monte Carlo quantity draws from its own stream, keyed by
// (seed, repetition, purpose, sub-index). Streams never share state, so
// repetitions can run in any order or in parallel.
enum class Stream : std::uint64_t {
  Mixing = 1,
  Network = 2,
  Data = 3,
  Similar = 4,
  Dissimilar = 5,
  Train = 6,
  Test = 7,
  Trial = 8,
  Check = 9,
  Noise = 10,
  Response = 11,
};

Rng make_stream(std::uint64_t seed, std::uint64_t rep, Stream purpose, std::uint64_t sub = 0);

// SplitMix64 finalizer; exposed for tests.
std::uint64_t mix64(std::uint64_t x);

}  // namespace purify
