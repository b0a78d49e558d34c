#include "purify/random.hpp"

#include <array>

namespace purify {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng make_stream(std::uint64_t seed, std::uint64_t rep, Stream purpose, std::uint64_t sub) {
  std::uint64_t h = mix64(seed);
  h = mix64(h ^ rep);
  h = mix64(h ^ static_cast<std::uint64_t>(purpose));
  h = mix64(h ^ sub);
  std::array<std::uint32_t, 4> words{
      static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32),
      static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(rep)};
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

}  // namespace purify
