#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace topolidar {

using Rng = std::mt19937_64;

/// 64-bit FNV-1a over a byte string.
constexpr std::uint64_t fnv1a(std::string_view bytes,
                              std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// SplitMix64 finalizer; bijective mixing of a 64-bit word.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent generator for a named substream ("data", "vae-init",
/// "ldm-init", "sampling", ...) of a root seed. `index` selects a further
/// sub-substream, e.g. a training step or a scene number.
inline Rng make_stream(std::uint64_t seed, std::string_view name,
                       std::uint64_t index = 0) {
  const std::uint64_t a = splitmix64(seed);
  const std::uint64_t b = splitmix64(fnv1a(name) ^ a);
  const std::uint64_t c = splitmix64(index + 0x632be59bd9b4e019ULL) ^ b;
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32),
                    static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(c >> 32)};
  return Rng(seq);
}

}  // namespace topolidar
