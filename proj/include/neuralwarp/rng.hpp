#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace neuralwarp {

using Rng = std::mt19937_64;

/// Seeds an independent stream for a named purpose ("init", "sampling",
/// "dropout", ...) so that consuming one stream never shifts another.
inline Rng derive_stream(std::uint64_t seed, std::string_view name) {
  // FNV-1a over the name, mixed into the seed with splitmix64.
  std::uint64_t h = 1469598103934665603ULL;
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  std::uint64_t z = seed ^ h;
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return Rng(z);
}

}  // namespace neuralwarp
