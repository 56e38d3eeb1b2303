#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace lfil {

using Rng = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Counter-based derivation: stream i of a base seed is reproducible without
// consuming streams 0..i-1.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream,
                                    std::uint64_t index = 0) {
  return splitmix64(splitmix64(base ^ splitmix64(stream + 0x632be59bd9b4e019ULL)) + index);
}

// 64-bit FNV-1a, rendered as 16 hex digits. Used for content fingerprints.
std::string fingerprint_hex(const std::string& content);

}  // namespace lfil
