#pragma once

#include <cstdint>
#include <string_view>

namespace hasim {

constexpr uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

constexpr uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d4d9a2b1c6a1adull;
  return x ^ (x >> 31);
}

// Stable per-stream seed derivation from a master seed and mixed-in parts.
constexpr uint64_t derive_seed(uint64_t master, uint64_t part_a,
                               uint64_t part_b = 0) {
  return splitmix64(splitmix64(master ^ splitmix64(part_a)) ^ part_b);
}

}  // namespace hasim
