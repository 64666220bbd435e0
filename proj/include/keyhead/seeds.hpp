#pragma once

#include <cstdint>
#include <string_view>

namespace keyhead {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Deterministic per-component seed derivation from the single run seed.
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view component) {
  std::uint64_t h = 0xCBF29CE484222325ull;  // FNV-1a over the component name
  for (char c : component) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ull;
  }
  return splitmix64(base ^ h);
}

}  // namespace keyhead
