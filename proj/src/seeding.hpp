#pragma once

#include <cstdint>
#include <string_view>

namespace headpose::detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// FNV-1a; stable across platforms, unlike std::hash.
inline std::uint64_t hash_text(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(splitmix64(seed) ^ stream);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view a, std::string_view b = {}) {
  return derive_seed(derive_seed(seed, hash_text(a)), hash_text(b));
}

// Uniform in [0, 1).
inline double unit_draw(std::uint64_t seed, std::string_view a, std::string_view b = {}) {
  return static_cast<double>(derive_seed(seed, a, b) >> 11) * 0x1.0p-53;
}

}  // namespace headpose::detail
