#pragma once

#include <cstdint>
#include <span>
#include <string_view>

namespace snrprobe {

inline constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

// 64-bit FNV-1a. Chainable through `state`.
constexpr std::uint64_t fnv1a64(std::span<const unsigned char> bytes,
                                std::uint64_t state = kFnvOffset) noexcept {
  for (unsigned char b : bytes) {
    state ^= b;
    state *= kFnvPrime;
  }
  return state;
}

inline std::uint64_t fnv1a64(std::string_view text, std::uint64_t state = kFnvOffset) noexcept {
  return fnv1a64(std::span(reinterpret_cast<const unsigned char*>(text.data()), text.size()), state);
}

/// FNV-1a over the UTF-8 key followed by the seed's 8 little-endian bytes.
inline std::uint64_t seeded_key_hash(std::uint64_t seed, std::string_view key) noexcept {
  std::uint64_t h = fnv1a64(key);
  unsigned char le[8];
  for (int i = 0; i < 8; ++i) le[i] = static_cast<unsigned char>((seed >> (8 * i)) & 0xffU);
  return fnv1a64(std::span<const unsigned char>(le, 8), h);
}

}  // namespace snrprobe
