#pragma once

// Keyed pseudo-random function behind every synthetic model decision.
//
// mix64 is the splitmix64 output step. A prefix key is a left fold of
// mix64 over the token ids starting from kPrefixKeyInit, so extending a
// prefix by one token costs one mix. prf(seed, tag, key) separates domains
// by tag so the target argmax, the agreement coins and the sampling draws
// are mutually independent. Changing any constant here invalidates the
// frozen expectations in tests/ (regenerate with tests/oracles/prf_oracle.py).

#include <cstdint>

namespace fsd::prf {

inline constexpr std::uint64_t kPrefixKeyInit = 0x6A09E667F3BCC909ULL;

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t eval(std::uint64_t seed, std::uint64_t tag,
                             std::uint64_t key) noexcept {
  return mix64(mix64(mix64(seed) ^ tag) ^ key);
}

/// Top 53 bits as a double in [0, 1).
constexpr double unit(std::uint64_t x) noexcept {
  return static_cast<double>(x >> 11) * 0x1.0p-53;
}

namespace tag {
inline constexpr std::uint64_t kTarget = 0x01;
inline constexpr std::uint64_t kDraftCoin = 0x02;
inline constexpr std::uint64_t kDraftAlt = 0x03;
inline constexpr std::uint64_t kDraftSample = 0x04;
inline constexpr std::uint64_t kAccept = 0x05;
inline constexpr std::uint64_t kResidual = 0x06;
inline constexpr std::uint64_t kBonus = 0x07;
inline constexpr std::uint64_t kQueueRandom = 0x08;
constexpr std::uint64_t exit_coin(int i) { return 0x100U | static_cast<std::uint64_t>(i); }
constexpr std::uint64_t exit_alt(int i) { return 0x200U | static_cast<std::uint64_t>(i); }
constexpr std::uint64_t exit_conf(int i) { return 0x300U | static_cast<std::uint64_t>(i); }
}  // namespace tag

}  // namespace fsd::prf
