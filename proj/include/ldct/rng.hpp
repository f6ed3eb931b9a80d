#pragma once

#include <cstdint>
#include <random>

namespace ldct {

/// splitmix64 step; used to derive independent seed streams from one seed.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Deterministic sub-seed for (seed, stream, index). Streams are small
/// fixed tags so that e.g. per-epoch and per-slice draws never collide.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0) {
  std::uint64_t h = splitmix64(seed ^ 0x243f6a8885a308d3ULL);
  h = splitmix64(h ^ stream);
  h = splitmix64(h ^ index);
  return h;
}

inline std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0) {
  return std::mt19937_64(derive_seed(seed, stream, index));
}

namespace stream {
constexpr std::uint64_t kInit = 1;
constexpr std::uint64_t kEpoch = 2;
constexpr std::uint64_t kSubset = 3;
constexpr std::uint64_t kPhantom = 4;
constexpr std::uint64_t kRoutineDose = 5;
constexpr std::uint64_t kQuarterDose = 6;
}  // namespace stream

}  // namespace ldct
