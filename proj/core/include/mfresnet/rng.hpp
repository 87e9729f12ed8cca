#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace mfresnet {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Counter-based substream seed: the same (master, keys...) always yields the same
/// seed, and different key tuples yield unrelated streams.
inline std::uint64_t substream_seed(std::uint64_t master, std::initializer_list<std::uint64_t> keys) {
  std::uint64_t s = splitmix64(master);
  for (auto k : keys) s = splitmix64(s ^ splitmix64(k + 0x632be59bd9b4e019ULL));
  return s;
}

/// Fixed purposes for substreams, so adding a consumer never shifts another's draws.
enum class StreamPurpose : std::uint64_t {
  kTrainData = 1,
  kTestData = 2,
  kInit = 3,
  kRademacher = 4,
  kFixture = 5,
};

inline Rng make_rng(std::uint64_t master, std::initializer_list<std::uint64_t> keys) {
  return Rng(substream_seed(master, keys));
}

}  // namespace mfresnet
