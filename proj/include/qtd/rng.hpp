#pragma once

#include <cstdint>
#include <random>

namespace qtd {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used both for seeding and as a keyed hash.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t hash_combine(std::uint64_t h, std::uint64_t v) noexcept {
  return splitmix64(splitmix64(h) ^ v);
}

/// Independent stream for one replica, keyed by (seed, index) so the output
/// of a run never depends on how replicas are scheduled.
inline Rng replica_rng(std::uint64_t seed, std::uint64_t replica) {
  return Rng(hash_combine(seed, replica));
}

/// Uniform double in [0, 1) from the top 53 bits of a 64-bit word.
constexpr double unit_interval(std::uint64_t bits) noexcept {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

}  // namespace qtd
