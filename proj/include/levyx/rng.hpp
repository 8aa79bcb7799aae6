#pragma once

#include <cstdint>
#include <random>

namespace levyx {

using RngStream = std::mt19937_64;

// splitmix64 finalizer; good enough to decorrelate counter-derived seeds.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e9b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Independent stream keyed by (master seed, purpose tag, entity id).
// Every path owns its own stream, so ensemble statistics do not depend
// on how paths are distributed over worker threads.
inline RngStream make_stream(std::uint64_t seed, std::uint64_t tag,
                             std::uint64_t id = 0) {
  std::uint64_t s = mix64(seed);
  s = mix64(s ^ (0x517cc1b727220a95ULL * (tag + 1)));
  s = mix64(s ^ (0x2545f4914f6cdd1dULL * (id + 1)));
  return RngStream(s);
}

}  // namespace levyx
