#pragma once

#include <cstdint>
#include <random>

namespace cogsched {

using Engine = std::mt19937_64;

// Independent streams per (purpose, index) so that two policies simulated
// with the same seed see identical arrivals and channel draws.
enum class StreamPurpose : std::uint32_t {
  arrivals = 1,
  direct_gain = 2,
  interference_gain = 3,
  csi_direct = 4,
  csi_interference = 5,
  scheduler = 6,
  estimation = 7,
  validation = 8,
};

inline Engine make_stream(std::uint64_t seed, StreamPurpose purpose, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(purpose), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return Engine(seq);
}

// Uniform on [0, 1) with 53 random bits; identical across standard libraries.
inline double uniform01(Engine& engine) {
  return static_cast<double>(engine() >> 11) * 0x1.0p-53;
}

}  // namespace cogsched
