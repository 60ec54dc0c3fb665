#pragma once

#include <cstdint>
#include <random>

namespace stblsim {

using Rng = std::mt19937_64;

/// Open-interval uniform on (0, 1) from the top 53 bits.
inline double uniform01(Rng& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

/// Independent stream for one path of an ensemble.
inline Rng path_stream(std::uint64_t master_seed, std::uint64_t path) {
  std::seed_seq seq{static_cast<std::uint32_t>(master_seed),
                    static_cast<std::uint32_t>(master_seed >> 32),
                    static_cast<std::uint32_t>(path),
                    static_cast<std::uint32_t>(path >> 32)};
  return Rng(seq);
}

}  // namespace stblsim
