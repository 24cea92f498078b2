#pragma once

// Philox4x32-10 counter-based generator (Salmon et al., "Parallel random
// numbers: as easy as 1, 2, 3"). A draw is a pure function of
// (seed, stream, substream, counter), so any consumer can reproduce the
// sequence of another without sharing state.
//
// Counter words: [index_lo, index_hi, substream, stream]; key: seed split
// into low/high 32-bit halves. Each block yields four 32-bit words, consumed
// in order; 64-bit draws take two consecutive words (low word first).

#include <array>
#include <cstdint>
#include <vector>

namespace matx {

namespace streams {
inline constexpr std::uint32_t directions = 0;
inline constexpr std::uint32_t subsampling = 1;
inline constexpr std::uint32_t init = 2;
inline constexpr std::uint32_t shift = 3;
}  // namespace streams

std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter,
                                           std::array<std::uint32_t, 2> key);

class Philox {
 public:
  Philox(std::uint64_t seed, std::uint32_t stream, std::uint32_t substream = 0);

  std::uint32_t next_u32();
  std::uint64_t next_u64();
  // 53-bit uniform in [0, 1).
  double uniform();
  // Box-Muller on two uniforms; one normal per call.
  double normal();
  // Uniform integer in [0, n), unbiased (rejection on the 64-bit draw).
  std::uint64_t below(std::uint64_t n);

  // First k entries of a Fisher-Yates shuffle of 0..n-1.
  std::vector<std::int64_t> sample_without_replacement(std::int64_t n, std::int64_t k);

 private:
  void refill();

  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 4> counter_;
  std::array<std::uint32_t, 4> block_{};
  int used_ = 4;
};

}  // namespace matx
