#pragma once

#include <cstdint>
#include <random>

namespace sapp {

/// What a random stream is used for. Part of the stream id so that, e.g.,
/// shuffling and mask sampling for the same batch never share draws.
enum class StreamPurpose : std::uint8_t {
  kInit = 1,
  kShuffle = 2,
  kLayer = 3,
  kMask = 4,
  kSynth = 5,
  kGradCheck = 6,
  kCli = 7,
};

/// Deterministic generator keyed by (seed, stream). Draw sequences are fully
/// determined by the pair on every platform: the engine and seed_seq are
/// specified by the standard and all distributions are implemented here.
/// Single-owner; copy to fork.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform over [0, 1) with 53 bits of resolution.
  double uniform01();

  /// Standard normal via Box-Muller.
  double normal();

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
};

/// Uniform integer on the closed range [lo, hi]. Throws std::invalid_argument
/// if lo > hi.
std::int64_t uniform_int(SeededRng& rng, std::int64_t lo, std::int64_t hi);

/// Stream id for one (epoch, batch, purpose) triple.
std::uint64_t stream_id(std::uint64_t epoch, std::uint64_t batch, StreamPurpose purpose);

}  // namespace sapp
