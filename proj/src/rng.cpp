#include "sapp/rng.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <fmt/format.h>

namespace sapp {

namespace {

std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace

SeededRng::SeededRng(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream), engine_(make_engine(seed, stream)) {}

double SeededRng::uniform01() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double SeededRng::normal() {
  // 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - uniform01();
  const double u2 = uniform01();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::int64_t uniform_int(SeededRng& rng, std::int64_t lo, std::int64_t hi) {
  if (lo > hi) {
    throw std::invalid_argument(fmt::format("uniform_int: empty range [{}, {}]", lo, hi));
  }
  const std::uint64_t span = static_cast<std::uint64_t>(hi) - static_cast<std::uint64_t>(lo);
  if (span == std::numeric_limits<std::uint64_t>::max()) {
    return static_cast<std::int64_t>(rng.next_u64());
  }
  const std::uint64_t range = span + 1;
  // Reject the top partial bucket so every residue is equally likely.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % range;
  std::uint64_t v = rng.next_u64();
  while (v >= limit) v = rng.next_u64();
  return lo + static_cast<std::int64_t>(v % range);
}

std::uint64_t stream_id(std::uint64_t epoch, std::uint64_t batch, StreamPurpose purpose) {
  return (static_cast<std::uint64_t>(purpose) << 56) | ((epoch & 0xFFFFFFull) << 32) |
         (batch & 0xFFFFFFFFull);
}

}  // namespace sapp
