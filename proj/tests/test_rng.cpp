#include <doctest.h>

#include <cmath>
#include <set>
#include <stdexcept>

#include "sapp/rng.hpp"

using namespace sapp;

TEST_SUITE("rng") {
  TEST_CASE("same (seed, stream) gives the same sequence") {
    SeededRng a(42, 7), b(42, 7);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  }

  TEST_CASE("different streams and seeds diverge") {
    SeededRng a(42, 7), b(42, 8), c(43, 7);
    const auto x = a.next_u64();
    CHECK(x != b.next_u64());
    CHECK(x != c.next_u64());
  }

  TEST_CASE("uniform_int covers the closed range uniformly") {
    SeededRng rng(1);
    std::vector<int> counts(7, 0);
    const int n = 70000;
    for (int i = 0; i < n; ++i) {
      const auto v = uniform_int(rng, -3, 3);
      REQUIRE(v >= -3);
      REQUIRE(v <= 3);
      ++counts[static_cast<std::size_t>(v + 3)];
    }
    // Chi-square, 6 degrees of freedom, 0.99 quantile 16.812.
    double chi2 = 0.0;
    for (int c : counts) chi2 += std::pow(c - n / 7.0, 2) / (n / 7.0);
    CHECK(chi2 < 16.812);
    CHECK(uniform_int(rng, 5, 5) == 5);
    CHECK_THROWS_AS(uniform_int(rng, 2, 1), std::invalid_argument);
  }

  TEST_CASE("uniform01 and normal moments") {
    SeededRng rng(9);
    double s = 0, sn = 0, sn2 = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
      const double u = rng.uniform01();
      REQUIRE(u >= 0.0);
      REQUIRE(u < 1.0);
      s += u;
      const double z = rng.normal();
      sn += z;
      sn2 += z * z;
    }
    CHECK(s / n == doctest::Approx(0.5).epsilon(0.01));
    CHECK(std::abs(sn / n) < 0.01);
    CHECK(sn2 / n == doctest::Approx(1.0).epsilon(0.01));
  }

  TEST_CASE("stream ids separate epoch, batch and purpose") {
    std::set<std::uint64_t> ids;
    for (std::uint64_t e = 0; e < 4; ++e)
      for (std::uint64_t b = 0; b < 4; ++b)
        for (auto p : {StreamPurpose::kLayer, StreamPurpose::kMask, StreamPurpose::kShuffle})
          ids.insert(stream_id(e, b, p));
    CHECK(ids.size() == 48);
  }

  TEST_CASE("copies fork the stream") {
    SeededRng a(5);
    a.next_u64();
    SeededRng b = a;
    CHECK(a.next_u64() == b.next_u64());
  }
}
