#include <doctest.h>

#include "oracles.hpp"
#include "sapp/kernels/masking.hpp"
#include "sapp/masking.hpp"
#include "sapp/reference/masking.hpp"
#include "test_util.hpp"

using namespace sapp;

namespace {

MaskSpec random_spec(std::size_t T, std::size_t F, SeededRng& rng) {
  MaskSpec m;
  m.t = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(T)));
  m.t0 = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(T - m.t)));
  m.f = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(F)));
  m.f0 = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(F - m.f)));
  return m;
}

}  // namespace

TEST_SUITE("masking") {
  TEST_CASE_TEMPLATE("kernels agree with the cell oracle and the loop reference", Scalar, float, double) {
    SeededRng rng(11);
    for (int n = 0; n < 200; ++n) {
      const Shape s{static_cast<std::size_t>(uniform_int(rng, 1, 3)), static_cast<std::size_t>(uniform_int(rng, 1, 20)),
                    static_cast<std::size_t>(uniform_int(rng, 1, 20))};
      const auto x = test::random_tensor<Scalar>(s, rng);
      const auto y = test::random_tensor<Scalar>(s, rng);
      const MaskSpec m = random_spec(s.frames, s.bins, rng);
      CHECK(bit_equal(apply_zero_mask(x, m), oracle::mask(Scheme::kZero, x, y, m)));
      CHECK(bit_equal(apply_mixture_mask(x, y, m), oracle::mask(Scheme::kMixture, x, y, m)));
      CHECK(bit_equal(apply_cut_mask(x, y, m), oracle::mask(Scheme::kCut, x, y, m)));
      CHECK(bit_equal(apply_zero_mask(x, m), reference::zero_mask(x, m)));
      CHECK(bit_equal(apply_mixture_mask(x, y, m), reference::mixture_mask(x, y, m)));
      CHECK(bit_equal(apply_cut_mask(x, y, m), reference::cut_mask(x, y, m)));
    }
  }

  TEST_CASE("mixture intersection cells are mixed once from the originals") {
    FeatureTensor x(Shape{1, 4, 4}, 2.0f), y(Shape{1, 4, 4}, 6.0f);
    const MaskSpec m{1, 2, 1, 2};
    const auto out = apply_mixture_mask(x, y, m);
    CHECK(out(0, 1, 1) == 4.0f);  // in both bands: (2 + 6) / 2, not mixed twice (5)
    CHECK(out(0, 1, 0) == 4.0f);
    CHECK(out(0, 0, 1) == 4.0f);
    CHECK(out(0, 0, 0) == 2.0f);
    CHECK(out(0, 3, 3) == 2.0f);
  }

  TEST_CASE("bands are half-open") {
    FeatureTensor x(Shape{1, 5, 5}, 1.0f);
    const auto out = apply_zero_mask(x, MaskSpec{1, 2, 5, 0});
    CHECK(out(0, 0, 0) == 1.0f);
    CHECK(out(0, 1, 0) == 0.0f);
    CHECK(out(0, 2, 4) == 0.0f);
    CHECK(out(0, 3, 0) == 1.0f);
  }

  TEST_CASE("identities") {
    SeededRng rng(2);
    const Shape s{2, 9, 7};
    const auto x = test::random_tensor(s, rng);
    const auto y = test::random_tensor(s, rng);
    for (Scheme sc : {Scheme::kZero, Scheme::kMixture, Scheme::kCut}) {
      CHECK(bit_equal(apply_scheme(sc, x, &y, MaskSpec{3, 0, 2, 0}), x));
    }
    const MaskSpec m{2, 3, 1, 4};
    CHECK(bit_equal(apply_mixture_mask(x, x, m), x));
    CHECK(bit_equal(apply_cut_mask(x, x, m), x));
    CHECK(bit_equal(apply_cut_mask(x, y, MaskSpec{0, 9, 0, 7}), y));
    CHECK(bit_equal(apply_cut_mask(x, y, MaskSpec{0, 9, 0, 0}), y));
  }

  TEST_CASE("inputs are never modified and every channel shares the bands") {
    SeededRng rng(3);
    const Shape s{3, 6, 6};
    const auto x = test::random_tensor(s, rng);
    const auto y = test::random_tensor(s, rng);
    const auto x0 = x, y0 = y;
    const auto out = apply_cut_mask(x, y, MaskSpec{1, 1, 2, 1});
    CHECK(bit_equal(x, x0));
    CHECK(bit_equal(y, y0));
    for (std::size_t c = 0; c < 3; ++c) {
      CHECK(out(c, 1, 0) == y(c, 1, 0));
      CHECK(out(c, 0, 2) == y(c, 0, 2));
      CHECK(out(c, 0, 0) == x(c, 0, 0));
    }
  }

  TEST_CASE("errors") {
    FeatureTensor x(Shape{1, 4, 4}), y(Shape{1, 4, 5});
    CHECK_THROWS_AS(apply_mixture_mask(x, y, MaskSpec{}), std::invalid_argument);
    CHECK_THROWS_AS(apply_zero_mask(x, MaskSpec{3, 2, 0, 0}), std::invalid_argument);
    CHECK_THROWS_AS(apply_zero_mask(x, MaskSpec{0, 0, 0, 5}), std::invalid_argument);
    CHECK_THROWS_AS(apply_scheme<float>(Scheme::kCut, x, nullptr, MaskSpec{}), std::invalid_argument);
    SeededRng rng(1);
    CHECK_THROWS_AS(sample_mask(4, 4, MaskParams{5, 1}, rng), std::invalid_argument);
    CHECK_THROWS_AS(sample_mask(4, 4, MaskParams{1, 5}, rng), std::invalid_argument);
  }

  TEST_CASE("buffer-level kernel validates lengths and matches the tensor API") {
    SeededRng rng(8);
    const Shape s{2, 5, 6};
    const auto x = test::random_tensor(s, rng);
    const auto y = test::random_tensor(s, rng);
    const MaskSpec m{1, 2, 3, 2};
    std::vector<float> out(s.size());
    kernels::mask_into<float>(Scheme::kMixture, x.data(), y.data(), out, s, m);
    CHECK(bit_equal(FeatureTensor(s, out), apply_mixture_mask(x, y, m)));
    kernels::mask_into<float>(Scheme::kZero, x.data(), {}, out, s, m);
    CHECK(bit_equal(FeatureTensor(s, out), apply_zero_mask(x, m)));
    std::vector<float> short_out(s.size() - 1);
    CHECK_THROWS_AS(kernels::mask_into<float>(Scheme::kZero, x.data(), {}, short_out, s, m), std::invalid_argument);
    CHECK_THROWS_AS(kernels::mask_into<float>(Scheme::kCut, x.data(), {}, out, s, m), std::invalid_argument);
  }

  TEST_CASE("sampling stays in range and follows t, t0, f, f0 order") {
    SeededRng rng(5);
    for (int i = 0; i < 2000; ++i) {
      const auto m = sample_mask(50, 30, MaskParams{10, 7}, rng);
      CHECK(m.t <= 10);
      CHECK(m.f <= 7);
      CHECK(m.t0 + m.t <= 50);
      CHECK(m.f0 + m.f <= 30);
    }
    SeededRng a(77), b(77);
    const auto m = sample_mask(50, 30, MaskParams{10, 7}, a);
    const auto t = static_cast<std::size_t>(uniform_int(b, 0, 10));
    const auto t0 = static_cast<std::size_t>(uniform_int(b, 0, static_cast<std::int64_t>(50 - t)));
    const auto f = static_cast<std::size_t>(uniform_int(b, 0, 7));
    const auto f0 = static_cast<std::size_t>(uniform_int(b, 0, static_cast<std::int64_t>(30 - f)));
    CHECK(m == MaskSpec{t0, t, f0, f});
  }

  TEST_CASE("parsing") {
    CHECK(parse_scheme("mm") == Scheme::kMixture);
    CHECK(parse_scheme("ZM") == Scheme::kZero);
    CHECK(parse_scheme("Cm") == Scheme::kCut);
    CHECK(parse_scheme("off") == Scheme::kOff);
    CHECK_THROWS_AS(parse_scheme("XM"), std::invalid_argument);
    CHECK(parse_mask_spec("1,2,3,4") == MaskSpec{1, 2, 3, 4});
    CHECK(to_string(MaskSpec{1, 2, 3, 4}) == "1,2,3,4");
    CHECK_THROWS_AS(parse_mask_spec("1,2,3"), std::invalid_argument);
    CHECK_THROWS_AS(parse_mask_spec("1,2,x,4"), std::invalid_argument);
    CHECK_THROWS_AS(parse_mask_spec("1,-2,3,4"), std::invalid_argument);
  }
}
