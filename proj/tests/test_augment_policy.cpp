#include <doctest.h>

#include <map>

#include "oracles.hpp"
#include "sapp/augment_policy.hpp"
#include "test_util.hpp"

using namespace sapp;

namespace {

AugmentPolicy policy(Scheme s, std::vector<int> layers = {0}) {
  AugmentPolicy p;
  p.scheme = s;
  p.layer_set = std::move(layers);
  return p;
}

Batch<double> random_batch(std::size_t n, Shape s, SeededRng& rng) {
  Batch<double> b;
  for (std::size_t i = 0; i < n; ++i) b.push_back(test::random_tensor<double>(s, rng));
  return b;
}

}  // namespace

TEST_SUITE("augment_policy") {
  TEST_CASE("layer sets parse sorted and deduplicated") {
    CHECK(parse_layer_set("2,0,2") == std::vector<int>{0, 2});
    CHECK(parse_layer_set("-").empty());
    CHECK(parse_layer_set("none").empty());
    CHECK(parse_layer_set("").empty());
    CHECK_THROWS_AS(parse_layer_set("5"), std::invalid_argument);
    CHECK_THROWS_AS(parse_layer_set("0,,1"), std::invalid_argument);
    CHECK_THROWS_AS(parse_layer_set("a"), std::invalid_argument);
    CHECK(format_layer_set(std::vector<int>{0, 1, 4}) == "0,1,4");
    CHECK(format_layer_set(std::vector<int>{}) == "-");
  }

  TEST_CASE("mask bounds from ratios round half up") {
    CHECK(resolve_params(0.10, 0.10, 431, 256) == MaskParams{43, 26});
    CHECK(resolve_params(0.05, 0.05, 10, 10) == MaskParams{1, 1});
    CHECK(resolve_params(0.0, 1.0, 7, 9) == MaskParams{0, 9});
    CHECK_THROWS_AS(resolve_params(1.5, 0.1, 10, 10), std::invalid_argument);
    AugmentPolicy p = policy(Scheme::kZero);
    p.absolute_params = MaskParams{5, 6};
    CHECK(params_for_layer(p, 0, 100, 100) == MaskParams{5, 6});
    CHECK(params_for_layer(p, 2, 100, 100) == MaskParams{10, 10});
  }

  TEST_CASE("policy validation") {
    CHECK_THROWS_AS(policy(Scheme::kMixture, {}).validate(), std::invalid_argument);
    CHECK_THROWS_AS(policy(Scheme::kMixture, {7}).validate(), std::invalid_argument);
    auto p = policy(Scheme::kZero);
    p.time_ratio = -0.1;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    CHECK_NOTHROW(policy(Scheme::kOff, {}).validate());
    CHECK_FALSE(policy(Scheme::kOff, {0}).enabled());
    CHECK_FALSE(policy(Scheme::kZero, {}).enabled());
  }

  TEST_CASE("partner is never the target and B = 1 has none") {
    SeededRng rng(3);
    for (std::size_t b = 2; b < 6; ++b)
      for (std::size_t t = 0; t < b; ++t)
        for (int i = 0; i < 100; ++i) {
          const auto p = choose_partner(b, t, rng);
          REQUIRE(p.has_value());
          CHECK(*p != t);
          CHECK(*p < b);
        }
    CHECK_FALSE(choose_partner(1, 0, rng).has_value());
    CHECK_THROWS_AS(choose_partner(3, 3, rng), std::invalid_argument);
  }

  TEST_CASE("single-sample batches fall back to zero masking") {
    SeededRng rng(4);
    const auto plan = plan_batch(1, Shape{1, 20, 20}, policy(Scheme::kCut), 0, rng);
    CHECK(plan.samples[0].scheme == Scheme::kZero);
    CHECK_FALSE(plan.samples[0].partner.has_value());
  }

  TEST_CASE("plans depend only on rng state and dims") {
    SeededRng r1(9, 1), r2(9, 1);
    const auto a = plan_batch(4, Shape{3, 30, 20}, policy(Scheme::kMixture), 1, r1);
    const auto b = plan_batch(4, Shape{3, 30, 20}, policy(Scheme::kMixture), 1, r2);
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(a.samples[i].mask == b.samples[i].mask);
      CHECK(a.samples[i].partner == b.samples[i].partner);
    }
    // Draw order per sample: mask (t, t0, f, f0), then partner.
    SeededRng r3(9, 1);
    const auto m0 = sample_mask(30, 20, MaskParams{3, 2}, r3);
    const auto p0 = choose_partner(4, 0, r3);
    CHECK(a.samples[0].mask == m0);
    CHECK(a.samples[0].partner == p0);
  }

  TEST_CASE("apply_plan reads partners from the unaugmented batch") {
    SeededRng rng(5);
    const Shape s{2, 12, 10};
    const auto batch = random_batch(4, s, rng);
    const auto plan = plan_batch(4, s, policy(Scheme::kMixture), 0, rng);
    const auto out = apply_plan(batch, plan);
    for (std::size_t i = 0; i < 4; ++i) {
      const auto& ps = plan.samples[i];
      CHECK(bit_equal(out[i], oracle::mask(Scheme::kMixture, batch[i], batch[*ps.partner], ps.mask)));
    }
  }

  TEST_CASE("backward scales masked cells by 0 (ZM, CM) or 1/2 (MM)") {
    SeededRng rng(6);
    const Shape s{2, 8, 8};
    const auto g = random_batch(3, s, rng);
    for (Scheme sc : {Scheme::kZero, Scheme::kMixture, Scheme::kCut}) {
      const auto plan = plan_batch(3, s, policy(sc), 0, rng);
      const auto back = plan_backward(g, plan);
      for (std::size_t i = 0; i < 3; ++i) {
        const auto& m = plan.samples[i].mask;
        for (std::size_t c = 0; c < s.channels; ++c)
          for (std::size_t t = 0; t < s.frames; ++t)
            for (std::size_t f = 0; f < s.bins; ++f) {
              const double want = !m.covers(t, f) ? g[i](c, t, f)
                                  : sc == Scheme::kMixture ? 0.5 * g[i](c, t, f)
                                                           : 0.0;
              CHECK(back[i](c, t, f) == want);
            }
      }
    }
  }

  TEST_CASE("layer choice is uniform over the set") {
    SeededRng rng(7);
    const std::vector<int> set{0, 2, 4};
    std::map<int, int> counts;
    for (int i = 0; i < 30000; ++i) ++counts[choose_layer(set, rng)];
    CHECK(counts.size() == 3);
    for (auto [layer, n] : counts) CHECK(std::abs(n / 30000.0 - 1.0 / 3.0) < 0.015);
    CHECK_THROWS_AS(choose_layer(std::vector<int>{}, rng), std::invalid_argument);
  }

  TEST_CASE("mismatched batches are rejected") {
    Batch<double> b{Tensor64(Shape{1, 4, 4}), Tensor64(Shape{1, 4, 5})};
    CHECK_THROWS_AS(common_shape(b), std::invalid_argument);
    SeededRng rng(1);
    const auto plan = plan_batch(3, Shape{1, 4, 4}, policy(Scheme::kZero), 0, rng);
    Batch<double> two{Tensor64(Shape{1, 4, 4}), Tensor64(Shape{1, 4, 4})};
    CHECK_THROWS_AS(apply_plan(two, plan), std::invalid_argument);
  }
}
