#include <doctest.h>

#include <cmath>
#include <limits>

#include "sapp/error.hpp"
#include "sapp/trainer.hpp"
#include "test_util.hpp"

using namespace sapp;

namespace {

// Class k carries extra energy in bins [4k, 4k + 4).
LabeledSet toy_set(std::size_t per_class, std::size_t classes, std::uint64_t seed, Shape s = Shape{1, 16, 16}) {
  SeededRng rng(seed);
  LabeledSet set;
  for (std::size_t i = 0; i < per_class * classes; ++i) {
    const int label = static_cast<int>(i % classes);
    FeatureTensor x(s);
    for (std::size_t t = 0; t < s.frames; ++t)
      for (std::size_t f = 0; f < s.bins; ++f) {
        const bool band = f / 4 == static_cast<std::size_t>(label);
        x(0, t, f) = static_cast<float>(rng.normal() + (band ? 2.0 : 0.0));
      }
    set.features.push_back(std::move(x));
    set.labels.push_back(label);
  }
  return set;
}

TrainConfig quick(std::size_t epochs, Scheme scheme = Scheme::kOff) {
  TrainConfig t;
  t.epochs = epochs;
  t.lr_init = 1e-3;
  t.lr_floor = 5e-5;
  t.batch_size = 8;
  t.seeds = {1};
  t.policy.scheme = scheme;
  if (scheme != Scheme::kOff) t.policy.layer_set = {0, 1, 2, 3, 4};
  return t;
}

}  // namespace

TEST_SUITE("trainer") {
  TEST_CASE("learning-rate schedule at full scale") {
    const auto cfg = TrainConfig::full_schedule();
    CHECK(lr_at(0, cfg) == 1e-4);
    CHECK(lr_at(49, cfg) == 1e-4);
    CHECK(lr_at(50, cfg) == 1e-4);
    CHECK(lr_at(150, cfg) == doctest::Approx(5.25e-5).epsilon(1e-12));
    CHECK(lr_at(250, cfg) == 5e-6);
    CHECK(lr_at(349, cfg) == 5e-6);
    CHECK(lr_at(51, cfg) < 1e-4);
    CHECK(lr_at(249, cfg) == doctest::Approx(5e-6 + (1e-4 - 5e-6) / 200.0).epsilon(1e-12));
    for (std::size_t e = 1; e < 350; ++e) CHECK(lr_at(e, cfg) <= lr_at(e - 1, cfg));
    CHECK_THROWS_AS(lr_at(350, cfg), std::invalid_argument);
  }

  TEST_CASE("toy schedule scales the breakpoints") {
    TrainConfig t;
    t.epochs = 30;
    CHECK(t.resolved_decay_start() == 4);
    CHECK(t.resolved_decay_end() == 21);
    t.epochs = 1;
    CHECK_NOTHROW(t.validate());
    CHECK(lr_at(0, t) == t.lr_init);
  }

  TEST_CASE("config validation") {
    TrainConfig t;
    t.decay_start = 20;
    t.decay_end = 10;
    CHECK_THROWS_AS(t.validate(), ConfigError);
    t = {};
    t.lr_floor = 1e-3;
    CHECK_THROWS_AS(t.validate(), ConfigError);
    t = {};
    t.seeds.clear();
    CHECK_THROWS_AS(t.validate(), ConfigError);
    t = {};
    t.batch_size = 0;
    CHECK_THROWS_AS(t.validate(), ConfigError);
    t = {};
    t.policy.scheme = Scheme::kMixture;
    CHECK_THROWS_AS(t.validate(), ConfigError);
  }

  TEST_CASE("mean and sample standard deviation") {
    const std::vector<double> v{0.5, 0.7, 0.9};
    const auto [m, s] = mean_std(v);
    CHECK(m == doctest::Approx(0.7));
    CHECK(s == doctest::Approx(0.2));
    const std::vector<double> one{0.4};
    CHECK(mean_std(one).second == 0.0);
  }

  TEST_CASE("Adam first step, weight decay and clipping") {
    Parameter p("w", {2}, 0);
    p.value = {1.0, -2.0};
    p.grad = {0.5, -4.0};
    Adam opt({&p});
    opt.step(0.1);
    // First bias-corrected step is lr * g / (|g| + eps).
    CHECK(p.value[0] == doctest::Approx(1.0 - 0.1 * 0.5 / (0.5 + 1e-8)));
    CHECK(p.value[1] == doctest::Approx(-2.0 + 0.1 * 4.0 / (4.0 + 1e-8)));

    Parameter q("w", {1}, 0);
    q.value = {2.0};
    q.grad = {0.0};
    Adam decay({&q});
    decay.step(0.1, 0.5);
    CHECK(q.value[0] == doctest::Approx(1.9));

    Parameter r("w", {1}, 0);
    r.value = {0.0};
    r.grad = {10.0};
    Adam clipped({&r});
    clipped.step(0.1, 0.0, 1.0);
    CHECK(r.value[0] == doctest::Approx(-0.1));
  }

  TEST_CASE("evaluation") {
    SeededRng rng(3);
    auto model = ModelGraph::build(ModelConfig::toy(10), rng);
    auto set = toy_set(20, 10, 5, Shape{1, 16, 40});
    const double acc = evaluate(model, set);
    CHECK(std::abs(acc - 0.1) <= 0.05);
    LabeledSet reversed;
    for (std::size_t i = set.size(); i-- > 0;) {
      reversed.features.push_back(set.features[i]);
      reversed.labels.push_back(set.labels[i]);
    }
    CHECK(evaluate(model, reversed, 7) == acc);
    CHECK_THROWS_AS(evaluate(model, LabeledSet{}), std::invalid_argument);
  }

  TEST_CASE("training is reproducible and seed dependent") {
    const auto train = toy_set(6, 4, 1), test = toy_set(2, 4, 2);
    const auto mc = ModelConfig::toy(4);
    for (Scheme s : {Scheme::kOff, Scheme::kMixture}) {
      const auto a = train_seed(mc, train, test, quick(1, s), 7);
      const auto b = train_seed(mc, train, test, quick(1, s), 7);
      const auto c = train_seed(mc, train, test, quick(1, s), 8);
      CHECK(a.result.final_loss == b.result.final_loss);
      CHECK(a.result.final_loss != c.result.final_loss);
    }
  }

  TEST_CASE("curves follow the schedule and the report aggregates seeds") {
    const auto train = toy_set(4, 4, 3), test = toy_set(2, 4, 4);
    auto cfg = quick(3);
    cfg.seeds = {1, 2};
    std::size_t calls = 0;
    const auto report = sapp::train(ModelConfig::toy(4), train, test, cfg, [&](const EpochRecord&) { ++calls; });
    CHECK(calls == 6);
    REQUIRE(report.seeds.size() == 2);
    for (const auto& r : report.curves) CHECK(r.lr == lr_at(r.epoch, cfg));
    const std::vector<double> accs{report.seeds[0].test_accuracy, report.seeds[1].test_accuracy};
    CHECK(report.mean == mean_std(accs).first);
    CHECK(report.stddev == mean_std(accs).second);
  }

  TEST_CASE("a learnable toy problem is learned") {
    const auto train = toy_set(32, 4, 5, Shape{1, 32, 32}), test = toy_set(4, 4, 6, Shape{1, 32, 32});
    auto cfg = quick(15);
    cfg.lr_init = 3e-3;
    const auto run = train_seed(ModelConfig::toy(4), train, test, cfg, 1);
    CHECK(run.curve.back().train_loss < run.curve.front().train_loss);
    CHECK(run.result.test_accuracy >= 0.75);
  }

  TEST_CASE("non-finite loss aborts with a diagnostic") {
    auto train = toy_set(2, 4, 7);
    train.features[0](0, 0, 0) = std::numeric_limits<float>::quiet_NaN();
    try {
      train_seed(ModelConfig::toy(4), train, toy_set(1, 4, 8), quick(1), 1);
      FAIL("expected NumericError");
    } catch (const NumericError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("epoch 0") != std::string::npos);
      CHECK(msg.find("batch") != std::string::npos);
      CHECK(msg.find("lr") != std::string::npos);
    }
  }
}
