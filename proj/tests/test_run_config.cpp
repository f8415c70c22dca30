#include <doctest.h>

#include <sstream>

#include "sapp/error.hpp"
#include "sapp/run_config.hpp"

using namespace sapp;

namespace {

RunConfig parse(const std::string& text) {
  std::istringstream in(text);
  return RunConfig::parse(in, "test.ini");
}

std::string error_of(const std::string& text) {
  try {
    parse(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_SUITE("run_config") {
  TEST_CASE("defaults") {
    const RunConfig c;
    CHECK(c.seed == 1);
    CHECK(c.preset == "toy");
    CHECK(c.features.mel_bins == 256);
    CHECK(c.train_config().seeds == std::vector<std::uint64_t>{1, 2, 3});
    CHECK(c.trainer.batch_size == 32);
    CHECK(c.ablate.layer_sets.size() == 6);
    CHECK(c.ablate.ratios == std::vector<double>{0.0, 0.05, 0.10, 0.25, 0.40});
    CHECK_NOTHROW(c.validate());
  }

  TEST_CASE("file parsing with sections and comments") {
    const auto c = parse(
        "# run\nseed = 9\n\n[features]\nmel_bins = 64\nperceptual_weighting = off\n"
        "[policy]\nscheme = mm\nlayers = 2,0\n[trainer]\nepochs = 12\nseeds = 4,5\n"
        "[ablate]\ngrid = time_ratio\nschemes = ZM,CM\n[synth]\nbands = 500:200;2000:800\nclasses = 2\n");
    CHECK(c.seed == 9);
    CHECK(c.features.mel_bins == 64);
    CHECK_FALSE(c.features.perceptual_weighting);
    CHECK(c.trainer.policy.scheme == Scheme::kMixture);
    CHECK(c.trainer.policy.layer_set == std::vector<int>{0, 2});
    CHECK(c.train_config().seeds == std::vector<std::uint64_t>{4, 5});
    CHECK(c.ablate.grid == AblationGrid::kTimeRatio);
    CHECK(c.ablate.schemes == std::vector<Scheme>{Scheme::kZero, Scheme::kCut});
    CHECK(c.synth.bands.size() == 2);
    CHECK(c.synth.bands[1].bandwidth_hz == 800.0);
  }

  TEST_CASE("unknown keys and bad values name the line") {
    CHECK(error_of("[trainer]\nepoch = 3\n").find("test.ini:2") != std::string::npos);
    CHECK(error_of("[trainer]\nepoch = 3\n").find("trainer.epoch") != std::string::npos);
    CHECK(error_of("[nothing]\nx = 1\n").find("unknown") != std::string::npos);
    CHECK(error_of("[trainer]\nepochs = three\n").find("test.ini:2") != std::string::npos);
    CHECK(error_of("[trainer\n").find("test.ini:1") != std::string::npos);
    CHECK(error_of("just words\n").find("test.ini:1") != std::string::npos);
    CHECK_FALSE(error_of("[policy]\nlayers = 9\n").empty());
    CHECK_FALSE(error_of("[model]\npreset = giant\n").empty());
  }

  TEST_CASE("overrides") {
    RunConfig c;
    c.apply_override("trainer.epochs=7");
    c.apply_override("seed=3");
    CHECK(c.trainer.epochs == 7);
    CHECK(c.train_config().seeds == std::vector<std::uint64_t>{3, 4, 5});
    CHECK_THROWS_AS(c.apply_override("trainer.epochs"), ConfigError);
    CHECK_THROWS_AS(c.apply_override("trainer.nope=1"), ConfigError);
  }

  TEST_CASE("dump parses back to the same config") {
    RunConfig c;
    c.seed = 42;
    c.apply_override("paths.train_meta=/data/meta train.tsv");
    c.apply_override("policy.scheme=CM");
    c.apply_override("policy.layers=1,3");
    c.apply_override("policy.t_max=5");
    c.apply_override("policy.f_max=6");
    c.apply_override("trainer.lr_init=0.00123");
    c.apply_override("ablate.layer_sets=-;0;0,1,2,3,4");
    c.apply_override("synth.bands=500:200;900.5:300.25");
    const std::string text = c.dump();
    const auto back = parse(text);
    CHECK(back.dump() == text);
    CHECK(back.paths.train_meta->string() == "/data/meta train.tsv");
    CHECK(back.trainer.lr_init == 0.00123);
    CHECK(back.ablate.layer_sets.front().empty());
    CHECK(back.train_config().policy.absolute_params == MaskParams{5, 6});
    CHECK(text.find("[trainer]") != std::string::npos);
    for (const auto& key : RunConfig::keys()) {
      const auto dot = key.find('.');
      const std::string name = dot == std::string::npos ? key : key.substr(dot + 1);
      CHECK(text.find(name + " = ") != std::string::npos);
    }
  }

  TEST_CASE("cross-field validation") {
    RunConfig c;
    c.apply_override("policy.t_max=5");
    CHECK_THROWS_AS(c.validate(), ConfigError);
    RunConfig d;
    d.apply_override("features.hop=4096");
    CHECK_THROWS_AS(d.validate(), ConfigError);
    RunConfig e;
    e.apply_override("policy.scheme=MM");
    CHECK_THROWS_AS(e.validate(), ConfigError);
  }
}
