#include <doctest.h>

#include <fstream>
#include <sstream>

#include "oracles.hpp"
#include "sapp/commands.hpp"
#include "sapp/tensor_io.hpp"
#include "test_util.hpp"

using namespace sapp;

namespace {

const std::filesystem::path kFixtures = SAPP_FIXTURE_DIR;

std::string q(const std::filesystem::path& p) { return "\"" + p.string() + "\""; }

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Tiny cached dataset shared by the train/ablate tests.
RunConfig tiny_run(const test::TempDir& dir) {
  RunConfig cfg;
  cfg.synth.clips_per_class = 4;
  cfg.synth.clip_seconds = 0.5;
  cfg.features.mel_bins = 32;
  cfg.paths.train_meta = dir / "synth" / "train.tsv";
  cfg.paths.test_meta = dir / "synth" / "test.tsv";
  cfg.paths.audio_root = dir / "synth";
  cfg.paths.cache_dir = dir / "cache";
  cfg.paths.out_dir = dir / "out";
  cfg.trainer.epochs = 2;
  cfg.trainer.batch_size = 8;
  cfg.trainer.lr_init = 1e-3;
  cfg.trainer.lr_floor = 5e-5;
  cfg.apply_override("trainer.seeds=1,2");
  std::ostringstream log;
  cmd_synth(cfg, dir / "synth", log);
  cmd_extract(cfg, log);
  return cfg;
}

}  // namespace

TEST_SUITE("commands") {
  TEST_CASE("augment: explicit spec identities and the MM golden fixture") {
    test::TempDir dir("aug");
    const RunConfig cfg;
    AugmentArgs a;
    a.input = kFixtures / "mm_x.sapp";
    a.output = dir / "out.sapp";
    a.scheme = Scheme::kZero;
    a.spec = MaskSpec{0, 0, 0, 0};
    cmd_augment(cfg, a);
    CHECK(bit_equal(tensor_read(a.output), tensor_read(a.input)));

    a.scheme = Scheme::kCut;
    a.partner = a.input;
    a.spec = MaskSpec{2, 4, 3, 5};
    cmd_augment(cfg, a);
    CHECK(bit_equal(tensor_read(a.output), tensor_read(a.input)));

    std::string spec_text;
    std::ifstream(kFixtures / "mm_spec.txt") >> spec_text;
    a.scheme = Scheme::kMixture;
    a.partner = kFixtures / "mm_y.sapp";
    a.spec = parse_mask_spec(spec_text);
    cmd_augment(cfg, a);
    const auto golden = tensor_read(kFixtures / "mm_golden.sapp");
    CHECK(bit_equal(tensor_read(a.output), golden));
    // The committed golden still agrees with the independent cell oracle.
    CHECK(bit_equal(golden, oracle::mask(Scheme::kMixture, tensor_read(kFixtures / "mm_x.sapp"),
                                         tensor_read(kFixtures / "mm_y.sapp"), *a.spec)));
  }

  TEST_CASE("augment: the CLI matches the in-process API and reports the mask") {
    test::TempDir dir("aug-cli");
    const auto x = kFixtures / "mm_x.sapp", y = kFixtures / "mm_y.sapp";
    const std::string out = test::cli_output(
        fmt::format("augment -i {} -o {} -s MM -p {} --spec 1,2,3,4", q(x), q(dir / "o.sapp"), q(y)));
    CHECK(out == "spec 1,2,3,4\n");
    CHECK(bit_equal(tensor_read(dir / "o.sapp"),
                    apply_mixture_mask(tensor_read(x), tensor_read(y), MaskSpec{1, 2, 3, 4})));

    // Sampled masks are reproducible from the seed.
    const std::string s1 = test::cli_output(fmt::format("--seed 5 augment -i {} -o {}", q(x), q(dir / "a.sapp")));
    const std::string s2 = test::cli_output(fmt::format("--seed 5 augment -i {} -o {}", q(x), q(dir / "b.sapp")));
    CHECK(s1 == s2);
    CHECK(s1.rfind("spec ", 0) == 0);
    CHECK(slurp(dir / "a.sapp") == slurp(dir / "b.sapp"));
  }

  TEST_CASE("augment: usage errors exit with 2") {
    test::TempDir dir("aug-err");
    FeatureTensor small(Shape{1, 5, 5});
    tensor_write(dir / "small.sapp", small);
    const auto x = kFixtures / "mm_x.sapp";
    CHECK(test::run_cli(fmt::format("augment -i {} -o {} -s MM", q(x), q(dir / "o.sapp"))) == 2);
    CHECK(test::run_cli(fmt::format("augment -i {} -o {} -s CM -p {}", q(x), q(dir / "o.sapp"), q(dir / "small.sapp"))) == 2);
    CHECK(test::run_cli(fmt::format("augment -i {} -o {} --spec 0,50,0,0", q(x), q(dir / "o.sapp"))) == 2);
    CHECK(test::run_cli(fmt::format("augment -i {} -o {} --spec 1,2", q(x), q(dir / "o.sapp"))) == 2);
    CHECK(test::run_cli(fmt::format("augment -i {} -o {} -s QQ", q(x), q(dir / "o.sapp"))) == 2);
    CHECK(test::run_cli("augment") == 2);
    CHECK(test::run_cli("bogus") == 2);
    CHECK(test::run_cli(fmt::format("augment -i {} -o {}", q(dir / "missing.sapp"), q(dir / "o.sapp"))) == 1);
    CHECK(test::run_cli("--help") == 0);
  }

  TEST_CASE("visualize") {
    test::TempDir dir("vis");
    tensor_write(dir / "const.sapp", FeatureTensor(Shape{1, 6, 4}, 3.0f));
    cmd_visualize(dir / "const.sapp", dir / "c.pgm");
    const std::string pgm = slurp(dir / "c.pgm");
    const std::string header = "P5\n6 4\n255\n";
    REQUIRE(pgm.size() == header.size() + 24);
    CHECK(pgm.substr(0, header.size()) == header);
    for (std::size_t i = header.size(); i < pgm.size(); ++i) CHECK(static_cast<unsigned char>(pgm[i]) == 128);

    FeatureTensor pos(Shape{1, 6, 4});
    for (std::size_t t = 0; t < 6; ++t)
      for (std::size_t f = 0; f < 4; ++f) pos(0, t, f) = 1.0f + static_cast<float>(t + f);
    const auto masked = apply_zero_mask(pos, MaskSpec{2, 1, 0, 0});
    const auto px = render_gray(masked, 0);
    for (std::size_t row = 0; row < 4; ++row) CHECK(px[row * 6 + 2] == 0);
    CHECK(px[0 * 6 + 5] == 255);  // top row is the highest bin, t = 5, f = 3

    FeatureTensor multi(Shape{2, 3, 3});
    tensor_write(dir / "multi.sapp", multi);
    CHECK_THROWS_AS(cmd_visualize(dir / "multi.sapp", dir / "m.pgm"), UsageError);
    CHECK_NOTHROW(cmd_visualize(dir / "multi.sapp", dir / "m.pgm", 1));
    CHECK(test::run_cli(fmt::format("visualize -i {} -o {}", q(dir / "multi.sapp"), q(dir / "m.pgm"))) == 2);
  }

  TEST_CASE("extract: exit codes and idempotent summary") {
    test::TempDir dir("extract");
    CHECK(test::run_cli(fmt::format("extract --train-meta {}", q(dir / "none.tsv"))) == 2);
    CHECK(test::run_cli("extract") == 2);
    CHECK(test::run_cli(fmt::format("--set synth.clips_per_class=2 --set synth.clip_seconds=0.25 synth -o {}",
                                    q(dir / "s"))) == 0);
    const std::string args = fmt::format("--set features.mel_bins=16 extract --train-meta {} --test-meta {} --audio-root {} --cache-dir {}",
                                         q(dir / "s" / "train.tsv"), q(dir / "s" / "test.tsv"), q(dir / "s"), q(dir / "c"));
    CHECK(test::cli_output(args) == "8 written, 0 skipped, 0 failed\n");
    CHECK(test::cli_output(args) == "0 written, 8 skipped, 0 failed\n");
    CHECK(std::filesystem::exists(dir / "c" / "resolved_config.txt"));
    std::ofstream(dir / "s" / "train.tsv", std::ios::app) << "audio/ghost.wav\tclass_00\n";
    CHECK(test::run_cli(args) == 1);
  }

  TEST_CASE("train and ablate on a tiny cache") {
    test::TempDir dir("train");
    RunConfig cfg = tiny_run(dir);
    std::ostringstream log;
    const auto report = cmd_train(cfg, log);
    CHECK(report.seeds.size() == 2);
    const std::string summary = slurp(dir / "out" / "summary.csv");
    CHECK(summary == fmt::format("mean,std\n{},{}\n", report.mean, report.stddev));
    CHECK(std::filesystem::exists(dir / "out" / "checkpoints" / "seed_1" / "manifest.tsv"));
    CHECK(std::filesystem::exists(dir / "out" / "resolved_config.txt"));
    std::ifstream curves(dir / "out" / "curves.csv");
    std::string line;
    std::size_t rows = 0;
    while (std::getline(curves, line)) ++rows;
    CHECK(rows == 1 + 2 * 2);

    // A one-cell grid reproduces cmd_train exactly.
    RunConfig one = cfg;
    one.paths.out_dir = dir / "ablate1";
    one.apply_override("ablate.layer_sets=-");
    one.apply_override("ablate.schemes=ZM");
    const auto rows1 = cmd_ablate(one, log);
    REQUIRE(rows1.size() == 1);
    CHECK(rows1[0].mean == report.mean);
    CHECK(rows1[0].stddev == report.stddev);
    CHECK(slurp(dir / "ablate1" / "ablation.csv") ==
          fmt::format("grid,cell,scheme,mean,std\nlayers,-,ZM,{},{}\n", report.mean, report.stddev));

    RunConfig mm = cfg;
    mm.paths.out_dir = dir / "ablate3";
    mm.trainer.epochs = 1;
    mm.apply_override("ablate.layer_sets=-;0;0,1,2,3,4");
    mm.apply_override("ablate.schemes=MM");
    CHECK(cmd_ablate(mm, log).size() == 3);

    RunConfig ratio = cfg;
    ratio.paths.out_dir = dir / "ratio";
    ratio.trainer.epochs = 1;
    ratio.apply_override("ablate.grid=time_ratio");
    ratio.apply_override("ablate.ratios=0,0.25");
    ratio.apply_override("ablate.schemes=MM");
    ratio.apply_override("policy.layers=0");
    const auto rr = cmd_ablate(ratio, log);
    REQUIRE(rr.size() == 2);
    CHECK(rr[1].cell == "0.25");

    RunConfig missing = cfg;
    missing.paths.cache_dir = dir / "no-cache";
    try {
      cmd_train(missing, log);
      FAIL("expected UsageError");
    } catch (const UsageError& e) {
      CHECK(std::string(e.what()).find("extract") != std::string::npos);
    }
  }
}
