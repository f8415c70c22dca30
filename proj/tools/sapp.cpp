// sapp: feature extraction, masking, visualization, training and ablation.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "sapp/commands.hpp"
#include "sapp/error.hpp"

namespace {

struct Globals {
  std::string config_file;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
};

sapp::RunConfig resolve(const Globals& g, const std::vector<std::string>& extra) {
  sapp::RunConfig cfg = g.config_file.empty() ? sapp::RunConfig{} : sapp::RunConfig::load(g.config_file);
  for (const auto& o : g.overrides) cfg.apply_override(o);
  for (const auto& o : extra) cfg.apply_override(o);
  if (g.seed) cfg.seed = *g.seed;
  return cfg;
}

// Turns optional flags into overrides so they go through the same parser.
void add_flag(std::vector<std::string>& out, const std::string& key, const std::string& value) {
  if (!value.empty()) out.push_back(key + "=" + value);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spectrogram and hidden-state masking toolkit"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("-c,--config", g.config_file, "Config file (INI-style, see README)")->check(CLI::ExistingFile);
  app.add_option("--set", g.overrides, "Override a config key: section.key=value")->take_all();
  app.add_option("--seed", g.seed, "Global seed");

  std::string synth_out = "synth";
  auto* synth = app.add_subcommand("synth", "Generate the synthetic band-noise dataset");
  synth->add_option("-o,--out", synth_out, "Output directory");

  std::string train_meta, test_meta, audio_root, cache_dir, out_dir, grid;
  auto* extract = app.add_subcommand("extract", "Compute and cache log-mel features");
  extract->add_option("--train-meta", train_meta, "Training meta file (path<TAB>label)");
  extract->add_option("--test-meta", test_meta, "Test meta file");
  extract->add_option("--audio-root", audio_root, "Directory meta paths are relative to");
  extract->add_option("--cache-dir", cache_dir, "Feature cache directory");

  sapp::AugmentArgs aug;
  std::string scheme = "ZM", spec, partner;
  auto* augment = app.add_subcommand("augment", "Mask one SAPP tensor file");
  augment->add_option("-i,--input", aug.input, "Input tensor")->required();
  augment->add_option("-o,--output", aug.output, "Output tensor")->required();
  augment->add_option("-s,--scheme", scheme, "ZM, MM or CM");
  augment->add_option("--spec", spec, "Explicit mask t0,t,f0,f");
  augment->add_option("-p,--partner", partner, "Partner tensor for MM and CM");

  std::filesystem::path vis_in, vis_out;
  std::optional<std::size_t> channel;
  auto* visualize = app.add_subcommand("visualize", "Render a tensor as a PGM image");
  visualize->add_option("-i,--input", vis_in, "Input tensor")->required();
  visualize->add_option("-o,--output", vis_out, "Output .pgm")->required();
  visualize->add_option("--channel", channel, "Channel to render");

  auto* train = app.add_subcommand("train", "Train on the feature cache");
  auto* ablate = app.add_subcommand("ablate", "Train every cell of an ablation grid");
  for (auto* sub : {train, ablate}) {
    sub->add_option("--cache-dir", cache_dir, "Feature cache directory");
    sub->add_option("--out-dir", out_dir, "Output directory");
  }
  ablate->add_option("--grid", grid, "layers, time_ratio or freq_ratio");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? sapp::kExitOk : sapp::kExitUsage;
  }

  try {
    std::vector<std::string> extra;
    add_flag(extra, "paths.train_meta", train_meta);
    add_flag(extra, "paths.test_meta", test_meta);
    add_flag(extra, "paths.audio_root", audio_root);
    add_flag(extra, "paths.cache_dir", cache_dir);
    add_flag(extra, "paths.out_dir", out_dir);
    add_flag(extra, "ablate.grid", grid);
    const sapp::RunConfig cfg = resolve(g, extra);

    if (*synth) {
      sapp::cmd_synth(cfg, synth_out, std::cerr);
    } else if (*extract) {
      const auto report = sapp::cmd_extract(cfg, std::cout);
      if (!report.errors.empty()) return sapp::kExitRuntime;
    } else if (*augment) {
      aug.scheme = sapp::parse_scheme(scheme);
      if (!spec.empty()) aug.spec = sapp::parse_mask_spec(spec);
      if (!partner.empty()) aug.partner = partner;
      std::cout << "spec " << sapp::to_string(sapp::cmd_augment(cfg, aug)) << '\n';
    } else if (*visualize) {
      sapp::cmd_visualize(vis_in, vis_out, channel);
    } else if (*train) {
      sapp::cmd_train(cfg, std::cerr);
    } else if (*ablate) {
      sapp::cmd_ablate(cfg, std::cerr);
    }
  } catch (const sapp::UsageError& e) {
    fmt::print(stderr, "usage error: {}\n", e.what());
    return sapp::kExitUsage;
  } catch (const sapp::ConfigError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return sapp::kExitUsage;
  } catch (const std::invalid_argument& e) {
    fmt::print(stderr, "usage error: {}\n", e.what());
    return sapp::kExitUsage;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return sapp::kExitRuntime;
  }
  return sapp::kExitOk;
}
