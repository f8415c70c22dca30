#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sapp/data.hpp"
#include "sapp/features.hpp"
#include "sapp/masking.hpp"
#include "sapp/trainer.hpp"

namespace sapp {

struct PathsConfig {
  std::optional<std::filesystem::path> train_meta;
  std::optional<std::filesystem::path> test_meta;
  std::filesystem::path audio_root = ".";
  std::filesystem::path cache_dir = "cache";
  std::filesystem::path out_dir = "runs";
};

enum class AblationGrid { kLayers, kTimeRatio, kFreqRatio };

struct AblateConfig {
  AblationGrid grid = AblationGrid::kLayers;
  std::vector<std::vector<int>> layer_sets = {{}, {0}, {0, 1}, {0, 1, 2}, {0, 1, 2, 3}, {0, 1, 2, 3, 4}};
  std::vector<double> ratios = {0.0, 0.05, 0.10, 0.25, 0.40};
  std::vector<Scheme> schemes = {Scheme::kZero, Scheme::kMixture, Scheme::kCut};
};

/// Everything a command needs, merged from a config file and --set overrides.
///
/// File format, one entry per line:
///
///   # comment
///   seed = 7
///   [trainer]
///   epochs = 30
///
/// Keys are addressed as "section.key" on the command line ("seed" for the
/// top-level key). Unknown sections or keys are errors.
struct RunConfig {
  std::uint64_t seed = 1;
  PathsConfig paths;
  FeatureConfig features;
  std::string preset = "toy";
  /// policy.t_max / policy.f_max: fixed input-layer mask bounds, both or neither.
  std::optional<std::size_t> t_max;
  std::optional<std::size_t> f_max;
  TrainConfig trainer;
  /// True once trainer.seeds was given; otherwise seeds derive from seed.
  bool seeds_given = false;
  AblateConfig ablate;
  SyntheticSpec synth;

  /// Sets one key from its textual value. Throws ConfigError.
  void set(const std::string& key, const std::string& value);
  /// "section.key=value".
  void apply_override(const std::string& assignment);

  /// Trainer config with seeds resolved (seed, seed + 1, seed + 2 by default).
  TrainConfig train_config() const;

  /// Canonical text of every key, loadable by parse().
  std::string dump() const;

  /// Cross-field checks (feature config, trainer schedule, policy).
  void validate() const;

  static RunConfig parse(std::istream& in, const std::string& source);
  static RunConfig load(const std::filesystem::path& path);
  /// All addressable keys in dump order.
  static std::vector<std::string> keys();
};

std::string_view grid_name(AblationGrid g);

}  // namespace sapp
