#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sapp/data.hpp"
#include "sapp/masking.hpp"
#include "sapp/run_config.hpp"
#include "sapp/trainer.hpp"

namespace sapp {

/// Bad invocation: missing inputs, inconsistent arguments. Exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Writes the resolved config next to a command's outputs.
void write_resolved_config(const RunConfig& cfg, const std::filesystem::path& dir);

/// Generates the synthetic dataset (cfg.synth, cfg.seed) under out_dir.
DatasetManifest cmd_synth(const RunConfig& cfg, const std::filesystem::path& out_dir, std::ostream& log);

/// Builds the feature cache from paths.train_meta / paths.test_meta.
CacheReport cmd_extract(const RunConfig& cfg, std::ostream& log);

struct AugmentArgs {
  std::filesystem::path input;
  std::filesystem::path output;
  Scheme scheme = Scheme::kZero;
  std::optional<std::filesystem::path> partner;
  /// Explicit mask; sampled from (seed, policy ratios or t_max/f_max) otherwise.
  std::optional<MaskSpec> spec;
};

/// Masks one SAPP tensor file and returns the MaskSpec used.
MaskSpec cmd_augment(const RunConfig& cfg, const AugmentArgs& args);

/// Writes a binary PGM, F rows by T columns, highest bin on the top row.
void cmd_visualize(const std::filesystem::path& input, const std::filesystem::path& output,
                   std::optional<std::size_t> channel = std::nullopt);

/// Grayscale rendering used by cmd_visualize: row-major, F x T.
std::vector<std::uint8_t> render_gray(const FeatureTensor& x, std::size_t channel);

/// Trains every seed on the cache and writes curves.csv, seeds.csv,
/// summary.csv and per-seed checkpoints under paths.out_dir.
RunReport cmd_train(const RunConfig& cfg, std::ostream& log);

struct AblationRow {
  std::string grid;
  std::string cell;
  Scheme scheme = Scheme::kOff;
  double mean = 0.0;
  double stddev = 0.0;
};

/// Iterates the configured grid x schemes, writing ablation.csv under
/// paths.out_dir. Cells that resolve to the same run are trained once.
std::vector<AblationRow> cmd_ablate(const RunConfig& cfg, std::ostream& log);

/// The policy one ablation cell trains with.
AugmentPolicy ablation_policy(const RunConfig& cfg, std::size_t cell, Scheme scheme);
std::size_t ablation_cells(const RunConfig& cfg);
std::string ablation_cell_name(const RunConfig& cfg, std::size_t cell);

}  // namespace sapp
