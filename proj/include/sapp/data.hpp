#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sapp/features.hpp"
#include "sapp/tensor.hpp"

namespace sapp {

enum class Split { kTrain, kTest };

struct MetaEntry {
  std::string path;
  std::string label;
  friend bool operator==(const MetaEntry&, const MetaEntry&) = default;
};

struct ManifestEntry {
  std::string path;
  std::string label;
  Split split = Split::kTrain;
  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  /// Distinct labels in lexicographic order; label ids index into it.
  std::vector<std::string> vocabulary;

  int label_id(const std::string& label) const;
  std::size_t count(Split split) const;
  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

/// Parses a DCASE-style meta file: one "relative/path.wav<TAB>scene_label"
/// per line. An optional leading "filename<TAB>scene_label" header and blank
/// lines are skipped. Throws FormatError naming the line on any other shape.
std::vector<MetaEntry> parse_meta(std::istream& in, const std::string& source);
std::vector<MetaEntry> parse_meta_file(const std::filesystem::path& path);

/// Builds a manifest from train and (optionally) test meta files. The
/// vocabulary comes from the train labels; a test label outside it, or a
/// duplicated path, raises ValidationError.
DatasetManifest load_manifest(const std::filesystem::path& train_meta,
                              const std::optional<std::filesystem::path>& test_meta = std::nullopt);

/// Writes train.tsv and test.tsv (with header) into dir.
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& dir);

struct Band {
  double center_hz = 0.0;
  double bandwidth_hz = 0.0;
};

/// Desk-scale stand-in for scene recordings: class k is band-limited noise
/// in bands[k] with bursty on/off envelopes over a weak broadband floor.
struct SyntheticSpec {
  std::size_t classes = 4;
  std::size_t clips_per_class = 20;
  double clip_seconds = 2.0;
  double sample_rate = 22050.0;
  /// Empty means log-spaced defaults from 500 Hz (bandwidth 0.4 * center).
  std::vector<Band> bands;
  double test_fraction = 0.25;
  double background_level = 0.1;
  std::uint64_t seed = 1;

  std::vector<Band> resolved_bands() const;
  void validate() const;
};

/// Writes audio/<label>-<nnn>.wav, train.tsv and test.tsv under out_dir and
/// returns the manifest. Deterministic in spec.seed.
DatasetManifest synth_dataset(const SyntheticSpec& spec, const std::filesystem::path& out_dir);

struct CacheIndexEntry {
  std::string path;
  std::string tensor_file;
  int label_id = 0;
};

struct CacheReport {
  std::vector<CacheIndexEntry> index;
  std::size_t written = 0;
  std::size_t skipped = 0;
  std::vector<std::pair<std::string, std::string>> errors;  // (path, message)
};

// Cache directory layout:
//   index.tsv          path<TAB>tensor_file<TAB>label_id, manifest order
//   train.tsv/test.tsv the manifest the cache was built from
//   <name>.sapp        1 x T x mel_bins log-mel tensor per clip
//   <name>.sapp.key    content hash of (audio bytes, feature config)
//   norm.sapp          per-bin training-split statistics (1 x 2 x F)
CacheReport cache_features(const DatasetManifest& manifest, const FeatureConfig& cfg,
                           const std::filesystem::path& audio_root,
                           const std::filesystem::path& out_dir);

std::vector<CacheIndexEntry> read_cache_index(const std::filesystem::path& index_file);

struct LabeledSet {
  std::vector<FeatureTensor> features;
  std::vector<int> labels;
  std::size_t size() const { return labels.size(); }
};

struct CachedDataset {
  LabeledSet train;
  LabeledSet test;
  std::vector<std::string> vocabulary;
  NormStats norm;
};

/// Loads the cache and applies the stored normalization to both splits.
CachedDataset load_cached_dataset(const std::filesystem::path& cache_dir);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::span<const std::uint8_t> bytes, std::uint64_t h = 0xcbf29ce484222325ull);

}  // namespace sapp
