#include "sapp/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <fftw3.h>
#include <fmt/format.h>

#include "fftw_lock.hpp"
#include "sapp/error.hpp"
#include "sapp/rng.hpp"
#include "sapp/tensor_io.hpp"
#include "sapp/wav.hpp"

namespace sapp {

namespace fs = std::filesystem;

int DatasetManifest::label_id(const std::string& label) const {
  auto it = std::lower_bound(vocabulary.begin(), vocabulary.end(), label);
  if (it == vocabulary.end() || *it != label) {
    throw ValidationError(fmt::format("label '{}' not in vocabulary", label));
  }
  return static_cast<int>(it - vocabulary.begin());
}

std::size_t DatasetManifest::count(Split split) const {
  return static_cast<std::size_t>(std::count_if(
      entries.begin(), entries.end(), [split](const ManifestEntry& e) { return e.split == split; }));
}

// ------------------------------------------------------------ meta files

std::vector<MetaEntry> parse_meta(std::istream& in, const std::string& source) {
  std::vector<MetaEntry> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const auto tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() != 2 || fields[0].empty() || fields[1].empty()) {
      throw FormatError(fmt::format("{}:{}: expected 'path<TAB>label', got {} field(s)", source,
                                    lineno, fields.size()));
    }
    if (lineno == 1 && fields[0] == "filename") continue;
    out.push_back({fields[0], fields[1]});
  }
  return out;
}

std::vector<MetaEntry> parse_meta_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(fmt::format("cannot open meta file {}", path.string()));
  return parse_meta(in, path.string());
}

DatasetManifest load_manifest(const fs::path& train_meta, const std::optional<fs::path>& test_meta) {
  DatasetManifest m;
  std::set<std::string> labels;
  for (auto& e : parse_meta_file(train_meta)) {
    labels.insert(e.label);
    m.entries.push_back({std::move(e.path), std::move(e.label), Split::kTrain});
  }
  m.vocabulary.assign(labels.begin(), labels.end());
  if (test_meta) {
    const auto tests = parse_meta_file(*test_meta);
    for (std::size_t i = 0; i < tests.size(); ++i) {
      if (!labels.contains(tests[i].label)) {
        throw ValidationError(fmt::format("{}: entry {} has label '{}' not present in training meta",
                                          test_meta->string(), i + 1, tests[i].label));
      }
      m.entries.push_back({tests[i].path, tests[i].label, Split::kTest});
    }
  }
  std::set<std::string> seen;
  for (const auto& e : m.entries) {
    if (!seen.insert(e.path).second) {
      throw ValidationError(fmt::format("duplicate path '{}' in manifest", e.path));
    }
  }
  return m;
}

void save_manifest(const DatasetManifest& manifest, const fs::path& dir) {
  fs::create_directories(dir);
  for (Split split : {Split::kTrain, Split::kTest}) {
    const fs::path file = dir / (split == Split::kTrain ? "train.tsv" : "test.tsv");
    std::ofstream out(file, std::ios::trunc);
    if (!out) throw std::runtime_error(fmt::format("cannot write {}", file.string()));
    out << "filename\tscene_label\n";
    for (const auto& e : manifest.entries)
      if (e.split == split) out << e.path << '\t' << e.label << '\n';
  }
}

// ------------------------------------------------------------ synthesis

std::vector<Band> SyntheticSpec::resolved_bands() const {
  if (!bands.empty()) return bands;
  std::vector<Band> out;
  const double lo = 500.0, hi = 6600.0;
  for (std::size_t k = 0; k < classes; ++k) {
    const double frac = classes > 1 ? static_cast<double>(k) / static_cast<double>(classes - 1) : 0.0;
    const double center = lo * std::pow(hi / lo, frac);
    out.push_back({center, 0.4 * center});
  }
  return out;
}

void SyntheticSpec::validate() const {
  if (classes == 0 || clips_per_class == 0) throw std::invalid_argument("synthetic spec needs >= 1 class and clip");
  if (!(clip_seconds > 0.0) || !(sample_rate > 0.0)) throw std::invalid_argument("clip length and rate must be positive");
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) throw std::invalid_argument("test fraction must lie in [0, 1)");
  const auto b = resolved_bands();
  if (b.size() != classes) {
    throw std::invalid_argument(fmt::format("{} bands given for {} classes", b.size(), classes));
  }
  for (const auto& band : b) {
    const double lo = band.center_hz - band.bandwidth_hz / 2.0;
    const double hi = band.center_hz + band.bandwidth_hz / 2.0;
    if (!(band.bandwidth_hz > 0.0) || lo < 0.0 || hi > sample_rate / 2.0) {
      throw std::invalid_argument(fmt::format("band {} +- {} Hz outside [0, {}] Hz", band.center_hz,
                                              band.bandwidth_hz / 2.0, sample_rate / 2.0));
    }
  }
}

namespace {

std::vector<double> band_noise(std::size_t n, const Band& band, double rate, SeededRng& rng) {
  std::vector<double> buf(n);
  for (double& v : buf) v = rng.normal();
  std::vector<fftw_complex> spec(n / 2 + 1);
  fftw_plan fwd, inv;
  {
    std::lock_guard lock(detail::fftw_planner_mutex());
    fwd = fftw_plan_dft_r2c_1d(static_cast<int>(n), buf.data(), spec.data(), FFTW_ESTIMATE);
    inv = fftw_plan_dft_c2r_1d(static_cast<int>(n), spec.data(), buf.data(), FFTW_ESTIMATE);
  }
  fftw_execute(fwd);
  const double lo = band.center_hz - band.bandwidth_hz / 2.0;
  const double hi = band.center_hz + band.bandwidth_hz / 2.0;
  for (std::size_t k = 0; k < spec.size(); ++k) {
    const double f = rate * static_cast<double>(k) / static_cast<double>(n);
    if (f < lo || f > hi) spec[k][0] = spec[k][1] = 0.0;
  }
  fftw_execute(inv);
  {
    std::lock_guard lock(detail::fftw_planner_mutex());
    fftw_destroy_plan(fwd);
    fftw_destroy_plan(inv);
  }
  double energy = 0.0;
  for (double v : buf) energy += v * v;
  const double rms = std::sqrt(energy / static_cast<double>(n));
  if (rms > 0.0)
    for (double& v : buf) v /= rms;
  return buf;
}

// On/off bursts in 0.25 s segments with 10 ms raised-cosine edges.
std::vector<double> burst_envelope(std::size_t n, double rate, SeededRng& rng) {
  const auto seg = std::max<std::size_t>(1, static_cast<std::size_t>(0.25 * rate));
  const std::size_t segments = (n + seg - 1) / seg;
  std::vector<double> on(segments);
  bool any = false;
  for (auto& v : on) {
    v = rng.uniform01() < 0.7 ? 1.0 : 0.0;
    any = any || v > 0.0;
  }
  if (!any) on[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(segments) - 1))] = 1.0;
  std::vector<double> env(n);
  for (std::size_t i = 0; i < n; ++i) env[i] = on[i / seg];
  const auto ramp = std::max<std::size_t>(1, static_cast<std::size_t>(0.01 * rate));
  std::vector<double> smooth(n);
  for (std::size_t i = 0; i < n; ++i) {
    // Average over a ramp-length window approximates a linear crossfade.
    const std::size_t a = i >= ramp / 2 ? i - ramp / 2 : 0;
    const std::size_t b = std::min(n, i + ramp / 2 + 1);
    double s = 0.0;
    for (std::size_t j = a; j < b; ++j) s += env[j];
    smooth[i] = s / static_cast<double>(b - a);
  }
  return smooth;
}

}  // namespace

DatasetManifest synth_dataset(const SyntheticSpec& spec, const fs::path& out_dir) {
  spec.validate();
  const auto bands = spec.resolved_bands();
  fs::create_directories(out_dir / "audio");
  const auto n = static_cast<std::size_t>(std::llround(spec.clip_seconds * spec.sample_rate));
  const auto n_test = static_cast<std::size_t>(
      std::llround(static_cast<double>(spec.clips_per_class) * spec.test_fraction));

  DatasetManifest m;
  for (std::size_t k = 0; k < spec.classes; ++k) m.vocabulary.push_back(fmt::format("class_{:02d}", k));
  for (std::size_t k = 0; k < spec.classes; ++k) {
    for (std::size_t j = 0; j < spec.clips_per_class; ++j) {
      SeededRng rng(spec.seed, stream_id(k, j, StreamPurpose::kSynth));
      const auto tone = band_noise(n, bands[k], spec.sample_rate, rng);
      const auto env = burst_envelope(n, spec.sample_rate, rng);
      const double gain = 0.3 + 0.6 * rng.uniform01();
      Audio audio;
      audio.sample_rate = static_cast<std::uint32_t>(spec.sample_rate);
      audio.samples.resize(n);
      double peak = 0.0;
      std::vector<double> mix(n);
      for (std::size_t i = 0; i < n; ++i) {
        mix[i] = gain * (0.3 * tone[i] * env[i] + spec.background_level * 0.3 * rng.normal());
        peak = std::max(peak, std::abs(mix[i]));
      }
      const double scale = peak > 0.99 ? 0.99 / peak : 1.0;
      for (std::size_t i = 0; i < n; ++i) audio.samples[i] = static_cast<float>(mix[i] * scale);

      const std::string rel = fmt::format("audio/{}-{:03d}.wav", m.vocabulary[k], j);
      write_wav(out_dir / rel, audio);
      const Split split = j < spec.clips_per_class - n_test ? Split::kTrain : Split::kTest;
      m.entries.push_back({rel, m.vocabulary[k], split});
    }
  }
  save_manifest(m, out_dir);
  return m;
}

// --------------------------------------------------------- feature cache

std::uint64_t fnv1a(std::span<const std::uint8_t> bytes, std::uint64_t h) {
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  return h;
}

namespace {

std::string config_fingerprint(const FeatureConfig& c) {
  return fmt::format("sr={};win={};hop={};mel={};fmin={};fmax={};floor={};pw={}", c.sample_rate,
                     c.window, c.hop, c.mel_bins, c.fmin, c.fmax, c.log_floor,
                     c.perceptual_weighting ? 1 : 0);
}

std::string tensor_name(const std::string& path) {
  std::string s;
  for (char ch : path) {
    if (ch == '/' || ch == '\\') s += "__";
    else s += ch;
  }
  return s + ".sapp";
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

CacheReport cache_features(const DatasetManifest& manifest, const FeatureConfig& cfg,
                           const fs::path& audio_root, const fs::path& out_dir) {
  cfg.validate();
  fs::create_directories(out_dir);
  const LogMelExtractor extractor(cfg);
  const std::string fingerprint = config_fingerprint(cfg);

  enum class Outcome { kWritten, kSkipped, kFailed };
  const std::size_t n = manifest.entries.size();
  std::vector<Outcome> outcome(n, Outcome::kFailed);
  std::vector<std::string> message(n);

  const auto jobs = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t ji = 0; ji < jobs; ++ji) {
    const auto i = static_cast<std::size_t>(ji);
    const auto& e = manifest.entries[i];
    try {
      const fs::path audio_path = audio_root / e.path;
      const auto bytes = read_file_bytes(audio_path);
      std::uint64_t h = fnv1a(bytes);
      h = fnv1a(std::span(reinterpret_cast<const std::uint8_t*>(fingerprint.data()), fingerprint.size()), h);
      const std::string key = fmt::format("{:016x}", h);
      const fs::path tensor_path = out_dir / tensor_name(e.path);
      const fs::path key_path = fs::path(tensor_path.string() + ".key");
      if (fs::exists(tensor_path) && fs::exists(key_path) && read_text(key_path) == key) {
        outcome[i] = Outcome::kSkipped;
        continue;
      }
      Audio audio = read_wav(audio_path);
      std::vector<float> samples = std::move(audio.samples);
      if (static_cast<double>(audio.sample_rate) != cfg.sample_rate) {
        samples = resample(samples, audio.sample_rate, cfg.sample_rate);
      }
      tensor_write(tensor_path, extractor.compute(samples));
      std::ofstream(key_path, std::ios::trunc) << key;
      outcome[i] = Outcome::kWritten;
    } catch (const std::exception& ex) {
      message[i] = ex.what();
    }
  }

  CacheReport report;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& e = manifest.entries[i];
    switch (outcome[i]) {
      case Outcome::kWritten: ++report.written; break;
      case Outcome::kSkipped: ++report.skipped; break;
      case Outcome::kFailed: report.errors.emplace_back(e.path, message[i]); continue;
    }
    report.index.push_back({e.path, tensor_name(e.path), manifest.label_id(e.label)});
  }

  std::ofstream index(out_dir / "index.tsv", std::ios::trunc);
  for (const auto& r : report.index) index << r.path << '\t' << r.tensor_file << '\t' << r.label_id << '\n';
  index.close();
  save_manifest(manifest, out_dir);

  // Normalization statistics over the cached training split.
  std::map<std::string, Split> split_of;
  for (const auto& e : manifest.entries) split_of[e.path] = e.split;
  std::vector<FeatureTensor> train;
  for (const auto& r : report.index)
    if (split_of[r.path] == Split::kTrain) train.push_back(tensor_read(out_dir / r.tensor_file));
  if (!train.empty()) tensor_write(out_dir / "norm.sapp", fit_norm(train).to_tensor());
  return report;
}

std::vector<CacheIndexEntry> read_cache_index(const fs::path& index_file) {
  std::ifstream in(index_file);
  if (!in) throw std::runtime_error(fmt::format("cannot open cache index {}", index_file.string()));
  std::vector<CacheIndexEntry> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto a = line.find('\t');
    const auto b = a == std::string::npos ? a : line.find('\t', a + 1);
    if (b == std::string::npos || line.find('\t', b + 1) != std::string::npos) {
      throw FormatError(fmt::format("{}:{}: expected 3 tab-separated fields", index_file.string(), lineno));
    }
    CacheIndexEntry e{line.substr(0, a), line.substr(a + 1, b - a - 1), 0};
    try {
      e.label_id = std::stoi(line.substr(b + 1));
    } catch (const std::exception&) {
      throw FormatError(fmt::format("{}:{}: bad label id", index_file.string(), lineno));
    }
    out.push_back(std::move(e));
  }
  return out;
}

CachedDataset load_cached_dataset(const fs::path& cache_dir) {
  if (!fs::exists(cache_dir / "index.tsv")) {
    throw std::runtime_error(fmt::format(
        "no feature cache at {} (run the extract command first)", cache_dir.string()));
  }
  const DatasetManifest m = load_manifest(cache_dir / "train.tsv", cache_dir / "test.tsv");
  std::map<std::string, Split> split_of;
  for (const auto& e : m.entries) split_of[e.path] = e.split;

  CachedDataset ds;
  ds.vocabulary = m.vocabulary;
  ds.norm = NormStats::from_tensor(tensor_read(cache_dir / "norm.sapp"));
  for (const auto& r : read_cache_index(cache_dir / "index.tsv")) {
    auto it = split_of.find(r.path);
    if (it == split_of.end()) {
      throw ValidationError(fmt::format("cache entry {} missing from cached manifest", r.path));
    }
    LabeledSet& set = it->second == Split::kTrain ? ds.train : ds.test;
    set.features.push_back(apply_norm(tensor_read(cache_dir / r.tensor_file), ds.norm));
    set.labels.push_back(r.label_id);
  }
  return ds;
}

}  // namespace sapp
