#include "sapp/run_config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "sapp/error.hpp"

namespace sapp {

namespace {

std::string trim(std::string_view s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string_view::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return std::string(s.substr(a, b - a + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const char* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (v.empty() || ec != std::errc() || ptr != end) {
    throw ConfigError(fmt::format("{}: '{}' is not a valid number", key, v));
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(fmt::format("{}: '{}' is not a boolean", key, v));
}

template <typename T>
std::optional<T> parse_optional(const std::string& key, const std::string& v) {
  if (v.empty()) return std::nullopt;
  return parse_number<T>(key, v);
}

template <typename T>
std::string show(const std::optional<T>& v) {
  return v ? fmt::format("{}", *v) : std::string();
}

std::vector<int> parse_layers(const std::string& key, const std::string& v) {
  try {
    return parse_layer_set(v);
  } catch (const std::exception& ex) {
    throw ConfigError(fmt::format("{}: {}", key, ex.what()));
  }
}

Scheme parse_scheme_key(const std::string& key, const std::string& v) {
  try {
    return parse_scheme(v);
  } catch (const std::exception& ex) {
    throw ConfigError(fmt::format("{}: {}", key, ex.what()));
  }
}

struct Entry {
  std::string key;
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define SAPP_NUM(KEY, FIELD, T)                                                                   \
  Entry {                                                                                         \
    KEY, [](RunConfig& c, const std::string& k, const std::string& v) { c.FIELD = parse_number<T>(k, v); }, \
        [](const RunConfig& c) { return fmt::format("{}", c.FIELD); }                            \
  }
#define SAPP_PATH(KEY, FIELD)                                                                       \
  Entry {                                                                                           \
    KEY, [](RunConfig& c, const std::string&, const std::string& v) { c.FIELD = v; },               \
        [](const RunConfig& c) { return c.FIELD.string(); }                                        \
  }
#define SAPP_OPT_PATH(KEY, FIELD)                                                                   \
  Entry {                                                                                           \
    KEY,                                                                                            \
        [](RunConfig& c, const std::string&, const std::string& v) {                                \
          c.FIELD = v.empty() ? std::nullopt : std::optional<std::filesystem::path>(v);             \
        },                                                                                          \
        [](const RunConfig& c) { return c.FIELD ? c.FIELD->string() : std::string(); }              \
  }
#define SAPP_OPT_NUM(KEY, FIELD, T)                                                                 \
  Entry {                                                                                           \
    KEY, [](RunConfig& c, const std::string& k, const std::string& v) { c.FIELD = parse_optional<T>(k, v); }, \
        [](const RunConfig& c) { return show(c.FIELD); }                                           \
  }

const std::vector<Entry>& table() {
  static const std::vector<Entry> entries = {
      SAPP_NUM("seed", seed, std::uint64_t),
      SAPP_OPT_PATH("paths.train_meta", paths.train_meta),
      SAPP_OPT_PATH("paths.test_meta", paths.test_meta),
      SAPP_PATH("paths.audio_root", paths.audio_root),
      SAPP_PATH("paths.cache_dir", paths.cache_dir),
      SAPP_PATH("paths.out_dir", paths.out_dir),
      SAPP_NUM("features.sample_rate", features.sample_rate, double),
      SAPP_NUM("features.window", features.window, std::size_t),
      SAPP_NUM("features.hop", features.hop, std::size_t),
      SAPP_NUM("features.mel_bins", features.mel_bins, std::size_t),
      SAPP_NUM("features.fmin", features.fmin, double),
      SAPP_NUM("features.fmax", features.fmax, double),
      SAPP_NUM("features.log_floor", features.log_floor, double),
      Entry{"features.perceptual_weighting",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              c.features.perceptual_weighting = parse_bool(k, v);
            },
            [](const RunConfig& c) { return std::string(c.features.perceptual_weighting ? "true" : "false"); }},
      Entry{"policy.scheme",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              c.trainer.policy.scheme = parse_scheme_key(k, v);
            },
            [](const RunConfig& c) { return std::string(scheme_name(c.trainer.policy.scheme)); }},
      Entry{"policy.layers",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              c.trainer.policy.layer_set = parse_layers(k, v);
            },
            [](const RunConfig& c) { return format_layer_set(c.trainer.policy.layer_set); }},
      SAPP_NUM("policy.time_ratio", trainer.policy.time_ratio, double),
      SAPP_NUM("policy.freq_ratio", trainer.policy.freq_ratio, double),
      SAPP_OPT_NUM("policy.t_max", t_max, std::size_t),
      SAPP_OPT_NUM("policy.f_max", f_max, std::size_t),
      Entry{"model.preset",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              if (v != "toy" && v != "full") throw ConfigError(fmt::format("{}: unknown preset '{}' (toy, full)", k, v));
              c.preset = v;
            },
            [](const RunConfig& c) { return c.preset; }},
      SAPP_NUM("trainer.epochs", trainer.epochs, std::size_t),
      SAPP_NUM("trainer.lr_init", trainer.lr_init, double),
      SAPP_NUM("trainer.lr_floor", trainer.lr_floor, double),
      SAPP_OPT_NUM("trainer.decay_start", trainer.decay_start, std::size_t),
      SAPP_OPT_NUM("trainer.decay_end", trainer.decay_end, std::size_t),
      SAPP_NUM("trainer.batch_size", trainer.batch_size, std::size_t),
      Entry{"trainer.seeds",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              c.trainer.seeds.clear();
              c.seeds_given = !v.empty();
              if (v.empty()) return;
              for (const auto& s : split(v, ',')) c.trainer.seeds.push_back(parse_number<std::uint64_t>(k, s));
            },
            [](const RunConfig& c) {
              return c.seeds_given ? fmt::format("{}", fmt::join(c.trainer.seeds, ",")) : std::string();
            }},
      SAPP_NUM("trainer.weight_decay", trainer.weight_decay, double),
      SAPP_NUM("trainer.grad_clip", trainer.grad_clip, double),
      Entry{"ablate.grid",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              if (v == "layers") c.ablate.grid = AblationGrid::kLayers;
              else if (v == "time_ratio") c.ablate.grid = AblationGrid::kTimeRatio;
              else if (v == "freq_ratio") c.ablate.grid = AblationGrid::kFreqRatio;
              else throw ConfigError(fmt::format("{}: unknown grid '{}' (layers, time_ratio, freq_ratio)", k, v));
            },
            [](const RunConfig& c) { return std::string(grid_name(c.ablate.grid)); }},
      Entry{"ablate.layer_sets",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              c.ablate.layer_sets.clear();
              for (const auto& s : split(v, ';')) c.ablate.layer_sets.push_back(parse_layers(k, s));
            },
            [](const RunConfig& c) {
              std::vector<std::string> parts;
              for (const auto& ls : c.ablate.layer_sets) parts.push_back(format_layer_set(ls));
              return fmt::format("{}", fmt::join(parts, ";"));
            }},
      Entry{"ablate.ratios",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              c.ablate.ratios.clear();
              for (const auto& s : split(v, ',')) c.ablate.ratios.push_back(parse_number<double>(k, s));
            },
            [](const RunConfig& c) { return fmt::format("{}", fmt::join(c.ablate.ratios, ",")); }},
      Entry{"ablate.schemes",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              c.ablate.schemes.clear();
              for (const auto& s : split(v, ',')) c.ablate.schemes.push_back(parse_scheme_key(k, s));
            },
            [](const RunConfig& c) {
              std::vector<std::string_view> names;
              for (Scheme s : c.ablate.schemes) names.push_back(scheme_name(s));
              return fmt::format("{}", fmt::join(names, ","));
            }},
      SAPP_NUM("synth.classes", synth.classes, std::size_t),
      SAPP_NUM("synth.clips_per_class", synth.clips_per_class, std::size_t),
      SAPP_NUM("synth.clip_seconds", synth.clip_seconds, double),
      SAPP_NUM("synth.sample_rate", synth.sample_rate, double),
      SAPP_NUM("synth.test_fraction", synth.test_fraction, double),
      SAPP_NUM("synth.background_level", synth.background_level, double),
      Entry{"synth.bands",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              c.synth.bands.clear();
              if (v.empty()) return;
              for (const auto& b : split(v, ';')) {
                const auto parts = split(b, ':');
                if (parts.size() != 2) throw ConfigError(fmt::format("{}: band '{}' is not center:bandwidth", k, b));
                c.synth.bands.push_back({parse_number<double>(k, parts[0]), parse_number<double>(k, parts[1])});
              }
            },
            [](const RunConfig& c) {
              std::vector<std::string> parts;
              for (const auto& b : c.synth.bands) parts.push_back(fmt::format("{}:{}", b.center_hz, b.bandwidth_hz));
              return fmt::format("{}", fmt::join(parts, ";"));
            }},
  };
  return entries;
}

#undef SAPP_NUM
#undef SAPP_PATH
#undef SAPP_OPT_PATH
#undef SAPP_OPT_NUM

}  // namespace

std::string_view grid_name(AblationGrid g) {
  switch (g) {
    case AblationGrid::kLayers: return "layers";
    case AblationGrid::kTimeRatio: return "time_ratio";
    case AblationGrid::kFreqRatio: return "freq_ratio";
  }
  return "?";
}

std::vector<std::string> RunConfig::keys() {
  std::vector<std::string> out;
  for (const auto& e : table()) out.push_back(e.key);
  return out;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  for (const auto& e : table()) {
    if (e.key == key) {
      e.set(*this, key, trim(value));
      return;
    }
  }
  throw ConfigError(fmt::format("unknown config key '{}'", key));
}

void RunConfig::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ConfigError(fmt::format("override '{}' is not of the form section.key=value", assignment));
  }
  set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t = trainer;
  if (!seeds_given) t.seeds = {seed, seed + 1, seed + 2};
  t.policy.absolute_params.reset();
  if (t_max && f_max) t.policy.absolute_params = MaskParams{*t_max, *f_max};
  return t;
}

void RunConfig::validate() const {
  if (t_max.has_value() != f_max.has_value()) {
    throw ConfigError("policy.t_max and policy.f_max must be given together");
  }
  try {
    features.validate();
  } catch (const std::invalid_argument& ex) {
    throw ConfigError(fmt::format("features: {}", ex.what()));
  }
  train_config().validate();
}

std::string RunConfig::dump() const {
  std::string out;
  std::string section;
  for (const auto& e : table()) {
    const auto dot = e.key.find('.');
    const std::string sec = dot == std::string::npos ? "" : e.key.substr(0, dot);
    const std::string name = dot == std::string::npos ? e.key : e.key.substr(dot + 1);
    if (sec != section) {
      out += fmt::format("\n[{}]\n", sec);
      section = sec;
    }
    out += fmt::format("{} = {}\n", name, e.get(*this));
  }
  return out;
}

RunConfig RunConfig::parse(std::istream& in, const std::string& source) {
  RunConfig cfg;
  std::string line, section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    if (t.front() == '[') {
      if (t.back() != ']') throw ConfigError(fmt::format("{}:{}: unterminated section header", source, lineno));
      section = trim(std::string_view(t).substr(1, t.size() - 2));
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(fmt::format("{}:{}: expected 'key = value'", source, lineno));
    }
    const std::string name = trim(std::string_view(t).substr(0, eq));
    const std::string key = section.empty() ? name : section + "." + name;
    try {
      cfg.set(key, t.substr(eq + 1));
    } catch (const ConfigError& ex) {
      throw ConfigError(fmt::format("{}:{}: {}", source, lineno, ex.what()));
    }
  }
  return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open config file {}", path.string()));
  return parse(in, path.string());
}

}  // namespace sapp
