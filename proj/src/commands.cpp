#include "sapp/commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "sapp/checkpoint.hpp"
#include "sapp/error.hpp"
#include "sapp/tensor_io.hpp"

namespace sapp {

namespace fs = std::filesystem;

void write_resolved_config(const RunConfig& cfg, const fs::path& dir) {
  fs::create_directories(dir);
  std::ofstream(dir / "resolved_config.txt", std::ios::trunc) << cfg.dump();
}

DatasetManifest cmd_synth(const RunConfig& cfg, const fs::path& out_dir, std::ostream& log) {
  SyntheticSpec spec = cfg.synth;
  spec.seed = cfg.seed;
  try {
    spec.validate();
  } catch (const std::invalid_argument& ex) {
    throw UsageError(ex.what());
  }
  auto m = synth_dataset(spec, out_dir);
  write_resolved_config(cfg, out_dir);
  fmt::print(log, "{} clips ({} train, {} test) in {}\n", m.entries.size(), m.count(Split::kTrain),
             m.count(Split::kTest), out_dir.string());
  return m;
}

CacheReport cmd_extract(const RunConfig& cfg, std::ostream& log) {
  if (!cfg.paths.train_meta) throw UsageError("paths.train_meta is not set (pass --train-meta)");
  for (const auto& p : {cfg.paths.train_meta, cfg.paths.test_meta}) {
    if (p && !fs::exists(*p)) throw UsageError(fmt::format("manifest {} does not exist", p->string()));
  }
  const DatasetManifest m = load_manifest(*cfg.paths.train_meta, cfg.paths.test_meta);
  CacheReport report = cache_features(m, cfg.features, cfg.paths.audio_root, cfg.paths.cache_dir);
  write_resolved_config(cfg, cfg.paths.cache_dir);
  fmt::print(log, "{} written, {} skipped, {} failed\n", report.written, report.skipped, report.errors.size());
  for (const auto& [path, msg] : report.errors) fmt::print(log, "  {}: {}\n", path, msg);
  return report;
}

MaskSpec cmd_augment(const RunConfig& cfg, const AugmentArgs& args) {
  const FeatureTensor x = tensor_read(args.input);
  const Shape shape = x.shape();
  std::optional<FeatureTensor> partner;
  if (args.partner) partner = tensor_read(*args.partner);
  if (args.scheme == Scheme::kMixture || args.scheme == Scheme::kCut) {
    if (!partner) throw UsageError(fmt::format("{} needs --partner", scheme_name(args.scheme)));
    if (!(partner->shape() == shape)) {
      throw UsageError(fmt::format("partner shape {} differs from input shape {}", to_string(partner->shape()),
                                   to_string(shape)));
    }
  }

  MaskSpec spec;
  if (args.spec) {
    spec = *args.spec;
    try {
      validate_mask(spec, shape.frames, shape.bins);
    } catch (const std::invalid_argument& ex) {
      throw UsageError(ex.what());
    }
  } else {
    const MaskParams params = cfg.t_max && cfg.f_max
                                  ? MaskParams{*cfg.t_max, *cfg.f_max}
                                  : resolve_params(cfg.trainer.policy.time_ratio, cfg.trainer.policy.freq_ratio,
                                                   shape.frames, shape.bins);
    SeededRng rng(cfg.seed, stream_id(0, 0, StreamPurpose::kCli));
    try {
      spec = sample_mask(shape.frames, shape.bins, params, rng);
    } catch (const std::invalid_argument& ex) {
      throw UsageError(ex.what());
    }
  }
  tensor_write(args.output, apply_scheme(args.scheme, x, partner ? &*partner : nullptr, spec));
  return spec;
}

std::vector<std::uint8_t> render_gray(const FeatureTensor& x, std::size_t channel) {
  const Shape s = x.shape();
  if (channel >= s.channels) {
    throw UsageError(fmt::format("channel {} out of range for {} channel(s)", channel, s.channels));
  }
  const auto plane = x.channel(channel);
  double lo = plane[0], hi = plane[0];
  for (float v : plane) {
    if (!std::isfinite(v)) throw FormatError("tensor contains non-finite values");
    lo = std::min<double>(lo, v);
    hi = std::max<double>(hi, v);
  }
  std::vector<std::uint8_t> px(s.frames * s.bins);
  for (std::size_t row = 0; row < s.bins; ++row) {
    const std::size_t f = s.bins - 1 - row;
    for (std::size_t t = 0; t < s.frames; ++t) {
      const double v = plane[t * s.bins + f];
      px[row * s.frames + t] =
          hi > lo ? static_cast<std::uint8_t>(std::lround((v - lo) / (hi - lo) * 255.0)) : std::uint8_t{128};
    }
  }
  return px;
}

void cmd_visualize(const fs::path& input, const fs::path& output, std::optional<std::size_t> channel) {
  const FeatureTensor x = tensor_read(input);
  if (!channel && x.shape().channels > 1) {
    throw UsageError(fmt::format("tensor has {} channels; pick one with --channel", x.shape().channels));
  }
  const auto px = render_gray(x, channel.value_or(0));
  std::ofstream out(output, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(fmt::format("cannot write {}", output.string()));
  out << fmt::format("P5\n{} {}\n255\n", x.shape().frames, x.shape().bins);
  out.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size()));
}

namespace {

CachedDataset load_for_training(const RunConfig& cfg) {
  if (!fs::exists(cfg.paths.cache_dir / "index.tsv")) {
    throw UsageError(fmt::format("no feature cache in {}; run 'sapp extract' first",
                                 cfg.paths.cache_dir.string()));
  }
  return load_cached_dataset(cfg.paths.cache_dir);
}

void epoch_logger(std::ostream& log, const TrainConfig& t, const EpochRecord& r) {
  fmt::print(log, "seed {} epoch {}/{} lr {:.3g} loss {:.4f} train_acc {:.3f} test_acc {:.3f}\n", r.seed,
             r.epoch + 1, t.epochs, r.lr, r.train_loss, r.train_accuracy, r.test_accuracy);
}

RunReport run_training(const RunConfig& cfg, const TrainConfig& t, const CachedDataset& ds, std::ostream& log,
                       const std::function<void(std::uint64_t, ModelGraph&)>& on_model = {}) {
  const ModelConfig mc = ModelConfig::preset(cfg.preset, ds.vocabulary.size());
  return train(mc, ds.train, ds.test, t, [&](const EpochRecord& r) { epoch_logger(log, t, r); }, on_model);
}

}  // namespace

RunReport cmd_train(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  const CachedDataset ds = load_for_training(cfg);
  const TrainConfig t = cfg.train_config();
  const fs::path out = cfg.paths.out_dir;
  write_resolved_config(cfg, out);

  const RunReport report = run_training(cfg, t, ds, log, [&](std::uint64_t seed, ModelGraph& model) {
    save_checkpoint(model, out / "checkpoints" / fmt::format("seed_{}", seed));
  });

  std::ofstream curves(out / "curves.csv", std::ios::trunc);
  curves << "seed,epoch,lr,train_loss,train_acc,test_acc\n";
  for (const auto& r : report.curves) {
    fmt::print(curves, "{},{},{},{},{},{}\n", r.seed, r.epoch, r.lr, r.train_loss, r.train_accuracy,
               r.test_accuracy);
  }
  std::ofstream seeds(out / "seeds.csv", std::ios::trunc);
  seeds << "seed,test_acc,final_loss\n";
  for (const auto& s : report.seeds) fmt::print(seeds, "{},{},{}\n", s.seed, s.test_accuracy, s.final_loss);
  std::ofstream summary(out / "summary.csv", std::ios::trunc);
  fmt::print(summary, "mean,std\n{},{}\n", report.mean, report.stddev);
  fmt::print(log, "mean,std\n{},{}\n", report.mean, report.stddev);
  return report;
}

std::size_t ablation_cells(const RunConfig& cfg) {
  return cfg.ablate.grid == AblationGrid::kLayers ? cfg.ablate.layer_sets.size() : cfg.ablate.ratios.size();
}

std::string ablation_cell_name(const RunConfig& cfg, std::size_t cell) {
  if (cfg.ablate.grid == AblationGrid::kLayers) return format_layer_set(cfg.ablate.layer_sets.at(cell));
  return fmt::format("{}", cfg.ablate.ratios.at(cell));
}

AugmentPolicy ablation_policy(const RunConfig& cfg, std::size_t cell, Scheme scheme) {
  AugmentPolicy p = cfg.train_config().policy;
  p.scheme = scheme;
  switch (cfg.ablate.grid) {
    case AblationGrid::kLayers:
      p.layer_set = cfg.ablate.layer_sets.at(cell);
      break;
    case AblationGrid::kTimeRatio:
      p.time_ratio = cfg.ablate.ratios.at(cell);
      break;
    case AblationGrid::kFreqRatio:
      p.freq_ratio = cfg.ablate.ratios.at(cell);
      break;
  }
  if (p.layer_set.empty()) p.scheme = Scheme::kOff;
  if (p.scheme == Scheme::kOff) p.layer_set.clear();
  return p;
}

std::vector<AblationRow> cmd_ablate(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  if (cfg.ablate.grid != AblationGrid::kLayers && cfg.trainer.policy.layer_set.empty()) {
    throw UsageError("ratio grids need policy.layers to name the masked layers");
  }
  const CachedDataset ds = load_for_training(cfg);
  const fs::path out = cfg.paths.out_dir;
  write_resolved_config(cfg, out);

  std::map<std::string, std::pair<double, double>> memo;
  std::vector<AblationRow> rows;
  for (std::size_t cell = 0; cell < ablation_cells(cfg); ++cell) {
    for (Scheme scheme : cfg.ablate.schemes) {
      TrainConfig t = cfg.train_config();
      t.policy = ablation_policy(cfg, cell, scheme);
      const std::string key =
          fmt::format("{}|{}|{}|{}|{}", scheme_name(t.policy.scheme), format_layer_set(t.policy.layer_set),
                      t.policy.time_ratio, t.policy.freq_ratio,
                      t.policy.absolute_params ? fmt::format("{},{}", t.policy.absolute_params->t_max,
                                                             t.policy.absolute_params->f_max)
                                               : "");
      auto it = memo.find(key);
      if (it == memo.end()) {
        fmt::print(log, "cell {} = {} scheme {}\n", grid_name(cfg.ablate.grid), ablation_cell_name(cfg, cell),
                   scheme_name(t.policy.scheme));
        const RunReport r = run_training(cfg, t, ds, log);
        it = memo.emplace(key, std::make_pair(r.mean, r.stddev)).first;
      }
      rows.push_back({std::string(grid_name(cfg.ablate.grid)), ablation_cell_name(cfg, cell), scheme,
                      it->second.first, it->second.second});
    }
  }
  std::ofstream csv(out / "ablation.csv", std::ios::trunc);
  csv << "grid,cell,scheme,mean,std\n";
  for (const auto& r : rows) {
    fmt::print(csv, "{},{},{},{},{}\n", r.grid, r.cell, scheme_name(r.scheme), r.mean, r.stddev);
  }
  return rows;
}

}  // namespace sapp
