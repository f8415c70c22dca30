#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "sapp/augment_policy.hpp"
#include "sapp/data.hpp"
#include "sapp/model.hpp"

namespace sapp {

struct TrainConfig {
  std::size_t epochs = 30;
  double lr_init = 1e-4;
  double lr_floor = 5e-6;
  /// Unset breakpoints scale (50, 250) of a 350-epoch budget to `epochs`.
  std::optional<std::size_t> decay_start;
  std::optional<std::size_t> decay_end;
  std::size_t batch_size = 32;
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  /// L2 penalty added to the gradient; 0 disables.
  double weight_decay = 0.0;
  /// Global gradient-norm clip; 0 disables.
  double grad_clip = 0.0;
  AugmentPolicy policy;

  /// 350 epochs with decay from 50 to 250.
  static TrainConfig full_schedule();

  std::size_t resolved_decay_start() const;
  std::size_t resolved_decay_end() const;
  /// Throws ConfigError on a broken schedule, batch size or seed list.
  void validate() const;
};

/// lr_init before decay_start, linear down to lr_floor at decay_end, then
/// lr_floor. Throws std::invalid_argument outside [0, epochs).
double lr_at(std::size_t epoch, const TrainConfig& cfg);

struct EpochRecord {
  std::uint64_t seed = 0;
  std::size_t epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
};

struct SeedResult {
  std::uint64_t seed = 0;
  double test_accuracy = 0.0;
  double final_loss = 0.0;
};

struct RunReport {
  std::vector<EpochRecord> curves;
  std::vector<SeedResult> seeds;
  double mean = 0.0;
  /// Sample standard deviation over seeds (0 for a single seed).
  double stddev = 0.0;
};

/// Adam over the trainable parameters of a model. Moment buffers are
/// created on construction and follow the parameter order.
class Adam {
 public:
  explicit Adam(std::vector<Parameter*> params, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8);
  void step(double lr, double weight_decay = 0.0, double grad_clip = 0.0);
  std::size_t steps() const { return t_; }

 private:
  std::vector<Parameter*> params_;
  std::vector<std::vector<double>> m_, v_;
  double beta1_, beta2_, eps_;
  std::size_t t_ = 0;
};

Batch<double> to_batch(const LabeledSet& set, std::span<const std::size_t> indices);

/// Argmax accuracy in eval mode with no hooks. Throws std::invalid_argument
/// on an empty set.
double evaluate(ModelGraph& model, const LabeledSet& set, std::size_t batch_size = 64);

struct SeedRun {
  ModelGraph model;
  std::vector<EpochRecord> curve;
  SeedResult result;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// One full training run. Every random draw is keyed by (seed, epoch, batch).
SeedRun train_seed(const ModelConfig& model_cfg, const LabeledSet& train, const LabeledSet& test,
                   const TrainConfig& cfg, std::uint64_t seed, const EpochCallback& on_epoch = {});

/// Runs every configured seed and aggregates. on_model sees each trained
/// model (e.g. to checkpoint it).
RunReport train(const ModelConfig& model_cfg, const LabeledSet& train, const LabeledSet& test,
                const TrainConfig& cfg, const EpochCallback& on_epoch = {},
                const std::function<void(std::uint64_t, ModelGraph&)>& on_model = {});

/// Mean and sample standard deviation.
std::pair<double, double> mean_std(std::span<const double> values);

}  // namespace sapp
