#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sapp/augment_policy.hpp"
#include "sapp/layers.hpp"
#include "sapp/rng.hpp"
#include "sapp/tensor.hpp"

namespace sapp {

/// One residual block row: kernel sizes of its two convolutions, output
/// channels and whether 2x2 max pooling follows it.
struct BlockSpec {
  int k1 = 3;
  int k2 = 3;
  std::size_t channels = 0;
  bool pool = false;
};

inline constexpr std::size_t kNumBlocks = 12;

struct ModelConfig {
  std::size_t in_channels = 1;
  std::size_t stem_channels = 64;
  int stem_kernel = 5;
  int stem_stride = 2;
  std::vector<BlockSpec> blocks;
  std::size_t num_classes = 10;
  double bn_eps = 1e-5;
  double bn_momentum = 0.1;

  /// CP-ResNet widths: 64-channel stem, stages of 128 / 256 / 512 channels.
  static ModelConfig full(std::size_t classes = 10);
  /// Same topology at 8-channel stem and 8 / 16 / 32 channel stages.
  static ModelConfig toy(std::size_t classes = 10);
  static ModelConfig preset(std::string_view name, std::size_t classes);

  /// Throws ConfigError on a malformed block table.
  void validate() const;
};

using Logits = std::vector<std::vector<double>>;

/// Intercepts the batch at a hook layer. forward's result replaces the
/// activations; backward maps the gradient w.r.t. the hook output to the
/// gradient w.r.t. its input and may be empty for inference-only hooks.
struct Hook {
  std::function<Batch<double>(const Batch<double>&)> forward;
  std::function<Batch<double>(const Batch<double>&)> backward;
};
using HookMap = std::map<int, Hook>;

/// Hook applying a fixed plan. When partners is set, partner content comes
/// from that snapshot instead of the live batch, which makes the hook affine
/// in its input (used for gradient checks).
Hook make_plan_hook(AugmentPlan plan, std::optional<Batch<double>> partners = std::nullopt);

/// Hook that draws a fresh plan from rng at the layer's runtime dims on
/// each forward call and replays it on backward.
Hook make_augment_hook(AugmentPolicy policy, int layer, SeededRng rng);

class ModelGraph {
 public:
  ModelGraph() = default;

  /// Builds and He-initializes the network.
  static ModelGraph build(const ModelConfig& cfg, SeededRng& rng);

  const ModelConfig& config() const { return cfg_; }

  /// Hook layers: 0 = input, 1 = before RB1, 2 = before RB5, 3 = before RB9,
  /// 4 = after RB12.
  Logits forward(const Batch<double>& input, Mode mode = Mode::kEval, const HookMap& hooks = {});

  void zero_grad();
  /// Accumulates parameter gradients for the most recent forward call.
  void backward(const Logits& grad_logits);

  std::vector<Parameter*> parameters();
  std::vector<Parameter*> trainable_parameters();
  std::size_t trainable_count();

  /// Hash of every ReLU on/off state and max-pool winner from the most recent
  /// forward. Equal hashes mean the same linear piece of the network.
  std::uint64_t activation_pattern() const;

  Classifier& classifier() { return head_; }

 private:
  Batch<double> run_hook(int layer, const Batch<double>& x, const HookMap& hooks);
  Batch<double> hook_backward(int layer, const Batch<double>& g);

  ModelConfig cfg_;
  Conv2d stem_;
  BatchNorm2d stem_bn_;
  ReLU stem_relu_;
  std::vector<ResidualBlock> blocks_;
  Classifier head_;
  std::map<int, Hook> applied_;
};

/// Block index after which each hidden hook layer sits (-1 for the stem).
int hook_after_block(int layer);

/// Mean cross-entropy over the batch; writes dL/dlogits when grad is set.
double cross_entropy(const Logits& logits, std::span<const int> labels, Logits* grad = nullptr);

std::vector<int> predict(const Logits& logits);

/// Trainable parameter count implied by the config (BN gamma/beta count,
/// running statistics do not).
std::size_t count_trainable_parameters(const ModelConfig& cfg);

/// Receptive field (in input frames/bins) of one output unit, along the
/// deepest path: rf += (k - 1) * jump, jump *= stride, per conv and pool.
int receptive_field(const ModelConfig& cfg);

/// Activation shape at a hook layer for a given single-sample input shape.
Shape hook_shape(const ModelConfig& cfg, const Shape& input, int layer);

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  /// Draws rejected because the +-epsilon evaluations changed the activation
  /// pattern (a ReLU or max-pool kink lies inside the stencil).
  std::size_t kinks_skipped = 0;
  std::string worst;
};

/// Relative error |a - n| / max(|a|, |n|, floor) between analytic and
/// central-difference gradients.
inline constexpr double kGradCheckFloor = 1e-6;

/// Compares analytic gradients (train mode) with central finite differences
/// on `samples` randomly chosen trainable scalars. Draws whose stencil
/// crosses a kink are redrawn (at most 10 * samples draws in total). Works on
/// a copy.
GradCheckResult grad_check(const ModelGraph& model, const Batch<double>& inputs,
                           std::span<const int> labels, const HookMap& hooks, double epsilon,
                           std::size_t samples, SeededRng& rng);

}  // namespace sapp
