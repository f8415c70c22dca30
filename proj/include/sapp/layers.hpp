#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sapp/kernels/conv.hpp"
#include "sapp/rng.hpp"
#include "sapp/tensor.hpp"

namespace sapp {

/// A named parameter (or, with trainable == false, a state buffer such as
/// BN running statistics). stage is the hook layer that precedes it.
struct Parameter {
  std::string name;
  std::vector<std::size_t> dims;
  std::vector<double> value;
  std::vector<double> grad;
  int stage = 0;
  bool trainable = true;

  Parameter() = default;
  Parameter(std::string n, std::vector<std::size_t> d, int stage_id, bool train = true);
  std::size_t size() const { return value.size(); }
};

enum class Mode { kTrain, kEval };

class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(std::string name, kernels::ConvGeometry g, int stage);

  void init_he(SeededRng& rng);
  Batch<double> forward(const Batch<double>& x);
  Batch<double> backward(const Batch<double>& grad_out);

  const kernels::ConvGeometry& geometry() const { return geom_; }
  void collect(std::vector<Parameter*>& out) { out.push_back(&weight_); }

 private:
  kernels::ConvGeometry geom_;
  Parameter weight_;
  Batch<double> input_;
};

/// Per-channel batch normalization over (batch, frames, bins).
class BatchNorm2d {
 public:
  BatchNorm2d() = default;
  BatchNorm2d(std::string name, std::size_t channels, int stage, double eps, double momentum);

  Batch<double> forward(const Batch<double>& x, Mode mode);
  Batch<double> backward(const Batch<double>& grad_out);
  void collect(std::vector<Parameter*>& out);

 private:
  double eps_ = 1e-5;
  double momentum_ = 0.1;
  Parameter gamma_, beta_, running_mean_, running_var_;
  Batch<double> xhat_;
  std::vector<double> inv_std_;
  Mode mode_ = Mode::kTrain;
};

class ReLU {
 public:
  Batch<double> forward(const Batch<double>& x);
  Batch<double> backward(const Batch<double>& grad_out) const;
  /// Folds the on/off pattern of the last forward into h.
  void pattern(std::uint64_t& h) const;

 private:
  Batch<double> output_;
};

/// 2x2 max pooling with stride 2; odd trailing rows/columns are dropped.
class MaxPool2 {
 public:
  Batch<double> forward(const Batch<double>& x);
  Batch<double> backward(const Batch<double>& grad_out) const;
  /// Folds the winning indices of the last forward into h.
  void pattern(std::uint64_t& h) const;

 private:
  std::vector<Shape> in_shapes_;
  std::vector<std::vector<std::size_t>> argmax_;
};

/// conv(k1) -> BN -> ReLU -> conv(k2) -> BN, plus an identity shortcut (or a
/// 1x1 conv + BN projection when the channel count changes), then ReLU and
/// optional 2x2 max pooling.
class ResidualBlock {
 public:
  ResidualBlock() = default;
  ResidualBlock(const std::string& name, std::size_t in_channels, std::size_t out_channels, int k1,
                int k2, bool pool, int stage, double bn_eps, double bn_momentum);

  void init(SeededRng& rng);
  Batch<double> forward(const Batch<double>& x, Mode mode);
  Batch<double> backward(const Batch<double>& grad_out);
  void collect(std::vector<Parameter*>& out);
  void pattern(std::uint64_t& h) const;

 private:
  Conv2d conv1_, conv2_;
  BatchNorm2d bn1_, bn2_;
  ReLU relu1_, relu_out_;
  std::optional<Conv2d> proj_;
  std::optional<BatchNorm2d> proj_bn_;
  std::optional<MaxPool2> pool_;
};

/// Global average pooling over (frames, bins) followed by a dense layer.
class Classifier {
 public:
  Classifier() = default;
  Classifier(std::size_t in_channels, std::size_t classes, int stage);

  void init(SeededRng& rng);
  /// Returns B x classes logits.
  std::vector<std::vector<double>> forward(const Batch<double>& x);
  Batch<double> backward(const std::vector<std::vector<double>>& grad_logits);
  void collect(std::vector<Parameter*>& out);

  Parameter& weight() { return weight_; }
  Parameter& bias() { return bias_; }

 private:
  std::size_t in_channels_ = 0, classes_ = 0;
  Parameter weight_, bias_;
  std::vector<Shape> in_shapes_;
  std::vector<std::vector<double>> pooled_;
};

}  // namespace sapp
