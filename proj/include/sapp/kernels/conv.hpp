#pragma once

#include <cstddef>
#include <span>

#include "sapp/tensor.hpp"

namespace sapp::kernels {

/// Square-kernel 2-D convolution over (frames, bins) without bias.
/// Weights are laid out [out][in][k][k].
struct ConvGeometry {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  int kernel = 3;
  int stride = 1;
  int pad = 1;

  std::size_t out_extent(std::size_t in) const {
    const auto padded = static_cast<std::ptrdiff_t>(in) + 2 * pad - kernel;
    return padded < 0 ? 0 : static_cast<std::size_t>(padded / stride + 1);
  }
  Shape out_shape(const Shape& in) const {
    return Shape{out_channels, out_extent(in.frames), out_extent(in.bins)};
  }
  std::size_t weight_count() const {
    return out_channels * in_channels * static_cast<std::size_t>(kernel * kernel);
  }
};

// Every output element is produced by exactly one thread with a fixed
// summation order, so results do not depend on the thread count.

Batch<double> conv2d_forward(const Batch<double>& in, std::span<const double> weights,
                             const ConvGeometry& g);

Batch<double> conv2d_backward_input(const Batch<double>& grad_out, std::span<const double> weights,
                                    const ConvGeometry& g, const Shape& in_shape);

/// Adds dL/dW into grad_weights.
void conv2d_backward_weight(const Batch<double>& grad_out, const Batch<double>& in,
                            const ConvGeometry& g, std::span<double> grad_weights);

}  // namespace sapp::kernels
