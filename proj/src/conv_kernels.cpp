#include "sapp/kernels/conv.hpp"

#include <algorithm>
#include <stdexcept>

namespace sapp::kernels {

namespace {

// Output columns x whose input column x*stride + offset lies in [0, extent).
struct Range {
  std::ptrdiff_t lo;
  std::ptrdiff_t hi;  // exclusive
};

Range valid_range(std::ptrdiff_t offset, int stride, std::size_t extent, std::size_t out_extent) {
  std::ptrdiff_t lo = 0;
  if (offset < 0) lo = (-offset + stride - 1) / stride;
  const auto last_in = static_cast<std::ptrdiff_t>(extent) - 1 - offset;
  std::ptrdiff_t hi = last_in < 0 ? 0 : last_in / stride + 1;
  hi = std::min<std::ptrdiff_t>(hi, static_cast<std::ptrdiff_t>(out_extent));
  return {lo, std::max(lo, hi)};
}

void check_input(const Batch<double>& in, const ConvGeometry& g) {
  for (const auto& x : in) {
    if (x.channels() != g.in_channels) {
      throw std::invalid_argument(fmt::format("conv expects {} input channels, got {}",
                                              g.in_channels, x.channels()));
    }
  }
}

}  // namespace

Batch<double> conv2d_forward(const Batch<double>& in, std::span<const double> weights,
                             const ConvGeometry& g) {
  check_input(in, g);
  Batch<double> out;
  out.reserve(in.size());
  for (const auto& x : in) out.emplace_back(g.out_shape(x.shape()));
  const int k = g.kernel;
  const auto jobs = static_cast<std::ptrdiff_t>(in.size() * g.out_channels);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t job = 0; job < jobs; ++job) {
    const std::size_t b = static_cast<std::size_t>(job) / g.out_channels;
    const std::size_t o = static_cast<std::size_t>(job) % g.out_channels;
    const Tensor64& x = in[b];
    Tensor64& y = out[b];
    const std::size_t H = x.frames(), W = x.bins(), Ho = y.frames(), Wo = y.bins();
    auto dst = y.channel(o);
    for (std::size_t i = 0; i < g.in_channels; ++i) {
      auto src = x.channel(i);
      for (int kh = 0; kh < k; ++kh) {
        const Range rows = valid_range(kh - g.pad, g.stride, H, Ho);
        for (int kw = 0; kw < k; ++kw) {
          const double w = weights[((o * g.in_channels + i) * k + kh) * k + kw];
          const Range cols = valid_range(kw - g.pad, g.stride, W, Wo);
          for (std::ptrdiff_t r = rows.lo; r < rows.hi; ++r) {
            const double* srow = src.data() + (r * g.stride + kh - g.pad) * static_cast<std::ptrdiff_t>(W);
            double* drow = dst.data() + r * static_cast<std::ptrdiff_t>(Wo);
            if (g.stride == 1) {
              const double* s = srow + (kw - g.pad);
              for (std::ptrdiff_t c = cols.lo; c < cols.hi; ++c) drow[c] += w * s[c];
            } else {
              for (std::ptrdiff_t c = cols.lo; c < cols.hi; ++c)
                drow[c] += w * srow[c * g.stride + kw - g.pad];
            }
          }
        }
      }
    }
  }
  return out;
}

Batch<double> conv2d_backward_input(const Batch<double>& grad_out, std::span<const double> weights,
                                    const ConvGeometry& g, const Shape& in_shape) {
  Batch<double> grad_in;
  grad_in.reserve(grad_out.size());
  for (std::size_t b = 0; b < grad_out.size(); ++b) grad_in.emplace_back(in_shape);
  const int k = g.kernel;
  const auto jobs = static_cast<std::ptrdiff_t>(grad_out.size() * g.in_channels);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t job = 0; job < jobs; ++job) {
    const std::size_t b = static_cast<std::size_t>(job) / g.in_channels;
    const std::size_t i = static_cast<std::size_t>(job) % g.in_channels;
    const Tensor64& gy = grad_out[b];
    const std::size_t H = in_shape.frames, W = in_shape.bins, Ho = gy.frames(), Wo = gy.bins();
    auto dst = grad_in[b].channel(i);
    for (std::size_t o = 0; o < g.out_channels; ++o) {
      auto src = gy.channel(o);
      for (int kh = 0; kh < k; ++kh) {
        const Range rows = valid_range(kh - g.pad, g.stride, H, Ho);
        for (int kw = 0; kw < k; ++kw) {
          const double w = weights[((o * g.in_channels + i) * k + kh) * k + kw];
          const Range cols = valid_range(kw - g.pad, g.stride, W, Wo);
          for (std::ptrdiff_t r = rows.lo; r < rows.hi; ++r) {
            double* drow = dst.data() + (r * g.stride + kh - g.pad) * static_cast<std::ptrdiff_t>(W);
            const double* srow = src.data() + r * static_cast<std::ptrdiff_t>(Wo);
            if (g.stride == 1) {
              double* d = drow + (kw - g.pad);
              for (std::ptrdiff_t c = cols.lo; c < cols.hi; ++c) d[c] += w * srow[c];
            } else {
              for (std::ptrdiff_t c = cols.lo; c < cols.hi; ++c)
                drow[c * g.stride + kw - g.pad] += w * srow[c];
            }
          }
        }
      }
    }
  }
  return grad_in;
}

void conv2d_backward_weight(const Batch<double>& grad_out, const Batch<double>& in,
                            const ConvGeometry& g, std::span<double> grad_weights) {
  if (grad_weights.size() != g.weight_count()) {
    throw std::invalid_argument("conv2d_backward_weight: gradient buffer size mismatch");
  }
  const int k = g.kernel;
  const auto jobs = static_cast<std::ptrdiff_t>(g.out_channels * g.in_channels);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t job = 0; job < jobs; ++job) {
    const std::size_t o = static_cast<std::size_t>(job) / g.in_channels;
    const std::size_t i = static_cast<std::size_t>(job) % g.in_channels;
    for (int kh = 0; kh < k; ++kh) {
      for (int kw = 0; kw < k; ++kw) {
        double acc = 0.0;
        for (std::size_t b = 0; b < in.size(); ++b) {
          const Tensor64& x = in[b];
          const Tensor64& gy = grad_out[b];
          const std::size_t H = x.frames(), W = x.bins(), Ho = gy.frames(), Wo = gy.bins();
          const Range rows = valid_range(kh - g.pad, g.stride, H, Ho);
          const Range cols = valid_range(kw - g.pad, g.stride, W, Wo);
          auto src = x.channel(i);
          auto gsrc = gy.channel(o);
          for (std::ptrdiff_t r = rows.lo; r < rows.hi; ++r) {
            const double* xrow = src.data() + (r * g.stride + kh - g.pad) * static_cast<std::ptrdiff_t>(W);
            const double* grow = gsrc.data() + r * static_cast<std::ptrdiff_t>(Wo);
            for (std::ptrdiff_t c = cols.lo; c < cols.hi; ++c)
              acc += grow[c] * xrow[c * g.stride + kw - g.pad];
          }
        }
        grad_weights[((o * g.in_channels + i) * k + kh) * k + kw] += acc;
      }
    }
  }
}

}  // namespace sapp::kernels
