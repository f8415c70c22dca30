#pragma once

// Direct-definition convolution used to check the parallel kernels.

#include <span>

#include "sapp/kernels/conv.hpp"

namespace sapp::reference {

inline Batch<double> conv2d_forward(const Batch<double>& in, std::span<const double> w,
                                    const kernels::ConvGeometry& g) {
  Batch<double> out;
  const int k = g.kernel;
  for (const auto& x : in) {
    Tensor64 y(g.out_shape(x.shape()));
    for (std::size_t o = 0; o < g.out_channels; ++o)
      for (std::size_t r = 0; r < y.frames(); ++r)
        for (std::size_t c = 0; c < y.bins(); ++c) {
          double acc = 0.0;
          for (std::size_t i = 0; i < g.in_channels; ++i)
            for (int kh = 0; kh < k; ++kh)
              for (int kw = 0; kw < k; ++kw) {
                const auto ir = static_cast<std::ptrdiff_t>(r) * g.stride + kh - g.pad;
                const auto ic = static_cast<std::ptrdiff_t>(c) * g.stride + kw - g.pad;
                if (ir < 0 || ic < 0 || ir >= static_cast<std::ptrdiff_t>(x.frames()) ||
                    ic >= static_cast<std::ptrdiff_t>(x.bins()))
                  continue;
                acc += w[((o * g.in_channels + i) * k + kh) * k + kw] *
                       x(i, static_cast<std::size_t>(ir), static_cast<std::size_t>(ic));
              }
          y(o, r, c) = acc;
        }
    out.push_back(std::move(y));
  }
  return out;
}

}  // namespace sapp::reference
