#pragma once

// Independent expected-value oracles for the tests. They decide each cell on
// its own instead of looping over bands, so they share no structure with the
// library kernels or the loop reference.

#include <cmath>
#include <cstddef>

#include "sapp/masking.hpp"
#include "sapp/tensor.hpp"

namespace sapp::oracle {

inline bool in_band(std::size_t i, std::size_t start, std::size_t width) {
  return width > 0 && i >= start && i <= start + width - 1;
}

template <typename Scalar>
BasicTensor<Scalar> mask(Scheme scheme, const BasicTensor<Scalar>& x, const BasicTensor<Scalar>& y,
                         const MaskSpec& m) {
  BasicTensor<Scalar> out(x.shape());
  for (std::size_t c = 0; c < x.channels(); ++c)
    for (std::size_t i = 0; i < x.frames(); ++i)
      for (std::size_t j = 0; j < x.bins(); ++j) {
        const bool masked = in_band(i, m.t0, m.t) || in_band(j, m.f0, m.f);
        Scalar v = x(c, i, j);
        if (masked) {
          switch (scheme) {
            case Scheme::kOff: break;
            case Scheme::kZero: v = Scalar(0); break;
            case Scheme::kMixture: v = (x(c, i, j) + y(c, i, j)) / Scalar(2); break;
            case Scheme::kCut: v = y(c, i, j); break;
          }
        }
        out(c, i, j) = v;
      }
  return out;
}

}  // namespace sapp::oracle
