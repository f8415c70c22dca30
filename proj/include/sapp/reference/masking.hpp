#pragma once

// Serial loop transcriptions of the three masking algorithms, kept as the
// oracle for the parallel kernels. Each one copies x, then overwrites the
// time band row by row and the frequency band column by column, reading the
// right-hand side from the original x (so intersection cells are computed
// once from unmodified inputs). Bands are half-open.

#include "sapp/masking.hpp"
#include "sapp/tensor.hpp"

namespace sapp::reference {

template <typename Scalar>
BasicTensor<Scalar> zero_mask(const BasicTensor<Scalar>& x, const MaskSpec& m) {
  BasicTensor<Scalar> out = x;
  for (std::size_t c = 0; c < x.channels(); ++c) {
    for (std::size_t i = m.t0; i < m.t0 + m.t; ++i)
      for (std::size_t j = 0; j < x.bins(); ++j) out(c, i, j) = 0;
    for (std::size_t i = 0; i < x.frames(); ++i)
      for (std::size_t j = m.f0; j < m.f0 + m.f; ++j) out(c, i, j) = 0;
  }
  return out;
}

template <typename Scalar>
BasicTensor<Scalar> mixture_mask(const BasicTensor<Scalar>& x, const BasicTensor<Scalar>& y,
                                 const MaskSpec& m) {
  BasicTensor<Scalar> out = x;
  for (std::size_t c = 0; c < x.channels(); ++c) {
    for (std::size_t i = m.t0; i < m.t0 + m.t; ++i)
      for (std::size_t j = 0; j < x.bins(); ++j)
        out(c, i, j) = Scalar(0.5) * (x(c, i, j) + y(c, i, j));
    for (std::size_t i = 0; i < x.frames(); ++i)
      for (std::size_t j = m.f0; j < m.f0 + m.f; ++j)
        out(c, i, j) = Scalar(0.5) * (x(c, i, j) + y(c, i, j));
  }
  return out;
}

template <typename Scalar>
BasicTensor<Scalar> cut_mask(const BasicTensor<Scalar>& x, const BasicTensor<Scalar>& y,
                             const MaskSpec& m) {
  BasicTensor<Scalar> out = x;
  for (std::size_t c = 0; c < x.channels(); ++c) {
    for (std::size_t i = m.t0; i < m.t0 + m.t; ++i)
      for (std::size_t j = 0; j < x.bins(); ++j) out(c, i, j) = y(c, i, j);
    for (std::size_t i = 0; i < x.frames(); ++i)
      for (std::size_t j = m.f0; j < m.f0 + m.f; ++j) out(c, i, j) = y(c, i, j);
  }
  return out;
}

}  // namespace sapp::reference
