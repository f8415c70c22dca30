#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <stdexcept>

#include "sapp/masking.hpp"
#include "sapp/tensor.hpp"

namespace sapp::kernels {

namespace detail {

template <Scheme S, typename Scalar>
inline Scalar masked_value(Scalar x, Scalar y) {
  if constexpr (S == Scheme::kZero) {
    (void)x;
    (void)y;
    return Scalar(0);
  } else if constexpr (S == Scheme::kMixture) {
    return Scalar(0.5) * (x + y);
  } else {
    (void)x;
    return y;
  }
}

template <Scheme S, typename Scalar>
void mask_rows(const Scalar* x, const Scalar* y, Scalar* out, Shape shape, const MaskSpec& m) {
  const auto rows = static_cast<std::ptrdiff_t>(shape.channels * shape.frames);
  const std::size_t bins = shape.bins;
  const std::size_t f_end = m.f0 + m.f;
#pragma omp parallel for schedule(static) if (rows * static_cast<std::ptrdiff_t>(bins) > 65536)
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    const std::size_t frame = static_cast<std::size_t>(r) % shape.frames;
    const std::size_t base = static_cast<std::size_t>(r) * bins;
    const Scalar* xr = x + base;
    const Scalar* yr = y ? y + base : nullptr;
    Scalar* o = out + base;
    if (m.in_time_band(frame)) {
      for (std::size_t j = 0; j < bins; ++j) {
        o[j] = masked_value<S>(xr[j], yr ? yr[j] : Scalar(0));
      }
      continue;
    }
    std::copy(xr, xr + m.f0, o);
    for (std::size_t j = m.f0; j < f_end; ++j) {
      o[j] = masked_value<S>(xr[j], yr ? yr[j] : Scalar(0));
    }
    std::copy(xr + f_end, xr + bins, o + f_end);
  }
}

}  // namespace detail

/// Buffer-level masking: writes the masked copy of x into a caller-provided
/// out buffer. All buffers are contiguous row-major (C, T, F) of shape.size()
/// elements; y is ignored (and may be empty) for kZero. out must not alias
/// x or y. Every channel shares the same bands.
template <typename Scalar>
void mask_into(Scheme scheme, std::span<const Scalar> x, std::span<const Scalar> y,
               std::span<Scalar> out, Shape shape, const MaskSpec& m) {
  validate_mask(m, shape.frames, shape.bins);
  if (x.size() != shape.size() || out.size() != shape.size()) {
    throw std::invalid_argument("mask_into: buffer length does not match shape");
  }
  const bool needs_partner = scheme == Scheme::kMixture || scheme == Scheme::kCut;
  if (needs_partner && y.size() != shape.size()) {
    throw std::invalid_argument("mask_into: partner buffer length does not match shape");
  }
  switch (scheme) {
    case Scheme::kOff:
      std::copy(x.begin(), x.end(), out.begin());
      break;
    case Scheme::kZero:
      detail::mask_rows<Scheme::kZero>(x.data(), static_cast<const Scalar*>(nullptr), out.data(),
                                       shape, m);
      break;
    case Scheme::kMixture:
      detail::mask_rows<Scheme::kMixture>(x.data(), y.data(), out.data(), shape, m);
      break;
    case Scheme::kCut:
      detail::mask_rows<Scheme::kCut>(x.data(), y.data(), out.data(), shape, m);
      break;
  }
}

}  // namespace sapp::kernels
