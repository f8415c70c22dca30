#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

#include "sapp/rng.hpp"
#include "sapp/tensor.hpp"

namespace sapp {

/// Masking scheme. kOff disables augmentation.
enum class Scheme { kOff, kZero, kMixture, kCut };

/// Parses "OFF", "ZM", "MM", "CM" (case-insensitive).
Scheme parse_scheme(std::string_view name);
std::string_view scheme_name(Scheme s);

/// One sampled masking event. Bands are half-open: frames [t0, t0 + t) and
/// bins [f0, f0 + f). A zero width leaves that axis untouched.
struct MaskSpec {
  std::size_t t0 = 0;
  std::size_t t = 0;
  std::size_t f0 = 0;
  std::size_t f = 0;

  bool in_time_band(std::size_t frame) const { return frame >= t0 && frame - t0 < t; }
  bool in_freq_band(std::size_t bin) const { return bin >= f0 && bin - f0 < f; }
  bool covers(std::size_t frame, std::size_t bin) const {
    return in_time_band(frame) || in_freq_band(bin);
  }
  friend bool operator==(const MaskSpec&, const MaskSpec&) = default;
};

std::string to_string(const MaskSpec& m);

/// Parses "t0,t,f0,f".
MaskSpec parse_mask_spec(std::string_view text);

/// Upper bounds for the mask widths (t' and f').
struct MaskParams {
  std::size_t t_max = 0;
  std::size_t f_max = 0;
  friend bool operator==(const MaskParams&, const MaskParams&) = default;
};

/// Throws std::invalid_argument unless the bands fit inside frames x bins.
void validate_mask(const MaskSpec& m, std::size_t frames, std::size_t bins);

/// Draws t ~ U{0..t_max}, t0 ~ U{0..T-t}, f ~ U{0..f_max}, f0 ~ U{0..F-f},
/// in that order.
MaskSpec sample_mask(std::size_t frames, std::size_t bins, const MaskParams& params,
                     SeededRng& rng);

template <typename Scalar>
BasicTensor<Scalar> apply_zero_mask(const BasicTensor<Scalar>& x, const MaskSpec& m);

template <typename Scalar>
BasicTensor<Scalar> apply_mixture_mask(const BasicTensor<Scalar>& x, const BasicTensor<Scalar>& y,
                                       const MaskSpec& m);

template <typename Scalar>
BasicTensor<Scalar> apply_cut_mask(const BasicTensor<Scalar>& x, const BasicTensor<Scalar>& y,
                                   const MaskSpec& m);

/// Dispatches on scheme. y may be null only for kZero and kOff.
template <typename Scalar>
BasicTensor<Scalar> apply_scheme(Scheme scheme, const BasicTensor<Scalar>& x,
                                 const BasicTensor<Scalar>* y, const MaskSpec& m);

}  // namespace sapp
