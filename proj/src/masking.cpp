#include "sapp/masking.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <stdexcept>
#include <vector>

#include "sapp/kernels/masking.hpp"

namespace sapp {

Scheme parse_scheme(std::string_view name) {
  std::string upper(name);
  std::transform(upper.begin(), upper.end(), upper.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  if (upper == "OFF") return Scheme::kOff;
  if (upper == "ZM") return Scheme::kZero;
  if (upper == "MM") return Scheme::kMixture;
  if (upper == "CM") return Scheme::kCut;
  throw std::invalid_argument(fmt::format("unknown masking scheme '{}' (expected OFF, ZM, MM, CM)", name));
}

std::string_view scheme_name(Scheme s) {
  switch (s) {
    case Scheme::kOff: return "OFF";
    case Scheme::kZero: return "ZM";
    case Scheme::kMixture: return "MM";
    case Scheme::kCut: return "CM";
  }
  return "?";
}

std::string to_string(const MaskSpec& m) {
  return fmt::format("{},{},{},{}", m.t0, m.t, m.f0, m.f);
}

MaskSpec parse_mask_spec(std::string_view text) {
  std::size_t fields[4];
  std::size_t n = 0;
  const char* p = text.data();
  const char* end = text.data() + text.size();
  while (n < 4) {
    auto [next, ec] = std::from_chars(p, end, fields[n]);
    if (ec != std::errc{} || next == p) break;
    ++n;
    p = next;
    if (p == end) break;
    if (*p != ',') {
      n = 0;
      break;
    }
    ++p;
  }
  if (n != 4 || p != end) {
    throw std::invalid_argument(fmt::format("mask spec '{}' is not of the form t0,t,f0,f", text));
  }
  return MaskSpec{fields[0], fields[1], fields[2], fields[3]};
}

void validate_mask(const MaskSpec& m, std::size_t frames, std::size_t bins) {
  if (m.t > frames || m.t0 > frames - m.t || m.f > bins || m.f0 > bins - m.f) {
    throw std::invalid_argument(
        fmt::format("mask {} out of bounds for {} frames x {} bins", to_string(m), frames, bins));
  }
}

MaskSpec sample_mask(std::size_t frames, std::size_t bins, const MaskParams& params,
                     SeededRng& rng) {
  if (params.t_max > frames || params.f_max > bins) {
    throw std::invalid_argument(fmt::format("mask params ({}, {}) exceed dims {}x{}", params.t_max,
                                            params.f_max, frames, bins));
  }
  MaskSpec m;
  m.t = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(params.t_max)));
  m.t0 = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(frames - m.t)));
  m.f = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(params.f_max)));
  m.f0 = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(bins - m.f)));
  return m;
}

namespace {

template <typename Scalar>
void check_pair(const BasicTensor<Scalar>& x, const BasicTensor<Scalar>& y) {
  if (x.shape() != y.shape()) {
    throw std::invalid_argument(fmt::format("partner shape {} does not match target shape {}",
                                            to_string(y.shape()), to_string(x.shape())));
  }
}

template <typename Scalar>
BasicTensor<Scalar> run(Scheme scheme, const BasicTensor<Scalar>& x, const BasicTensor<Scalar>* y,
                        const MaskSpec& m) {
  std::vector<Scalar> out(x.size());
  std::span<const Scalar> partner;
  if (y) partner = y->data();
  kernels::mask_into<Scalar>(scheme, x.data(), partner, out, x.shape(), m);
  return BasicTensor<Scalar>(x.shape(), std::move(out));
}

}  // namespace

template <typename Scalar>
BasicTensor<Scalar> apply_zero_mask(const BasicTensor<Scalar>& x, const MaskSpec& m) {
  return run<Scalar>(Scheme::kZero, x, nullptr, m);
}

template <typename Scalar>
BasicTensor<Scalar> apply_mixture_mask(const BasicTensor<Scalar>& x, const BasicTensor<Scalar>& y,
                                       const MaskSpec& m) {
  check_pair(x, y);
  return run<Scalar>(Scheme::kMixture, x, &y, m);
}

template <typename Scalar>
BasicTensor<Scalar> apply_cut_mask(const BasicTensor<Scalar>& x, const BasicTensor<Scalar>& y,
                                   const MaskSpec& m) {
  check_pair(x, y);
  return run<Scalar>(Scheme::kCut, x, &y, m);
}

template <typename Scalar>
BasicTensor<Scalar> apply_scheme(Scheme scheme, const BasicTensor<Scalar>& x,
                                 const BasicTensor<Scalar>* y, const MaskSpec& m) {
  switch (scheme) {
    case Scheme::kOff:
      validate_mask(m, x.frames(), x.bins());
      return x;
    case Scheme::kZero:
      return apply_zero_mask(x, m);
    case Scheme::kMixture:
    case Scheme::kCut:
      if (!y) throw std::invalid_argument(fmt::format("{} requires a partner tensor", scheme_name(scheme)));
      return scheme == Scheme::kMixture ? apply_mixture_mask(x, *y, m) : apply_cut_mask(x, *y, m);
  }
  throw std::logic_error("unreachable scheme");
}

#define SAPP_INSTANTIATE_MASKING(T)                                                              \
  template BasicTensor<T> apply_zero_mask<T>(const BasicTensor<T>&, const MaskSpec&);           \
  template BasicTensor<T> apply_mixture_mask<T>(const BasicTensor<T>&, const BasicTensor<T>&,   \
                                                const MaskSpec&);                               \
  template BasicTensor<T> apply_cut_mask<T>(const BasicTensor<T>&, const BasicTensor<T>&,       \
                                            const MaskSpec&);                                   \
  template BasicTensor<T> apply_scheme<T>(Scheme, const BasicTensor<T>&, const BasicTensor<T>*, \
                                          const MaskSpec&);

SAPP_INSTANTIATE_MASKING(float)
SAPP_INSTANTIATE_MASKING(double)

#undef SAPP_INSTANTIATE_MASKING

}  // namespace sapp
