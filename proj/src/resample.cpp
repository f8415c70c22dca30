#include <cmath>
#include <numbers>
#include <stdexcept>

#include <fmt/format.h>

#include "sapp/features.hpp"

namespace sapp {

namespace {

constexpr double kZeroCrossings = 16.0;
constexpr double kRolloff = 0.95;

double blackman(double x) {
  // x in [-1, 1]
  const double a = std::numbers::pi * (x + 1.0);
  return 0.42 - 0.5 * std::cos(a) + 0.08 * std::cos(2.0 * a);
}

}  // namespace

std::vector<float> resample(std::span<const float> audio, double source_rate, double target_rate) {
  if (audio.empty()) throw std::invalid_argument("resample: empty input");
  if (!(target_rate > 0.0) || source_rate < target_rate) {
    throw std::invalid_argument(fmt::format(
        "resample: source rate {} Hz below target {} Hz (only down-sampling is supported)",
        source_rate, target_rate));
  }
  if (source_rate == target_rate) return std::vector<float>(audio.begin(), audio.end());

  const double ratio = target_rate / source_rate;
  const auto n_out = static_cast<std::size_t>(
      std::llround(static_cast<double>(audio.size()) * ratio));
  // Cutoff in cycles per input sample, just below the output Nyquist.
  const double fc = 0.5 * ratio * kRolloff;
  const double half_width = kZeroCrossings / (2.0 * fc);
  const auto n_in = static_cast<std::ptrdiff_t>(audio.size());

  std::vector<float> out(n_out);
  const auto n = static_cast<std::ptrdiff_t>(n_out);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const double center = static_cast<double>(i) / ratio;
    const auto lo = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(std::ceil(center - half_width)));
    const auto hi = std::min<std::ptrdiff_t>(n_in - 1, static_cast<std::ptrdiff_t>(std::floor(center + half_width)));
    double acc = 0.0;
    double norm = 0.0;
    for (std::ptrdiff_t k = lo; k <= hi; ++k) {
      const double d = center - static_cast<double>(k);
      const double arg = 2.0 * fc * d;
      const double sinc = arg == 0.0 ? 1.0 : std::sin(std::numbers::pi * arg) / (std::numbers::pi * arg);
      const double w = sinc * blackman(d / half_width);
      acc += w * audio[static_cast<std::size_t>(k)];
      norm += w;
    }
    out[static_cast<std::size_t>(i)] = static_cast<float>(norm != 0.0 ? acc / norm : 0.0);
  }
  return out;
}

}  // namespace sapp
