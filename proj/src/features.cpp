#include "sapp/features.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <stdexcept>

#include <fftw3.h>
#include <fmt/format.h>

#include "fftw_lock.hpp"

namespace sapp {

void FeatureConfig::validate() const {
  if (sample_rate <= 0.0) throw std::invalid_argument("sample rate must be positive");
  if (window == 0 || hop == 0 || hop > window) {
    throw std::invalid_argument(fmt::format("need 0 < hop ({}) <= window ({})", hop, window));
  }
  if (mel_bins == 0) throw std::invalid_argument("mel bins must be >= 1");
  if (!(fmin >= 0.0 && fmin < fmax && fmax <= sample_rate / 2.0)) {
    throw std::invalid_argument(fmt::format("need 0 <= fmin ({}) < fmax ({}) <= sample_rate/2 ({})",
                                            fmin, fmax, sample_rate / 2.0));
  }
  if (!(log_floor > 0.0)) throw std::invalid_argument("log floor must be positive");
}

std::size_t frame_count(std::size_t samples, const FeatureConfig& cfg) {
  return 1 + samples / cfg.hop;
}

// Slaney mel scale: linear below 1 kHz, logarithmic above.
namespace {
constexpr double kMelLinearHz = 200.0 / 3.0;
constexpr double kMelBreakHz = 1000.0;
constexpr double kMelBreak = kMelBreakHz / kMelLinearHz;
const double kMelLogStep = std::log(6.4) / 27.0;
}  // namespace

double hz_to_mel(double hz) {
  if (hz < kMelBreakHz) return hz / kMelLinearHz;
  return kMelBreak + std::log(hz / kMelBreakHz) / kMelLogStep;
}

double mel_to_hz(double mel) {
  if (mel < kMelBreak) return mel * kMelLinearHz;
  return kMelBreakHz * std::exp(kMelLogStep * (mel - kMelBreak));
}

MelFilterbank mel_filterbank(const FeatureConfig& cfg) {
  cfg.validate();
  MelFilterbank bank;
  bank.mel_bins = cfg.mel_bins;
  bank.fft_bins = cfg.window / 2 + 1;
  bank.weights.assign(bank.mel_bins * bank.fft_bins, 0.0);

  const double lo = hz_to_mel(cfg.fmin);
  const double hi = hz_to_mel(cfg.fmax);
  std::vector<double> edges(cfg.mel_bins + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(cfg.mel_bins + 1));
  }
  const double bin_hz = cfg.sample_rate / static_cast<double>(cfg.window);
  for (std::size_t m = 0; m < cfg.mel_bins; ++m) {
    const double left = edges[m], center = edges[m + 1], right = edges[m + 2];
    for (std::size_t k = 0; k < bank.fft_bins; ++k) {
      const double f = bin_hz * static_cast<double>(k);
      const double rise = (f - left) / (center - left);
      const double fall = (right - f) / (right - center);
      bank.weights[m * bank.fft_bins + k] = std::max(0.0, std::min(rise, fall));
    }
  }
  return bank;
}

std::vector<double> perceptual_weights(const FeatureConfig& cfg) {
  const std::size_t n = cfg.window / 2 + 1;
  std::vector<double> w(n, 1.0);
  if (!cfg.perceptual_weighting) return w;
  const double bin_hz = cfg.sample_rate / static_cast<double>(cfg.window);
  const double gain_1k = std::pow(10.0, 2.0 / 20.0);  // +2.00 dB normalizes A(1 kHz) to 0 dB
  for (std::size_t k = 0; k < n; ++k) {
    const double f2 = std::pow(bin_hz * static_cast<double>(k), 2.0);
    const double num = 12194.0 * 12194.0 * f2 * f2;
    const double den = (f2 + 20.6 * 20.6) *
                       std::sqrt((f2 + 107.7 * 107.7) * (f2 + 737.9 * 737.9)) *
                       (f2 + 12194.0 * 12194.0);
    const double amp = num / den * gain_1k;
    w[k] = amp * amp;
  }
  return w;
}

struct LogMelExtractor::Plan {
  fftw_plan plan = nullptr;
  ~Plan() {
    if (plan) {
      std::lock_guard lock(mutex());
      fftw_destroy_plan(plan);
    }
  }
  static std::mutex& mutex() { return detail::fftw_planner_mutex(); }
};

LogMelExtractor::LogMelExtractor(FeatureConfig cfg)
    : cfg_(cfg), bank_(mel_filterbank(cfg)), weighting_(perceptual_weights(cfg)),
      plan_(std::make_unique<Plan>()) {
  window_.resize(cfg_.window);
  for (std::size_t i = 0; i < cfg_.window; ++i) {
    // Periodic Hann.
    window_[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                      static_cast<double>(cfg_.window));
  }
  std::vector<double> in(cfg_.window);
  std::vector<fftw_complex> out(cfg_.window / 2 + 1);
  std::lock_guard lock(Plan::mutex());
  plan_->plan = fftw_plan_dft_r2c_1d(static_cast<int>(cfg_.window), in.data(), out.data(),
                                     FFTW_ESTIMATE | FFTW_UNALIGNED);
  if (!plan_->plan) throw std::runtime_error("FFTW plan creation failed");
}

LogMelExtractor::~LogMelExtractor() = default;

FeatureTensor LogMelExtractor::compute(std::span<const float> audio) const {
  const std::size_t n = audio.size();
  const std::size_t win = cfg_.window;
  if (n < win) {
    throw std::invalid_argument(
        fmt::format("audio has {} samples, fewer than the {}-sample window", n, win));
  }
  // Centered frames: reflect-pad by half a window on both sides.
  const std::size_t pad = win / 2;
  std::vector<double> padded(n + 2 * pad);
  for (std::size_t i = 0; i < padded.size(); ++i) {
    std::ptrdiff_t src = static_cast<std::ptrdiff_t>(i) - static_cast<std::ptrdiff_t>(pad);
    if (src < 0) src = -src;
    const auto last = static_cast<std::ptrdiff_t>(n) - 1;
    if (src > last) src = 2 * last - src;
    padded[i] = audio[static_cast<std::size_t>(src)];
  }

  const std::size_t frames = frame_count(n, cfg_);
  const std::size_t fft_bins = bank_.fft_bins;
  FeatureTensor out(Shape{1, frames, cfg_.mel_bins});
  std::vector<double> frame(win);
  std::vector<fftw_complex> spec(fft_bins);
  std::vector<double> power(fft_bins);
  for (std::size_t t = 0; t < frames; ++t) {
    const double* src = padded.data() + t * cfg_.hop;
    for (std::size_t i = 0; i < win; ++i) frame[i] = src[i] * window_[i];
    fftw_execute_dft_r2c(plan_->plan, frame.data(), spec.data());
    for (std::size_t k = 0; k < fft_bins; ++k) {
      power[k] = (spec[k][0] * spec[k][0] + spec[k][1] * spec[k][1]) * weighting_[k];
    }
    for (std::size_t m = 0; m < cfg_.mel_bins; ++m) {
      const double* w = bank_.weights.data() + m * fft_bins;
      double energy = 0.0;
      for (std::size_t k = 0; k < fft_bins; ++k) energy += w[k] * power[k];
      out(0, t, m) = static_cast<float>(std::log(energy + cfg_.log_floor));
    }
  }
  return out;
}

FeatureTensor logmel(std::span<const float> audio, const FeatureConfig& cfg) {
  return LogMelExtractor(cfg).compute(audio);
}

FeatureTensor NormStats::to_tensor() const {
  if (mean.size() != stddev.size() || mean.empty()) {
    throw std::invalid_argument("NormStats: mean/std length mismatch");
  }
  FeatureTensor t(Shape{1, 2, mean.size()});
  for (std::size_t f = 0; f < mean.size(); ++f) {
    t(0, 0, f) = mean[f];
    t(0, 1, f) = stddev[f];
  }
  return t;
}

NormStats NormStats::from_tensor(const FeatureTensor& t) {
  if (t.channels() != 1 || t.frames() != 2) {
    throw std::invalid_argument(
        fmt::format("norm stats tensor must be 1x2xF, got {}", to_string(t.shape())));
  }
  NormStats s;
  for (std::size_t f = 0; f < t.bins(); ++f) {
    s.mean.push_back(t(0, 0, f));
    s.stddev.push_back(t(0, 1, f));
    if (!(s.stddev.back() > 0.0f)) throw std::invalid_argument("norm stats: std must be positive");
  }
  return s;
}

NormStats fit_norm(std::span<const FeatureTensor> training) {
  if (training.empty()) throw std::invalid_argument("fit_norm: empty training set");
  const std::size_t bins = training.front().bins();
  std::vector<double> sum(bins, 0.0);
  double count = 0.0;
  for (const auto& x : training) {
    if (x.bins() != bins) {
      throw std::invalid_argument(
          fmt::format("fit_norm: tensor with {} bins, expected {}", x.bins(), bins));
    }
    for (std::size_t c = 0; c < x.channels(); ++c)
      for (std::size_t t = 0; t < x.frames(); ++t)
        for (std::size_t f = 0; f < bins; ++f) sum[f] += x(c, t, f);
    count += static_cast<double>(x.channels() * x.frames());
  }
  std::vector<double> mean(bins);
  for (std::size_t f = 0; f < bins; ++f) mean[f] = sum[f] / count;
  std::vector<double> sq(bins, 0.0);
  for (const auto& x : training) {
    for (std::size_t c = 0; c < x.channels(); ++c)
      for (std::size_t t = 0; t < x.frames(); ++t)
        for (std::size_t f = 0; f < bins; ++f) {
          const double d = x(c, t, f) - mean[f];
          sq[f] += d * d;
        }
  }
  NormStats s;
  s.mean.resize(bins);
  s.stddev.resize(bins);
  for (std::size_t f = 0; f < bins; ++f) {
    s.mean[f] = static_cast<float>(mean[f]);
    s.stddev[f] = static_cast<float>(std::max(std::sqrt(sq[f] / count), kStdFloor));
  }
  return s;
}

FeatureTensor apply_norm(const FeatureTensor& x, const NormStats& stats) {
  if (stats.mean.size() != x.bins() || stats.stddev.size() != x.bins()) {
    throw std::invalid_argument(fmt::format("apply_norm: stats for {} bins, tensor has {}",
                                            stats.mean.size(), x.bins()));
  }
  FeatureTensor out(x.shape());
  for (std::size_t c = 0; c < x.channels(); ++c)
    for (std::size_t t = 0; t < x.frames(); ++t)
      for (std::size_t f = 0; f < x.bins(); ++f) {
        const double v = (static_cast<double>(x(c, t, f)) - stats.mean[f]) / stats.stddev[f];
        out(c, t, f) = static_cast<float>(v);
      }
  return out;
}

}  // namespace sapp
