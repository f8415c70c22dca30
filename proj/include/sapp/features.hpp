#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "sapp/tensor.hpp"

namespace sapp {

struct FeatureConfig {
  double sample_rate = 22050.0;
  std::size_t window = 2048;
  /// 512 samples gives ~43 frames per second at 22.05 kHz.
  std::size_t hop = 512;
  std::size_t mel_bins = 256;
  double fmin = 0.0;
  double fmax = 11025.0;
  double log_floor = 1e-10;
  /// A-weighting gain on the power spectrum before mel pooling.
  bool perceptual_weighting = true;

  void validate() const;
};

/// Band-limited (windowed-sinc) resampling to target_rate. Requires
/// source_rate >= target_rate; equal rates return the input unchanged.
std::vector<float> resample(std::span<const float> audio, double source_rate,
                            double target_rate = 22050.0);

/// Frames produced by centered framing: 1 + floor(n / hop).
std::size_t frame_count(std::size_t samples, const FeatureConfig& cfg);

/// Triangular filters on the Slaney mel scale with peak 1, spanning
/// [fmin, fmax]. Row m holds weights over the window/2 + 1 FFT bins.
struct MelFilterbank {
  std::size_t mel_bins = 0;
  std::size_t fft_bins = 0;
  std::vector<double> weights;  // mel_bins x fft_bins

  double operator()(std::size_t mel, std::size_t fft_bin) const {
    return weights[mel * fft_bins + fft_bin];
  }
};

MelFilterbank mel_filterbank(const FeatureConfig& cfg);

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// A-weighting expressed as a power gain for each FFT bin.
std::vector<double> perceptual_weights(const FeatureConfig& cfg);

/// Reusable log-mel front end. compute() is const and safe to call from
/// several threads at once.
class LogMelExtractor {
 public:
  explicit LogMelExtractor(FeatureConfig cfg);
  ~LogMelExtractor();
  LogMelExtractor(const LogMelExtractor&) = delete;
  LogMelExtractor& operator=(const LogMelExtractor&) = delete;

  const FeatureConfig& config() const { return cfg_; }
  const MelFilterbank& filterbank() const { return bank_; }

  /// 1 x T x mel_bins tensor of log(mel energy + log_floor).
  FeatureTensor compute(std::span<const float> audio) const;

 private:
  struct Plan;
  FeatureConfig cfg_;
  MelFilterbank bank_;
  std::vector<double> window_;
  std::vector<double> weighting_;
  std::unique_ptr<Plan> plan_;
};

FeatureTensor logmel(std::span<const float> audio, const FeatureConfig& cfg);

/// Per-bin statistics of the training features.
struct NormStats {
  std::vector<float> mean;
  std::vector<float> stddev;

  /// 1 x 2 x F tensor: frame 0 holds the means, frame 1 the std devs.
  FeatureTensor to_tensor() const;
  static NormStats from_tensor(const FeatureTensor& t);
};

inline constexpr double kStdFloor = 1e-8;

/// Mean and population standard deviation per bin over every frame of every
/// tensor (and channel). std is floored at kStdFloor.
NormStats fit_norm(std::span<const FeatureTensor> training);

FeatureTensor apply_norm(const FeatureTensor& x, const NormStats& stats);

}  // namespace sapp
