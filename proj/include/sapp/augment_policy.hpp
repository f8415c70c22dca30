#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sapp/masking.hpp"
#include "sapp/rng.hpp"
#include "sapp/tensor.hpp"

namespace sapp {

/// Hook layers: 0 is the input spectrogram, 1-4 hidden states of the model.
inline constexpr int kNumHookLayers = 5;

struct AugmentPolicy {
  Scheme scheme = Scheme::kOff;
  std::vector<int> layer_set;
  double time_ratio = 0.10;
  double freq_ratio = 0.10;
  /// Fixed (t', f') used at layer 0 instead of the ratios.
  std::optional<MaskParams> absolute_params;

  bool enabled() const { return scheme != Scheme::kOff && !layer_set.empty(); }

  /// Throws std::invalid_argument on an empty layer set with an active
  /// scheme, out-of-range layers or ratios outside [0, 1].
  void validate() const;
};

/// Parses "0,1,2" into a sorted layer set; "-", "none" or "" give the empty set.
std::vector<int> parse_layer_set(std::string_view text);
std::string format_layer_set(std::span<const int> layers);

/// t_max = round-half-up(ratio_t * T), f_max likewise, clamped to the dims.
MaskParams resolve_params(double ratio_t, double ratio_f, std::size_t frames, std::size_t bins);

/// Mask bounds for one hook layer at its current dims.
MaskParams params_for_layer(const AugmentPolicy& policy, int layer, std::size_t frames,
                            std::size_t bins);

int choose_layer(std::span<const int> layer_set, SeededRng& rng);

/// Uniform over the other samples of the batch; nullopt when B == 1, in which
/// case mixture and cut masking fall back to zero masking.
std::optional<std::size_t> choose_partner(std::size_t batch_size, std::size_t target,
                                          SeededRng& rng);

struct SampleAugmentation {
  Scheme scheme = Scheme::kOff;
  MaskSpec mask;
  std::optional<std::size_t> partner;
};

/// Every random decision for one batch at one layer, drawn up front so the
/// application step is order-independent and replayable for backward.
struct AugmentPlan {
  int layer = 0;
  std::vector<SampleAugmentation> samples;
};

/// Draws, per sample in index order, a MaskSpec (t, t0, f, f0) and then a
/// partner for MM/CM. Depends only on the rng state and dims, never on values.
AugmentPlan plan_batch(std::size_t batch_size, const Shape& shape, const AugmentPolicy& policy,
                       int layer, SeededRng& rng);

/// Applies the plan. Partner content is read from partners (normally the same
/// pre-augmentation batch), never from already augmented outputs.
template <typename Scalar>
Batch<Scalar> apply_plan(const Batch<Scalar>& batch, const AugmentPlan& plan,
                         const Batch<Scalar>& partners);

template <typename Scalar>
Batch<Scalar> apply_plan(const Batch<Scalar>& batch, const AugmentPlan& plan) {
  return apply_plan(batch, plan, batch);
}

/// Gradient of apply_plan w.r.t. the target samples, with partner content
/// held constant: masked cells get 0 (ZM, CM) or half (MM) of the incoming
/// gradient.
template <typename Scalar>
Batch<Scalar> plan_backward(const Batch<Scalar>& grad_out, const AugmentPlan& plan);

template <typename Scalar>
Batch<Scalar> augment_batch(const Batch<Scalar>& batch, const AugmentPolicy& policy, int layer,
                            SeededRng& rng);

/// Throws unless every tensor in the batch shares one shape.
template <typename Scalar>
Shape common_shape(const Batch<Scalar>& batch);

}  // namespace sapp
