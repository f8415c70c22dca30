#include "sapp/augment_policy.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>
#include <fmt/ranges.h>

namespace sapp {

void AugmentPolicy::validate() const {
  if (scheme != Scheme::kOff && layer_set.empty()) {
    throw std::invalid_argument(
        fmt::format("policy {} needs a nonempty layer set", scheme_name(scheme)));
  }
  for (int l : layer_set) {
    if (l < 0 || l >= kNumHookLayers) {
      throw std::invalid_argument(fmt::format("layer {} outside 0..{}", l, kNumHookLayers - 1));
    }
  }
  auto in_unit = [](double r) { return r >= 0.0 && r <= 1.0; };
  if (!in_unit(time_ratio) || !in_unit(freq_ratio)) {
    throw std::invalid_argument(
        fmt::format("masking ratios ({}, {}) must lie in [0, 1]", time_ratio, freq_ratio));
  }
}

std::vector<int> parse_layer_set(std::string_view text) {
  std::vector<int> out;
  if (text.empty() || text == "-" || text == "none") return out;
  const char* p = text.data();
  const char* end = p + text.size();
  while (p < end) {
    int v = 0;
    auto [next, ec] = std::from_chars(p, end, v);
    if (ec != std::errc{} || next == p) {
      throw std::invalid_argument(fmt::format("bad layer set '{}'", text));
    }
    out.push_back(v);
    p = next;
    if (p < end) {
      if (*p != ',') throw std::invalid_argument(fmt::format("bad layer set '{}'", text));
      ++p;
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  for (int l : out) {
    if (l < 0 || l >= kNumHookLayers) {
      throw std::invalid_argument(fmt::format("layer {} outside 0..{}", l, kNumHookLayers - 1));
    }
  }
  return out;
}

std::string format_layer_set(std::span<const int> layers) {
  if (layers.empty()) return "-";
  return fmt::format("{}", fmt::join(layers, ","));
}

MaskParams resolve_params(double ratio_t, double ratio_f, std::size_t frames, std::size_t bins) {
  if (!(ratio_t >= 0.0 && ratio_t <= 1.0 && ratio_f >= 0.0 && ratio_f <= 1.0)) {
    throw std::invalid_argument(fmt::format("ratios ({}, {}) outside [0, 1]", ratio_t, ratio_f));
  }
  if (frames == 0 || bins == 0) throw std::invalid_argument("resolve_params: zero dimension");
  // The small bias absorbs representation error in products like 0.05 * 10.
  auto half_up = [](double ratio, std::size_t n) {
    const double v = std::floor(ratio * static_cast<double>(n) + 0.5 + 1e-9);
    return std::min(static_cast<std::size_t>(v), n);
  };
  return MaskParams{half_up(ratio_t, frames), half_up(ratio_f, bins)};
}

MaskParams params_for_layer(const AugmentPolicy& policy, int layer, std::size_t frames,
                            std::size_t bins) {
  if (layer == 0 && policy.absolute_params) return *policy.absolute_params;
  return resolve_params(policy.time_ratio, policy.freq_ratio, frames, bins);
}

int choose_layer(std::span<const int> layer_set, SeededRng& rng) {
  if (layer_set.empty()) throw std::invalid_argument("choose_layer: empty layer set");
  const auto k = uniform_int(rng, 0, static_cast<std::int64_t>(layer_set.size()) - 1);
  return layer_set[static_cast<std::size_t>(k)];
}

std::optional<std::size_t> choose_partner(std::size_t batch_size, std::size_t target,
                                          SeededRng& rng) {
  if (target >= batch_size) {
    throw std::invalid_argument(
        fmt::format("choose_partner: target {} outside batch of {}", target, batch_size));
  }
  if (batch_size == 1) return std::nullopt;
  auto k = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(batch_size) - 2));
  if (k >= target) ++k;
  return k;
}

AugmentPlan plan_batch(std::size_t batch_size, const Shape& shape, const AugmentPolicy& policy,
                       int layer, SeededRng& rng) {
  policy.validate();
  AugmentPlan plan;
  plan.layer = layer;
  plan.samples.resize(batch_size);
  if (policy.scheme == Scheme::kOff) return plan;
  const MaskParams params = params_for_layer(policy, layer, shape.frames, shape.bins);
  const bool uses_partner = policy.scheme == Scheme::kMixture || policy.scheme == Scheme::kCut;
  for (std::size_t i = 0; i < batch_size; ++i) {
    auto& s = plan.samples[i];
    s.mask = sample_mask(shape.frames, shape.bins, params, rng);
    s.scheme = policy.scheme;
    if (uses_partner) {
      s.partner = choose_partner(batch_size, i, rng);
      if (!s.partner) s.scheme = Scheme::kZero;
    }
  }
  return plan;
}

template <typename Scalar>
Shape common_shape(const Batch<Scalar>& batch) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  const Shape s = batch.front().shape();
  for (const auto& x : batch) {
    if (x.shape() != s) {
      throw std::invalid_argument(fmt::format("batch shape mismatch: {} vs {}",
                                              to_string(x.shape()), to_string(s)));
    }
  }
  return s;
}

template <typename Scalar>
Batch<Scalar> apply_plan(const Batch<Scalar>& batch, const AugmentPlan& plan,
                         const Batch<Scalar>& partners) {
  const Shape shape = common_shape(batch);
  if (plan.samples.size() != batch.size()) {
    throw std::invalid_argument(fmt::format("plan covers {} samples, batch has {}",
                                            plan.samples.size(), batch.size()));
  }
  if (partners.size() != batch.size() || common_shape(partners) != shape) {
    throw std::invalid_argument("partner batch does not match target batch");
  }
  Batch<Scalar> out(batch.size());
  const auto n = static_cast<std::ptrdiff_t>(batch.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto& s = plan.samples[static_cast<std::size_t>(i)];
    const auto& x = batch[static_cast<std::size_t>(i)];
    const BasicTensor<Scalar>* y = s.partner ? &partners[*s.partner] : nullptr;
    out[static_cast<std::size_t>(i)] = apply_scheme(s.scheme, x, y, s.mask);
  }
  return out;
}

template <typename Scalar>
Batch<Scalar> plan_backward(const Batch<Scalar>& grad_out, const AugmentPlan& plan) {
  if (plan.samples.size() != grad_out.size()) {
    throw std::invalid_argument("plan_backward: plan/batch size mismatch");
  }
  Batch<Scalar> out(grad_out.size());
  for (std::size_t i = 0; i < grad_out.size(); ++i) {
    const auto& s = plan.samples[i];
    const auto& g = grad_out[i];
    switch (s.scheme) {
      case Scheme::kOff:
        out[i] = g;
        break;
      case Scheme::kZero:
      case Scheme::kCut:
        out[i] = apply_zero_mask(g, s.mask);
        break;
      case Scheme::kMixture:
        out[i] = apply_mixture_mask(g, BasicTensor<Scalar>(g.shape()), s.mask);
        break;
    }
  }
  return out;
}

template <typename Scalar>
Batch<Scalar> augment_batch(const Batch<Scalar>& batch, const AugmentPolicy& policy, int layer,
                            SeededRng& rng) {
  const Shape shape = common_shape(batch);
  if (policy.scheme == Scheme::kOff) {
    policy.validate();
    return batch;
  }
  const AugmentPlan plan = plan_batch(batch.size(), shape, policy, layer, rng);
  return apply_plan(batch, plan);
}

#define SAPP_INSTANTIATE_POLICY(T)                                                               \
  template Shape common_shape<T>(const Batch<T>&);                                              \
  template Batch<T> apply_plan<T>(const Batch<T>&, const AugmentPlan&, const Batch<T>&);        \
  template Batch<T> plan_backward<T>(const Batch<T>&, const AugmentPlan&);                      \
  template Batch<T> augment_batch<T>(const Batch<T>&, const AugmentPolicy&, int, SeededRng&);

SAPP_INSTANTIATE_POLICY(float)
SAPP_INSTANTIATE_POLICY(double)

#undef SAPP_INSTANTIATE_POLICY

}  // namespace sapp
