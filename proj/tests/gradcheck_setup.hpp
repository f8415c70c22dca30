#pragma once

// Shared setup for gradient checks: a toy model, a small random batch and a
// frozen masking hook whose partner content is a snapshot of the clean
// activations at the hook layer (so the hooked network is a fixed function
// of its parameters).

#include <memory>

#include "sapp/model.hpp"

namespace sapp::test {

struct GradCheckCase {
  ModelGraph model;
  Batch<double> inputs;
  std::vector<int> labels;
};

inline GradCheckCase make_gradcheck_case(std::uint64_t seed, std::size_t batch = 3,
                                         Shape input = Shape{1, 32, 32}) {
  SeededRng rng(seed, stream_id(0, 0, StreamPurpose::kGradCheck));
  GradCheckCase c;
  c.model = ModelGraph::build(ModelConfig::toy(4), rng);
  for (std::size_t i = 0; i < batch; ++i) {
    Tensor64 x(input);
    for (auto& v : x.data()) v = rng.normal();
    c.inputs.push_back(std::move(x));
    c.labels.push_back(static_cast<int>(i % 4));
  }
  return c;
}

/// Activations reaching hook `layer` on a train-mode forward of a copy.
inline Batch<double> capture_activations(const ModelGraph& model, const Batch<double>& inputs, int layer) {
  ModelGraph copy = model;
  auto captured = std::make_shared<Batch<double>>();
  Hook h;
  h.forward = [captured](const Batch<double>& x) {
    *captured = x;
    return x;
  };
  h.backward = [](const Batch<double>& g) { return g; };
  copy.forward(inputs, Mode::kTrain, HookMap{{layer, h}});
  return *captured;
}

/// Frozen hook with explicit masks covering a real band on both axes.
inline HookMap frozen_hook(const GradCheckCase& c, Scheme scheme, int layer) {
  const Batch<double> snap = capture_activations(c.model, c.inputs, layer);
  const Shape s = snap.front().shape();
  AugmentPlan plan;
  plan.layer = layer;
  for (std::size_t i = 0; i < c.inputs.size(); ++i) {
    SampleAugmentation a;
    a.scheme = scheme;
    const std::size_t t = std::max<std::size_t>(1, s.frames / 4);
    const std::size_t f = std::max<std::size_t>(1, s.bins / 4);
    a.mask = MaskSpec{(i * t) % (s.frames - t + 1), t, ((i + 1) * f) % (s.bins - f + 1), f};
    if (scheme == Scheme::kMixture || scheme == Scheme::kCut) a.partner = (i + 1) % c.inputs.size();
    plan.samples.push_back(a);
  }
  return HookMap{{layer, make_plan_hook(plan, snap)}};
}

}  // namespace sapp::test
