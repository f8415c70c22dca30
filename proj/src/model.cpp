#include "sapp/model.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>

#include "sapp/error.hpp"

namespace sapp {

namespace {

constexpr int kHookAfterBlock[kNumHookLayers] = {-2, -1, 3, 7, 11};

std::vector<BlockSpec> cp_resnet_blocks(std::size_t c1, std::size_t c2, std::size_t c3) {
  return {
      {3, 1, c1, true},  {3, 3, c1, true},  {3, 3, c1, false}, {3, 3, c1, true},
      {3, 1, c2, false}, {1, 1, c2, false}, {1, 1, c2, false}, {1, 1, c2, false},
      {1, 1, c3, false}, {1, 1, c3, false}, {1, 1, c3, false}, {1, 1, c3, false},
  };
}

int stage_of_block(std::size_t block) {
  if (block < 4) return 1;
  if (block < 8) return 2;
  return 3;
}

}  // namespace

int hook_after_block(int layer) {
  if (layer < 0 || layer >= kNumHookLayers) {
    throw std::invalid_argument(fmt::format("hook layer {} outside 0..4", layer));
  }
  return kHookAfterBlock[layer];
}

ModelConfig ModelConfig::full(std::size_t classes) {
  ModelConfig c;
  c.stem_channels = 64;
  c.blocks = cp_resnet_blocks(128, 256, 512);
  c.num_classes = classes;
  return c;
}

ModelConfig ModelConfig::toy(std::size_t classes) {
  ModelConfig c;
  c.stem_channels = 8;
  c.blocks = cp_resnet_blocks(8, 16, 32);
  c.num_classes = classes;
  return c;
}

ModelConfig ModelConfig::preset(std::string_view name, std::size_t classes) {
  if (name == "toy") return toy(classes);
  if (name == "full") return full(classes);
  throw ConfigError(fmt::format("unknown model preset '{}' (expected toy or full)", name));
}

void ModelConfig::validate() const {
  if (in_channels == 0 || stem_channels == 0) throw ConfigError("channel counts must be >= 1");
  if (stem_kernel < 1 || stem_kernel % 2 == 0 || stem_stride < 1) {
    throw ConfigError(fmt::format("stem kernel {} / stride {} invalid (odd kernel, stride >= 1)",
                                  stem_kernel, stem_stride));
  }
  if (blocks.size() != kNumBlocks) {
    throw ConfigError(fmt::format("expected {} residual blocks, got {}", kNumBlocks, blocks.size()));
  }
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const auto& b = blocks[i];
    if (b.channels == 0 || b.k1 < 1 || b.k2 < 1 || b.k1 % 2 == 0 || b.k2 % 2 == 0) {
      throw ConfigError(fmt::format("block {} has invalid kernels ({}, {}) or channels {}", i + 1,
                                    b.k1, b.k2, b.channels));
    }
  }
  if (num_classes == 0) throw ConfigError("num_classes must be >= 1");
  if (!(bn_eps > 0.0) || !(bn_momentum > 0.0 && bn_momentum <= 1.0)) {
    throw ConfigError("batch norm eps must be > 0 and momentum in (0, 1]");
  }
}

ModelGraph ModelGraph::build(const ModelConfig& cfg, SeededRng& rng) {
  cfg.validate();
  ModelGraph g;
  g.cfg_ = cfg;
  g.stem_ = Conv2d("stem.conv",
                   {cfg.in_channels, cfg.stem_channels, cfg.stem_kernel, cfg.stem_stride,
                    cfg.stem_kernel / 2},
                   0);
  g.stem_bn_ = BatchNorm2d("stem.bn", cfg.stem_channels, 0, cfg.bn_eps, cfg.bn_momentum);
  std::size_t channels = cfg.stem_channels;
  for (std::size_t i = 0; i < cfg.blocks.size(); ++i) {
    const auto& b = cfg.blocks[i];
    g.blocks_.emplace_back(fmt::format("rb{}", i + 1), channels, b.channels, b.k1, b.k2, b.pool,
                           stage_of_block(i), cfg.bn_eps, cfg.bn_momentum);
    channels = b.channels;
  }
  g.head_ = Classifier(channels, cfg.num_classes, 4);

  g.stem_.init_he(rng);
  for (auto& b : g.blocks_) b.init(rng);
  g.head_.init(rng);
  return g;
}

Batch<double> ModelGraph::run_hook(int layer, const Batch<double>& x, const HookMap& hooks) {
  auto it = hooks.find(layer);
  if (it == hooks.end() || !it->second.forward) return x;
  Batch<double> y = it->second.forward(x);
  if (y.size() != x.size()) {
    throw std::runtime_error(
        fmt::format("hook at layer {} returned {} samples, expected {}", layer, y.size(), x.size()));
  }
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i].shape() != x[i].shape()) {
      throw std::runtime_error(fmt::format("hook at layer {} returned shape {}, expected {}", layer,
                                           to_string(y[i].shape()), to_string(x[i].shape())));
    }
  }
  applied_[layer] = it->second;
  return y;
}

Batch<double> ModelGraph::hook_backward(int layer, const Batch<double>& g) {
  auto it = applied_.find(layer);
  if (it == applied_.end()) return g;
  if (!it->second.backward) {
    throw std::runtime_error(fmt::format("hook at layer {} has no backward function", layer));
  }
  return it->second.backward(g);
}

Logits ModelGraph::forward(const Batch<double>& input, Mode mode, const HookMap& hooks) {
  if (input.empty()) throw std::invalid_argument("forward: empty batch");
  for (const auto& x : input) {
    if (x.channels() != cfg_.in_channels) {
      throw std::invalid_argument(fmt::format("input has {} channels, model expects {}",
                                              x.channels(), cfg_.in_channels));
    }
  }
  for (const auto& [layer, hook] : hooks) {
    if (layer < 0 || layer >= kNumHookLayers) {
      throw std::invalid_argument(fmt::format("no hook layer {}", layer));
    }
  }
  applied_.clear();
  Batch<double> h = run_hook(0, input, hooks);
  h = stem_relu_.forward(stem_bn_.forward(stem_.forward(h), mode));
  h = run_hook(1, h, hooks);
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    h = blocks_[i].forward(h, mode);
    if (i == 3) h = run_hook(2, h, hooks);
    if (i == 7) h = run_hook(3, h, hooks);
  }
  h = run_hook(4, h, hooks);
  return head_.forward(h);
}

void ModelGraph::zero_grad() {
  for (Parameter* p : parameters()) std::fill(p->grad.begin(), p->grad.end(), 0.0);
}

void ModelGraph::backward(const Logits& grad_logits) {
  Batch<double> g = head_.backward(grad_logits);
  g = hook_backward(4, g);
  for (std::size_t i = blocks_.size(); i-- > 0;) {
    if (i == 7) g = hook_backward(3, g);
    if (i == 3) g = hook_backward(2, g);
    g = blocks_[i].backward(g);
  }
  g = hook_backward(1, g);
  stem_.backward(stem_bn_.backward(stem_relu_.backward(g)));
}

std::vector<Parameter*> ModelGraph::parameters() {
  std::vector<Parameter*> out;
  stem_.collect(out);
  stem_bn_.collect(out);
  for (auto& b : blocks_) b.collect(out);
  head_.collect(out);
  return out;
}

std::vector<Parameter*> ModelGraph::trainable_parameters() {
  auto all = parameters();
  std::erase_if(all, [](const Parameter* p) { return !p->trainable; });
  return all;
}

std::uint64_t ModelGraph::activation_pattern() const {
  std::uint64_t h = 0;
  stem_relu_.pattern(h);
  for (const auto& b : blocks_) b.pattern(h);
  return h;
}

std::size_t ModelGraph::trainable_count() {
  std::size_t n = 0;
  for (const Parameter* p : trainable_parameters()) n += p->size();
  return n;
}

Hook make_plan_hook(AugmentPlan plan, std::optional<Batch<double>> partners) {
  auto state = std::make_shared<std::pair<AugmentPlan, std::optional<Batch<double>>>>(
      std::move(plan), std::move(partners));
  Hook h;
  h.forward = [state](const Batch<double>& x) {
    const auto& [p, snap] = *state;
    return snap ? apply_plan(x, p, *snap) : apply_plan(x, p);
  };
  h.backward = [state](const Batch<double>& g) { return plan_backward(g, state->first); };
  return h;
}

Hook make_augment_hook(AugmentPolicy policy, int layer, SeededRng rng) {
  struct State {
    AugmentPolicy policy;
    int layer;
    SeededRng rng;
    AugmentPlan plan;
  };
  auto state = std::make_shared<State>(State{std::move(policy), layer, rng, {}});
  Hook h;
  h.forward = [state](const Batch<double>& x) {
    state->plan = plan_batch(x.size(), common_shape(x), state->policy, state->layer, state->rng);
    return apply_plan(x, state->plan);
  };
  h.backward = [state](const Batch<double>& g) { return plan_backward(g, state->plan); };
  return h;
}

double cross_entropy(const Logits& logits, std::span<const int> labels, Logits* grad) {
  if (logits.size() != labels.size() || logits.empty()) {
    throw std::invalid_argument("cross_entropy: logits/labels size mismatch");
  }
  const double inv_b = 1.0 / static_cast<double>(logits.size());
  double loss = 0.0;
  if (grad) grad->assign(logits.size(), {});
  for (std::size_t b = 0; b < logits.size(); ++b) {
    const auto& z = logits[b];
    const auto label = static_cast<std::size_t>(labels[b]);
    if (labels[b] < 0 || label >= z.size()) {
      throw std::invalid_argument(fmt::format("label {} outside {} classes", labels[b], z.size()));
    }
    const double zmax = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - zmax);
    const double log_norm = zmax + std::log(sum);
    loss += (log_norm - z[label]) * inv_b;
    if (grad) {
      auto& g = (*grad)[b];
      g.resize(z.size());
      for (std::size_t k = 0; k < z.size(); ++k) {
        g[k] = (std::exp(z[k] - log_norm) - (k == label ? 1.0 : 0.0)) * inv_b;
      }
    }
  }
  return loss;
}

std::vector<int> predict(const Logits& logits) {
  std::vector<int> out;
  out.reserve(logits.size());
  for (const auto& z : logits) {
    out.push_back(static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin()));
  }
  return out;
}

std::size_t count_trainable_parameters(const ModelConfig& cfg) {
  cfg.validate();
  auto k2 = [](int k) { return static_cast<std::size_t>(k * k); };
  std::size_t n = cfg.in_channels * cfg.stem_channels * k2(cfg.stem_kernel) + 2 * cfg.stem_channels;
  std::size_t in = cfg.stem_channels;
  for (const auto& b : cfg.blocks) {
    const std::size_t out = b.channels;
    n += in * out * k2(b.k1) + 2 * out;
    n += out * out * k2(b.k2) + 2 * out;
    if (in != out) n += in * out + 2 * out;
    in = out;
  }
  return n + in * cfg.num_classes + cfg.num_classes;
}

int receptive_field(const ModelConfig& cfg) {
  cfg.validate();
  int rf = 1;
  int jump = 1;
  auto layer = [&](int kernel, int stride) {
    rf += (kernel - 1) * jump;
    jump *= stride;
  };
  layer(cfg.stem_kernel, cfg.stem_stride);
  for (const auto& b : cfg.blocks) {
    layer(b.k1, 1);
    layer(b.k2, 1);
    if (b.pool) layer(2, 2);
  }
  return rf;
}

Shape hook_shape(const ModelConfig& cfg, const Shape& input, int layer) {
  cfg.validate();
  const int after = hook_after_block(layer);
  if (layer == 0) return input;
  const kernels::ConvGeometry stem{cfg.in_channels, cfg.stem_channels, cfg.stem_kernel,
                                   cfg.stem_stride, cfg.stem_kernel / 2};
  Shape s = stem.out_shape(input);
  for (int i = 0; i <= after; ++i) {
    const auto& b = cfg.blocks[static_cast<std::size_t>(i)];
    s.channels = b.channels;
    if (b.pool) {
      s.frames /= 2;
      s.bins /= 2;
    }
  }
  return s;
}

GradCheckResult grad_check(const ModelGraph& model, const Batch<double>& inputs,
                           std::span<const int> labels, const HookMap& hooks, double epsilon,
                           std::size_t samples, SeededRng& rng) {
  ModelGraph g = model;
  auto loss_at = [&]() {
    const double l = cross_entropy(g.forward(inputs, Mode::kTrain, hooks), labels);
    if (!std::isfinite(l)) throw NumericError("grad_check: non-finite loss");
    return l;
  };

  g.zero_grad();
  Logits dlogits;
  const double base = cross_entropy(g.forward(inputs, Mode::kTrain, hooks), labels, &dlogits);
  if (!std::isfinite(base)) throw NumericError("grad_check: non-finite loss");
  g.backward(dlogits);

  auto params = g.trainable_parameters();
  std::vector<std::size_t> offsets;
  std::size_t total = 0;
  for (const Parameter* p : params) {
    offsets.push_back(total);
    total += p->size();
  }

  const std::uint64_t base_pattern = g.activation_pattern();
  GradCheckResult result;
  for (std::size_t draws = 0; result.checked < samples; ++draws) {
    if (draws >= 10 * samples) {
      throw NumericError(fmt::format("grad_check: {} of {} draws crossed a kink", result.kinks_skipped, draws));
    }
    const auto flat = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(total) - 1));
    const auto pi = static_cast<std::size_t>(
        std::upper_bound(offsets.begin(), offsets.end(), flat) - offsets.begin() - 1);
    Parameter& p = *params[pi];
    const std::size_t idx = flat - offsets[pi];
    const double saved = p.value[idx];
    p.value[idx] = saved + epsilon;
    const double up = loss_at();
    const bool up_same = g.activation_pattern() == base_pattern;
    p.value[idx] = saved - epsilon;
    const double down = loss_at();
    const bool down_same = g.activation_pattern() == base_pattern;
    p.value[idx] = saved;
    if (!up_same || !down_same) {
      ++result.kinks_skipped;
      continue;
    }

    const double numeric = (up - down) / (2.0 * epsilon);
    const double analytic = p.grad[idx];
    const double denom = std::max({std::abs(numeric), std::abs(analytic), kGradCheckFloor});
    const double rel = std::abs(numeric - analytic) / denom;
    ++result.checked;
    if (rel > result.max_rel_error) {
      result.max_rel_error = rel;
      result.worst = fmt::format("{}[{}] analytic={:.6e} numeric={:.6e}", p.name, idx, analytic, numeric);
    }
  }
  return result;
}

}  // namespace sapp
