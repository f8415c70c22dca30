#include "sapp/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <fmt/format.h>

#include "sapp/error.hpp"

namespace sapp {

TrainConfig TrainConfig::full_schedule() {
  TrainConfig c;
  c.epochs = 350;
  c.decay_start = 50;
  c.decay_end = 250;
  return c;
}

std::size_t TrainConfig::resolved_decay_start() const {
  if (decay_start) return *decay_start;
  return static_cast<std::size_t>(std::llround(50.0 * static_cast<double>(epochs) / 350.0));
}

std::size_t TrainConfig::resolved_decay_end() const {
  if (decay_end) return *decay_end;
  return std::max<std::size_t>(
      resolved_decay_start() + 1,
      static_cast<std::size_t>(std::llround(250.0 * static_cast<double>(epochs) / 350.0)));
}

void TrainConfig::validate() const {
  if (epochs == 0) throw ConfigError("trainer.epochs must be positive");
  const auto s = resolved_decay_start(), e = resolved_decay_end();
  if (!(s < e && e <= epochs)) {
    throw ConfigError(fmt::format("decay schedule needs decay_start < decay_end <= epochs, got {} / {} / {}", s, e, epochs));
  }
  if (!(lr_floor < lr_init) || !(lr_floor >= 0.0)) {
    throw ConfigError(fmt::format("need 0 <= lr_floor < lr_init, got {} / {}", lr_floor, lr_init));
  }
  if (batch_size == 0) throw ConfigError("trainer.batch_size must be positive");
  if (seeds.empty()) throw ConfigError("trainer.seeds must list at least one seed");
  if (weight_decay < 0.0 || grad_clip < 0.0) throw ConfigError("weight_decay and grad_clip must be >= 0");
  try {
    policy.validate();
  } catch (const std::invalid_argument& ex) {
    throw ConfigError(ex.what());
  }
}

double lr_at(std::size_t epoch, const TrainConfig& cfg) {
  if (epoch >= cfg.epochs) {
    throw std::invalid_argument(fmt::format("epoch {} outside [0, {})", epoch, cfg.epochs));
  }
  const auto s = cfg.resolved_decay_start(), e = cfg.resolved_decay_end();
  if (epoch < s) return cfg.lr_init;
  if (epoch >= e) return cfg.lr_floor;
  const double frac = static_cast<double>(epoch - s) / static_cast<double>(e - s);
  return cfg.lr_init + (cfg.lr_floor - cfg.lr_init) * frac;
}

Adam::Adam(std::vector<Parameter*> params, double beta1, double beta2, double eps)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto* p : params_) {
    m_.emplace_back(p->size(), 0.0);
    v_.emplace_back(p->size(), 0.0);
  }
}

void Adam::step(double lr, double weight_decay, double grad_clip) {
  ++t_;
  double scale = 1.0;
  if (grad_clip > 0.0) {
    double sq = 0.0;
    for (const auto* p : params_)
      for (std::size_t i = 0; i < p->size(); ++i) {
        const double g = p->grad[i] + weight_decay * p->value[i];
        sq += g * g;
      }
    const double norm = std::sqrt(sq);
    if (norm > grad_clip) scale = grad_clip / norm;
  }
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Parameter& p = *params_[k];
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double g = scale * (p.grad[i] + weight_decay * p.value[i]);
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
      const double mh = m[i] / bc1;
      const double vh = v[i] / bc2;
      p.value[i] -= lr * mh / (std::sqrt(vh) + eps_);
    }
  }
}

Batch<double> to_batch(const LabeledSet& set, std::span<const std::size_t> indices) {
  Batch<double> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(set.features.at(i).cast<double>());
  return out;
}

double evaluate(ModelGraph& model, const LabeledSet& set, std::size_t batch_size) {
  if (set.size() == 0) throw std::invalid_argument("evaluate: empty set");
  if (batch_size == 0) throw std::invalid_argument("evaluate: batch size must be positive");
  std::size_t correct = 0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < set.size(); start += batch_size) {
    idx.clear();
    for (std::size_t i = start; i < std::min(set.size(), start + batch_size); ++i) idx.push_back(i);
    const auto pred = predict(model.forward(to_batch(set, idx), Mode::kEval));
    for (std::size_t j = 0; j < idx.size(); ++j) correct += pred[j] == set.labels[idx[j]] ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(set.size());
}

SeedRun train_seed(const ModelConfig& model_cfg, const LabeledSet& train, const LabeledSet& test,
                   const TrainConfig& cfg, std::uint64_t seed, const EpochCallback& on_epoch) {
  cfg.validate();
  if (train.size() == 0 || test.size() == 0) {
    throw std::invalid_argument("training needs non-empty train and test splits");
  }
  SeededRng init(seed, stream_id(0, 0, StreamPurpose::kInit));
  SeedRun run{ModelGraph::build(model_cfg, init), {}, {seed, 0.0, 0.0}};
  ModelGraph& model = run.model;
  Adam opt(model.trainable_parameters());

  std::vector<std::size_t> order(train.size());
  std::vector<std::size_t> idx;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = lr_at(epoch, cfg);
    std::iota(order.begin(), order.end(), std::size_t{0});
    SeededRng shuffle(seed, stream_id(epoch, 0, StreamPurpose::kShuffle));
    for (std::size_t i = order.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_int(shuffle, 0, static_cast<std::int64_t>(i) - 1));
      std::swap(order[i - 1], order[j]);
    }

    double loss_sum = 0.0;
    std::size_t correct = 0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_index) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      idx.assign(order.begin() + static_cast<std::ptrdiff_t>(start),
                 order.begin() + static_cast<std::ptrdiff_t>(end));
      std::vector<int> labels;
      for (std::size_t i : idx) labels.push_back(train.labels[i]);

      HookMap hooks;
      if (cfg.policy.enabled()) {
        SeededRng layer_rng(seed, stream_id(epoch, batch_index, StreamPurpose::kLayer));
        const int layer = choose_layer(cfg.policy.layer_set, layer_rng);
        hooks[layer] = make_augment_hook(
            cfg.policy, layer, SeededRng(seed, stream_id(epoch, batch_index, StreamPurpose::kMask)));
      }

      const Logits logits = model.forward(to_batch(train, idx), Mode::kTrain, hooks);
      Logits grad;
      const double loss = cross_entropy(logits, labels, &grad);
      if (!std::isfinite(loss)) {
        throw NumericError(fmt::format("non-finite loss {} at seed {}, epoch {}, batch {}, lr {}",
                                       loss, seed, epoch, batch_index, lr));
      }
      model.zero_grad();
      model.backward(grad);
      opt.step(lr, cfg.weight_decay, cfg.grad_clip);

      loss_sum += loss * static_cast<double>(idx.size());
      const auto pred = predict(logits);
      for (std::size_t j = 0; j < idx.size(); ++j) correct += pred[j] == labels[j] ? 1 : 0;
    }

    EpochRecord rec;
    rec.seed = seed;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    rec.train_accuracy = static_cast<double>(correct) / static_cast<double>(order.size());
    rec.test_accuracy = evaluate(model, test);
    run.curve.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  run.result.test_accuracy = run.curve.back().test_accuracy;
  run.result.final_loss = run.curve.back().train_loss;
  return run;
}

std::pair<double, double> mean_std(std::span<const double> values) {
  if (values.empty()) return {0.0, 0.0};
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() == 1) return {mean, 0.0};
  double sq = 0.0;
  for (double v : values) sq += (v - mean) * (v - mean);
  return {mean, std::sqrt(sq / (n - 1.0))};
}

RunReport train(const ModelConfig& model_cfg, const LabeledSet& train_set, const LabeledSet& test,
                const TrainConfig& cfg, const EpochCallback& on_epoch,
                const std::function<void(std::uint64_t, ModelGraph&)>& on_model) {
  cfg.validate();
  RunReport report;
  std::vector<double> accs;
  for (std::uint64_t seed : cfg.seeds) {
    SeedRun run = train_seed(model_cfg, train_set, test, cfg, seed, on_epoch);
    report.curves.insert(report.curves.end(), run.curve.begin(), run.curve.end());
    report.seeds.push_back(run.result);
    accs.push_back(run.result.test_accuracy);
    if (on_model) on_model(seed, run.model);
  }
  std::tie(report.mean, report.stddev) = mean_std(accs);
  return report;
}

}  // namespace sapp
