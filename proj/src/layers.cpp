#include "sapp/layers.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace sapp {

namespace {

std::size_t product(const std::vector<std::size_t>& dims) {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
}

Batch<double> add(const Batch<double>& a, const Batch<double>& b) {
  Batch<double> out = a;
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto d = out[i].data();
    auto s = b[i].data();
    for (std::size_t j = 0; j < d.size(); ++j) d[j] += s[j];
  }
  return out;
}

}  // namespace

Parameter::Parameter(std::string n, std::vector<std::size_t> d, int stage_id, bool train)
    : name(std::move(n)), dims(std::move(d)), stage(stage_id), trainable(train) {
  value.assign(product(dims), 0.0);
  grad.assign(value.size(), 0.0);
}

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(std::string name, kernels::ConvGeometry g, int stage)
    : geom_(g),
      weight_(std::move(name) + ".weight",
              {g.out_channels, g.in_channels, static_cast<std::size_t>(g.kernel),
               static_cast<std::size_t>(g.kernel)},
              stage) {}

void Conv2d::init_he(SeededRng& rng) {
  const double fan_in = static_cast<double>(geom_.in_channels * geom_.kernel * geom_.kernel);
  const double sd = std::sqrt(2.0 / fan_in);
  for (double& w : weight_.value) w = sd * rng.normal();
}

Batch<double> Conv2d::forward(const Batch<double>& x) {
  input_ = x;
  return kernels::conv2d_forward(x, weight_.value, geom_);
}

Batch<double> Conv2d::backward(const Batch<double>& grad_out) {
  kernels::conv2d_backward_weight(grad_out, input_, geom_, weight_.grad);
  return kernels::conv2d_backward_input(grad_out, weight_.value, geom_, input_.front().shape());
}

// ----------------------------------------------------------- BatchNorm2d

BatchNorm2d::BatchNorm2d(std::string name, std::size_t channels, int stage, double eps,
                         double momentum)
    : eps_(eps),
      momentum_(momentum),
      gamma_(name + ".gamma", {channels}, stage),
      beta_(name + ".beta", {channels}, stage),
      running_mean_(name + ".running_mean", {channels}, stage, false),
      running_var_(name + ".running_var", {channels}, stage, false) {
  std::fill(gamma_.value.begin(), gamma_.value.end(), 1.0);
  std::fill(running_var_.value.begin(), running_var_.value.end(), 1.0);
}

void BatchNorm2d::collect(std::vector<Parameter*>& out) {
  out.push_back(&gamma_);
  out.push_back(&beta_);
  out.push_back(&running_mean_);
  out.push_back(&running_var_);
}

Batch<double> BatchNorm2d::forward(const Batch<double>& x, Mode mode) {
  mode_ = mode;
  const std::size_t channels = gamma_.size();
  if (x.empty() || x.front().channels() != channels) {
    throw std::invalid_argument(fmt::format("{}: expected {} channels", gamma_.name, channels));
  }
  const std::size_t plane = x.front().shape().plane();
  const double n = static_cast<double>(x.size() * plane);
  xhat_.assign(x.begin(), x.end());
  inv_std_.assign(channels, 0.0);
  Batch<double> out(x.size());
  for (std::size_t b = 0; b < x.size(); ++b) out[b] = Tensor64(x[b].shape());

  const auto nc = static_cast<std::ptrdiff_t>(channels);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ci = 0; ci < nc; ++ci) {
    const auto c = static_cast<std::size_t>(ci);
    double mean = 0.0, var = 0.0;
    if (mode == Mode::kTrain) {
      for (const auto& t : x)
        for (double v : t.channel(c)) mean += v;
      mean /= n;
      for (const auto& t : x)
        for (double v : t.channel(c)) var += (v - mean) * (v - mean);
      var /= n;
      const double unbiased = n > 1.0 ? var * n / (n - 1.0) : var;
      running_mean_.value[c] = (1.0 - momentum_) * running_mean_.value[c] + momentum_ * mean;
      running_var_.value[c] = (1.0 - momentum_) * running_var_.value[c] + momentum_ * unbiased;
    } else {
      mean = running_mean_.value[c];
      var = running_var_.value[c];
    }
    const double inv = 1.0 / std::sqrt(var + eps_);
    inv_std_[c] = inv;
    const double g = gamma_.value[c], be = beta_.value[c];
    for (std::size_t b = 0; b < x.size(); ++b) {
      auto src = x[b].channel(c);
      auto xh = xhat_[b].channel(c);
      auto dst = out[b].channel(c);
      for (std::size_t j = 0; j < src.size(); ++j) {
        xh[j] = (src[j] - mean) * inv;
        dst[j] = g * xh[j] + be;
      }
    }
  }
  return out;
}

Batch<double> BatchNorm2d::backward(const Batch<double>& grad_out) {
  const std::size_t channels = gamma_.size();
  const std::size_t plane = grad_out.front().shape().plane();
  const double n = static_cast<double>(grad_out.size() * plane);
  Batch<double> grad_in(grad_out.size());
  for (std::size_t b = 0; b < grad_out.size(); ++b) grad_in[b] = Tensor64(grad_out[b].shape());

  const auto nc = static_cast<std::ptrdiff_t>(channels);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ci = 0; ci < nc; ++ci) {
    const auto c = static_cast<std::size_t>(ci);
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (std::size_t b = 0; b < grad_out.size(); ++b) {
      auto dy = grad_out[b].channel(c);
      auto xh = xhat_[b].channel(c);
      for (std::size_t j = 0; j < dy.size(); ++j) {
        sum_dy += dy[j];
        sum_dy_xhat += dy[j] * xh[j];
      }
    }
    gamma_.grad[c] += sum_dy_xhat;
    beta_.grad[c] += sum_dy;
    const double scale = gamma_.value[c] * inv_std_[c];
    for (std::size_t b = 0; b < grad_out.size(); ++b) {
      auto dy = grad_out[b].channel(c);
      auto xh = xhat_[b].channel(c);
      auto dx = grad_in[b].channel(c);
      if (mode_ == Mode::kTrain) {
        for (std::size_t j = 0; j < dy.size(); ++j)
          dx[j] = scale / n * (n * dy[j] - sum_dy - xh[j] * sum_dy_xhat);
      } else {
        for (std::size_t j = 0; j < dy.size(); ++j) dx[j] = scale * dy[j];
      }
    }
  }
  return grad_in;
}

// ------------------------------------------------------------------ ReLU

Batch<double> ReLU::forward(const Batch<double>& x) {
  output_ = x;
  for (auto& t : output_)
    for (double& v : t.data()) v = v < 0.0 ? 0.0 : v;
  return output_;
}

Batch<double> ReLU::backward(const Batch<double>& grad_out) const {
  Batch<double> g = grad_out;
  for (std::size_t b = 0; b < g.size(); ++b) {
    auto d = g[b].data();
    auto o = output_[b].data();
    for (std::size_t j = 0; j < d.size(); ++j)
      if (!(o[j] > 0.0)) d[j] = 0.0;
  }
  return g;
}

namespace {

void mix(std::uint64_t& h, std::uint64_t v) {
  h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
}

}  // namespace

void ReLU::pattern(std::uint64_t& h) const {
  for (const auto& t : output_) {
    std::uint64_t word = 0;
    std::size_t n = 0;
    for (double v : t.data()) {
      word = (word << 1) | (v > 0.0 ? 1u : 0u);
      if (++n % 64 == 0) mix(h, word), word = 0;
    }
    mix(h, word);
  }
}

// -------------------------------------------------------------- MaxPool2

Batch<double> MaxPool2::forward(const Batch<double>& x) {
  in_shapes_.clear();
  argmax_.assign(x.size(), {});
  Batch<double> out;
  for (std::size_t b = 0; b < x.size(); ++b) {
    const Shape s = x[b].shape();
    if (s.frames < 2 || s.bins < 2) {
      throw std::invalid_argument(fmt::format("max pooling needs >= 2x2 input, got {}", to_string(s)));
    }
    in_shapes_.push_back(s);
    Tensor64 y(Shape{s.channels, s.frames / 2, s.bins / 2});
    auto& arg = argmax_[b];
    arg.resize(y.size());
    std::size_t k = 0;
    for (std::size_t c = 0; c < s.channels; ++c)
      for (std::size_t r = 0; r < y.frames(); ++r)
        for (std::size_t q = 0; q < y.bins(); ++q, ++k) {
          std::size_t best = (c * s.frames + 2 * r) * s.bins + 2 * q;
          const std::size_t cand[3] = {best + 1, best + s.bins, best + s.bins + 1};
          for (std::size_t idx : cand)
            if (!(x[b].data()[idx] <= x[b].data()[best])) best = idx;
          arg[k] = best;
          y.data()[k] = x[b].data()[best];
        }
    out.push_back(std::move(y));
  }
  return out;
}

Batch<double> MaxPool2::backward(const Batch<double>& grad_out) const {
  Batch<double> g;
  for (std::size_t b = 0; b < grad_out.size(); ++b) {
    Tensor64 t(in_shapes_[b]);
    const auto src = grad_out[b].data();
    for (std::size_t k = 0; k < src.size(); ++k) t.data()[argmax_[b][k]] += src[k];
    g.push_back(std::move(t));
  }
  return g;
}

void MaxPool2::pattern(std::uint64_t& h) const {
  for (const auto& arg : argmax_)
    for (std::size_t i : arg) mix(h, i);
}

// --------------------------------------------------------- ResidualBlock

ResidualBlock::ResidualBlock(const std::string& name, std::size_t in_channels,
                             std::size_t out_channels, int k1, int k2, bool pool, int stage,
                             double bn_eps, double bn_momentum)
    : conv1_(name + ".conv1", {in_channels, out_channels, k1, 1, k1 / 2}, stage),
      conv2_(name + ".conv2", {out_channels, out_channels, k2, 1, k2 / 2}, stage),
      bn1_(name + ".bn1", out_channels, stage, bn_eps, bn_momentum),
      bn2_(name + ".bn2", out_channels, stage, bn_eps, bn_momentum) {
  if (in_channels != out_channels) {
    proj_.emplace(name + ".proj", kernels::ConvGeometry{in_channels, out_channels, 1, 1, 0}, stage);
    proj_bn_.emplace(name + ".proj_bn", out_channels, stage, bn_eps, bn_momentum);
  }
  if (pool) pool_.emplace();
}

void ResidualBlock::init(SeededRng& rng) {
  conv1_.init_he(rng);
  conv2_.init_he(rng);
  if (proj_) proj_->init_he(rng);
}

Batch<double> ResidualBlock::forward(const Batch<double>& x, Mode mode) {
  Batch<double> h = relu1_.forward(bn1_.forward(conv1_.forward(x), mode));
  h = bn2_.forward(conv2_.forward(h), mode);
  Batch<double> out = proj_ ? add(h, proj_bn_->forward(proj_->forward(x), mode)) : add(h, x);
  out = relu_out_.forward(out);
  if (pool_) out = pool_->forward(out);
  return out;
}

Batch<double> ResidualBlock::backward(const Batch<double>& grad_out) {
  Batch<double> g = pool_ ? pool_->backward(grad_out) : grad_out;
  g = relu_out_.backward(g);
  Batch<double> gx = conv1_.backward(bn1_.backward(relu1_.backward(conv2_.backward(bn2_.backward(g)))));
  Batch<double> gs = proj_ ? proj_->backward(proj_bn_->backward(g)) : g;
  return add(gx, gs);
}

void ResidualBlock::collect(std::vector<Parameter*>& out) {
  conv1_.collect(out);
  bn1_.collect(out);
  conv2_.collect(out);
  bn2_.collect(out);
  if (proj_) {
    proj_->collect(out);
    proj_bn_->collect(out);
  }
}

void ResidualBlock::pattern(std::uint64_t& h) const {
  relu1_.pattern(h);
  relu_out_.pattern(h);
  if (pool_) pool_->pattern(h);
}

// ------------------------------------------------------------ Classifier

Classifier::Classifier(std::size_t in_channels, std::size_t classes, int stage)
    : in_channels_(in_channels),
      classes_(classes),
      weight_("head.fc.weight", {classes, in_channels}, stage),
      bias_("head.fc.bias", {classes}, stage) {}

void Classifier::init(SeededRng& rng) {
  const double sd = std::sqrt(1.0 / static_cast<double>(in_channels_));
  for (double& w : weight_.value) w = sd * rng.normal();
}

std::vector<std::vector<double>> Classifier::forward(const Batch<double>& x) {
  in_shapes_.clear();
  pooled_.assign(x.size(), std::vector<double>(in_channels_, 0.0));
  std::vector<std::vector<double>> logits(x.size(), std::vector<double>(classes_, 0.0));
  for (std::size_t b = 0; b < x.size(); ++b) {
    if (x[b].channels() != in_channels_) {
      throw std::invalid_argument(fmt::format("classifier expects {} channels, got {}",
                                              in_channels_, x[b].channels()));
    }
    in_shapes_.push_back(x[b].shape());
    const double inv = 1.0 / static_cast<double>(x[b].shape().plane());
    for (std::size_t c = 0; c < in_channels_; ++c) {
      double s = 0.0;
      for (double v : x[b].channel(c)) s += v;
      pooled_[b][c] = s * inv;
    }
    for (std::size_t k = 0; k < classes_; ++k) {
      double acc = bias_.value[k];
      for (std::size_t c = 0; c < in_channels_; ++c)
        acc += weight_.value[k * in_channels_ + c] * pooled_[b][c];
      logits[b][k] = acc;
    }
  }
  return logits;
}

Batch<double> Classifier::backward(const std::vector<std::vector<double>>& grad_logits) {
  Batch<double> grad_in;
  for (std::size_t b = 0; b < grad_logits.size(); ++b) {
    std::vector<double> gp(in_channels_, 0.0);
    for (std::size_t k = 0; k < classes_; ++k) {
      const double g = grad_logits[b][k];
      bias_.grad[k] += g;
      for (std::size_t c = 0; c < in_channels_; ++c) {
        weight_.grad[k * in_channels_ + c] += g * pooled_[b][c];
        gp[c] += g * weight_.value[k * in_channels_ + c];
      }
    }
    Tensor64 t(in_shapes_[b]);
    const double inv = 1.0 / static_cast<double>(in_shapes_[b].plane());
    for (std::size_t c = 0; c < in_channels_; ++c)
      for (double& v : t.channel(c)) v = gp[c] * inv;
    grad_in.push_back(std::move(t));
  }
  return grad_in;
}

void Classifier::collect(std::vector<Parameter*>& out) {
  out.push_back(&weight_);
  out.push_back(&bias_);
}

}  // namespace sapp
