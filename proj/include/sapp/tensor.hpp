#pragma once

#include <cmath>
#include <cstddef>
#include <cstring>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <fmt/format.h>

namespace sapp {

/// Dimensions of a (C, T, F) feature tensor. Rank-2 maps are C = 1.
struct Shape {
  std::size_t channels = 1;
  std::size_t frames = 1;
  std::size_t bins = 1;

  constexpr std::size_t size() const { return channels * frames * bins; }
  constexpr std::size_t plane() const { return frames * bins; }
  friend constexpr bool operator==(const Shape&, const Shape&) = default;
};

inline std::string to_string(const Shape& s) {
  return fmt::format("{}x{}x{}", s.channels, s.frames, s.bins);
}

/// Dense row-major (C, T, F) array. Used as FeatureTensor (float) for
/// spectrograms and file I/O, and with double inside the model.
template <typename Scalar>
class BasicTensor {
 public:
  using value_type = Scalar;

  BasicTensor() = default;

  explicit BasicTensor(Shape shape, Scalar fill = Scalar(0)) : shape_(shape) {
    check_dims(shape);
    data_.assign(shape.size(), fill);
  }

  BasicTensor(Shape shape, std::vector<Scalar> data) : shape_(shape), data_(std::move(data)) {
    check_dims(shape);
    if (data_.size() != shape.size()) {
      throw std::invalid_argument(fmt::format("tensor data length {} does not match shape {}",
                                              data_.size(), to_string(shape)));
    }
  }

  const Shape& shape() const { return shape_; }
  std::size_t channels() const { return shape_.channels; }
  std::size_t frames() const { return shape_.frames; }
  std::size_t bins() const { return shape_.bins; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<Scalar> data() { return data_; }
  std::span<const Scalar> data() const { return data_; }
  const std::vector<Scalar>& values() const { return data_; }

  Scalar& operator()(std::size_t c, std::size_t t, std::size_t f) {
    return data_[(c * shape_.frames + t) * shape_.bins + f];
  }
  Scalar operator()(std::size_t c, std::size_t t, std::size_t f) const {
    return data_[(c * shape_.frames + t) * shape_.bins + f];
  }

  std::span<Scalar> channel(std::size_t c) {
    return std::span<Scalar>(data_).subspan(c * shape_.plane(), shape_.plane());
  }
  std::span<const Scalar> channel(std::size_t c) const {
    return std::span<const Scalar>(data_).subspan(c * shape_.plane(), shape_.plane());
  }

  bool all_finite() const {
    for (Scalar v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  template <typename Other>
  BasicTensor<Other> cast() const {
    std::vector<Other> out(data_.begin(), data_.end());
    return BasicTensor<Other>(shape_, std::move(out));
  }

  friend bool operator==(const BasicTensor&, const BasicTensor&) = default;

 private:
  static void check_dims(const Shape& s) {
    if (s.channels == 0 || s.frames == 0 || s.bins == 0) {
      throw std::invalid_argument(fmt::format("tensor dims must be >= 1, got {}", to_string(s)));
    }
  }

  Shape shape_{};
  std::vector<Scalar> data_;
};

using FeatureTensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

/// A mini-batch of per-sample tensors sharing one shape.
template <typename Scalar>
using Batch = std::vector<BasicTensor<Scalar>>;

/// Bitwise comparison; distinguishes -0.0 from 0.0 and compares NaN payloads.
template <typename Scalar>
bool bit_equal(const BasicTensor<Scalar>& a, const BasicTensor<Scalar>& b) {
  if (a.shape() != b.shape()) return false;
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (std::memcmp(&x[i], &y[i], sizeof(Scalar)) != 0) return false;
  }
  return true;
}

}  // namespace sapp
