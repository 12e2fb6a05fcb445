#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cassikit {

/// Dense channel-major 3D array: `channels` planes of `height` x `width`
/// values, row-major within a plane, planes contiguous.
///
/// TensorT<float> is the working precision; TensorT<double> exists for the
/// high-precision evaluation mode used by gradient checks.
template <typename T>
class TensorT {
  static_assert(std::is_floating_point_v<T>);

 public:
  TensorT() = default;

  TensorT(int channels, int height, int width)
      : channels_(channels), height_(height), width_(width) {
    if (channels <= 0 || height <= 0 || width <= 0) {
      throw std::invalid_argument("tensor dimensions must be positive, got " +
                                  shape_string(channels, height, width));
    }
    values_.assign(static_cast<std::size_t>(channels) * height * width, T(0));
  }

  static TensorT full(int channels, int height, int width, T value) {
    TensorT t(channels, height, width);
    t.values_.assign(t.values_.size(), value);
    return t;
  }

  /// Takes ownership of `values`; validates length and finiteness.
  static TensorT from_values(int channels, int height, int width,
                             std::vector<T> values) {
    TensorT t(channels, height, width);
    if (values.size() != t.values_.size()) {
      throw std::invalid_argument(
          "value count " + std::to_string(values.size()) +
          " does not match shape " + shape_string(channels, height, width));
    }
    t.values_ = std::move(values);
    t.require_finite("tensor values");
    return t;
  }

  int channels() const { return channels_; }
  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return values_.size(); }
  std::size_t plane_size() const {
    return static_cast<std::size_t>(height_) * width_;
  }

  bool same_shape(const TensorT& other) const {
    return channels_ == other.channels_ && height_ == other.height_ &&
           width_ == other.width_;
  }

  std::string shape_string() const {
    return shape_string(channels_, height_, width_);
  }

  const T& operator()(int c, int y, int x) const {
    return values_[index(c, y, x)];
  }
  T& operator()(int c, int y, int x) { return values_[index(c, y, x)]; }

  std::span<const T> plane(int c) const {
    return {values_.data() + static_cast<std::size_t>(c) * plane_size(),
            plane_size()};
  }
  std::span<T> plane(int c) {
    return {values_.data() + static_cast<std::size_t>(c) * plane_size(),
            plane_size()};
  }

  std::span<const T> row(int c, int y) const {
    return {values_.data() + index(c, y, 0), static_cast<std::size_t>(width_)};
  }
  std::span<T> row(int c, int y) {
    return {values_.data() + index(c, y, 0), static_cast<std::size_t>(width_)};
  }

  const T* data() const { return values_.data(); }
  T* data() { return values_.data(); }
  const std::vector<T>& values() const { return values_; }

  void fill(T value) { values_.assign(values_.size(), value); }

  /// Throws if any entry is NaN or infinite. `what` names the tensor in the
  /// diagnostic.
  void require_finite(const std::string& what) const {
    for (std::size_t i = 0; i < values_.size(); ++i) {
      if (!std::isfinite(values_[i])) {
        throw std::runtime_error(what + ": non-finite value at flat index " +
                                 std::to_string(i));
      }
    }
  }

  template <typename U>
  TensorT<U> cast() const {
    std::vector<U> out(values_.size());
    for (std::size_t i = 0; i < values_.size(); ++i) {
      out[i] = static_cast<U>(values_[i]);
    }
    return TensorT<U>::from_values(channels_, height_, width_, std::move(out));
  }

  bool operator==(const TensorT& other) const {
    return same_shape(other) && values_ == other.values_;
  }

 private:
  std::size_t index(int c, int y, int x) const {
    return (static_cast<std::size_t>(c) * height_ + y) * width_ + x;
  }

  static std::string shape_string(int c, int h, int w) {
    return "(" + std::to_string(c) + ", " + std::to_string(h) + ", " +
           std::to_string(w) + ")";
  }

  int channels_ = 0;
  int height_ = 0;
  int width_ = 0;
  std::vector<T> values_;
};

using Tensor = TensorT<float>;

/// Copy `count` channel planes starting at `first` into a new tensor.
template <typename T>
TensorT<T> slice_channels(const TensorT<T>& t, int first, int count) {
  if (first < 0 || count <= 0 || first + count > t.channels()) {
    throw std::invalid_argument("channel slice [" + std::to_string(first) +
                                ", " + std::to_string(first + count) +
                                ") out of range for " + t.shape_string());
  }
  TensorT<T> out(count, t.height(), t.width());
  for (int c = 0; c < count; ++c) {
    auto src = t.plane(first + c);
    std::copy(src.begin(), src.end(), out.plane(c).begin());
  }
  return out;
}

}  // namespace cassikit
