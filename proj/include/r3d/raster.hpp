#pragma once

#include <algorithm>
#include <cassert>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace r3d {

/// Row-major 2D raster.
template <typename T>
class Raster {
 public:
  Raster() = default;
  Raster(int width, int height, T fill = T{})
      : width_(width), height_(height) {
    if (width <= 0 || height <= 0) {
      throw std::invalid_argument("raster dimensions must be positive");
    }
    data_.assign(static_cast<std::size_t>(width) * height, fill);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(int x, int y) {
    assert(InBounds(x, y));
    return data_[static_cast<std::size_t>(y) * width_ + x];
  }
  const T& operator()(int x, int y) const {
    assert(InBounds(x, y));
    return data_[static_cast<std::size_t>(y) * width_ + x];
  }

  /// Edge-replicating accessor.
  const T& Clamped(int x, int y) const {
    return (*this)(std::clamp(x, 0, width_ - 1), std::clamp(y, 0, height_ - 1));
  }

  bool InBounds(int x, int y) const {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }

  bool SameShape(const Raster& other) const {
    return width_ == other.width_ && height_ == other.height_;
  }
  template <typename U>
  bool SameShape(const Raster<U>& other) const {
    return width_ == other.width() && height_ == other.height();
  }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  std::span<T> row(int y) {
    return std::span<T>(data_).subspan(static_cast<std::size_t>(y) * width_,
                                       width_);
  }
  std::span<const T> row(int y) const {
    return std::span<const T>(data_).subspan(
        static_cast<std::size_t>(y) * width_, width_);
  }

  bool operator==(const Raster&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

using ScoreGrid = Raster<double>;
using CountGrid = Raster<double>;
/// Grayscale intensities in [0, 1].
using GrayImage = Raster<float>;
/// Per-pixel z-depth in meters, 0 = no data.
using DepthMap = Raster<float>;

/// A detector response at an integer pixel.
struct Detection {
  int x = 0;
  int y = 0;
  double confidence = 0.0;

  bool operator==(const Detection&) const = default;
};

}  // namespace r3d
