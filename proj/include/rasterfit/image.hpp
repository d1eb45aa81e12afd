#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "rasterfit/error.hpp"

namespace rasterfit {

/// Interleaved row-major image with a fixed channel count.
template <typename T>
class BasicImage {
 public:
  BasicImage() = default;
  BasicImage(int width, int height, int channels, T fill = T(0))
      : width_(width),
        height_(height),
        channels_(channels),
        data_(static_cast<std::size_t>(width) * height * channels, fill) {}

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return channels_; }
  bool empty() const noexcept { return data_.empty(); }
  std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(width_) * height_;
  }

  std::size_t index(int x, int y, int c = 0) const noexcept {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }
  T& at(int x, int y, int c = 0) noexcept { return data_[index(x, y, c)]; }
  const T& at(int x, int y, int c = 0) const noexcept {
    return data_[index(x, y, c)];
  }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }

  bool same_shape(const BasicImage& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_ &&
           channels_ == other.channels_;
  }

  template <typename U>
  BasicImage<U> cast() const {
    BasicImage<U> out(width_, height_, channels_);
    auto dst = out.data();
    for (std::size_t i = 0; i < data_.size(); ++i) dst[i] = static_cast<U>(data_[i]);
    return out;
  }

  friend bool operator==(const BasicImage&, const BasicImage&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<T> data_;
};

using Image = BasicImage<float>;

template <typename A, typename B>
void require_same_shape(const BasicImage<A>& a, const BasicImage<B>& b,
                        const char* what) {
  if (a.width() != b.width() || a.height() != b.height() ||
      a.channels() != b.channels()) {
    throw Error(ErrorCode::ShapeMismatch, what);
  }
}

}  // namespace rasterfit
