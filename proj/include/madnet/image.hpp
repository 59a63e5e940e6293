#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "madnet/error.hpp"

namespace madnet {

/// Single-channel raster, row-major, x = column, y = row.
template <typename T>
struct Raster {
  int width = 0;
  int height = 0;
  std::vector<T> data;

  Raster() = default;
  Raster(int w, int h, T fill = T{}) : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

  T& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  const T& at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }
  std::size_t size() const { return data.size(); }

  friend bool operator==(const Raster&, const Raster&) = default;
};

/// 0/1 raster used for masks, labels and candidate sets.
using BinaryRaster = Raster<std::uint8_t>;

/// Three-channel planar RGB image with values in [0, 1].
class Image {
 public:
  Image() = default;
  Image(int width, int height, double fill = 0.0)
      : width_(width), height_(height), data_(3 * static_cast<std::size_t>(width) * height, fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  double& at(int channel, int x, int y) { return data_[index(channel, x, y)]; }
  double at(int channel, int x, int y) const { return data_[index(channel, x, y)]; }

  Raster<double> channel(int c) const;
  /// Rec. 601 luma.
  Raster<double> luminance() const;

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t index(int c, int x, int y) const {
    return (static_cast<std::size_t>(c) * height_ + y) * width_ + x;
  }
  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

template <typename A, typename B>
void require_same_size(const A& a, const B& b, const std::string& what) {
  if (a.width != b.width || a.height != b.height) {
    throw DataError(what + ": dimensions differ (" + std::to_string(a.width) + "x" + std::to_string(a.height) +
                    " vs " + std::to_string(b.width) + "x" + std::to_string(b.height) + ")");
  }
}

}  // namespace madnet
