#include "madnet/image.hpp"

namespace madnet {

Raster<double> Image::channel(int c) const {
  Raster<double> out(width_, height_);
  const std::size_t plane = static_cast<std::size_t>(width_) * height_;
  for (std::size_t i = 0; i < plane; ++i) out.data[i] = data_[c * plane + i];
  return out;
}

Raster<double> Image::luminance() const {
  Raster<double> out(width_, height_);
  const std::size_t plane = static_cast<std::size_t>(width_) * height_;
  for (std::size_t i = 0; i < plane; ++i) {
    out.data[i] = 0.299 * data_[i] + 0.587 * data_[plane + i] + 0.114 * data_[2 * plane + i];
  }
  return out;
}

}  // namespace madnet
