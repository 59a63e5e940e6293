#include "madnet/geometry.hpp"

#include <string>

#include "madnet/error.hpp"

namespace madnet {

int conv_output_size(const ConvGeometry& g) {
  if (g.filterSize < 1 || g.stride < 1 || g.pad < 0 || g.inputSize < 1 || g.inputDepth < 1 ||
      g.filterCount < 1) {
    throw GeometryError("conv geometry out of range: inputSize=" + std::to_string(g.inputSize) +
                        " filterSize=" + std::to_string(g.filterSize) + " pad=" + std::to_string(g.pad) +
                        " stride=" + std::to_string(g.stride));
  }
  const int span = g.inputSize - g.filterSize + 2 * g.pad;
  if (span < 0 || span % g.stride != 0) {
    throw GeometryError("conv geometry not integral: (inputSize=" + std::to_string(g.inputSize) +
                        " - filterSize=" + std::to_string(g.filterSize) + " + 2*pad=" +
                        std::to_string(2 * g.pad) + ") is not a non-negative multiple of stride=" +
                        std::to_string(g.stride));
  }
  return span / g.stride + 1;
}

int pool_output_size(const PoolGeometry& g) {
  if (g.extent < 1 || g.stride < 1 || g.inputSize < 1) {
    throw GeometryError("pool geometry out of range: inputSize=" + std::to_string(g.inputSize) +
                        " extent=" + std::to_string(g.extent) + " stride=" + std::to_string(g.stride));
  }
  const int span = g.inputSize - g.extent;
  if (span < 0 || span % g.stride != 0) {
    throw GeometryError("pool geometry not integral: (inputSize=" + std::to_string(g.inputSize) +
                        " - extent=" + std::to_string(g.extent) +
                        ") is not a non-negative multiple of stride=" + std::to_string(g.stride));
  }
  return span / g.stride + 1;
}

}  // namespace madnet
