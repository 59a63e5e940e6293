#pragma once

namespace madnet {

/// Square convolution geometry. Output side is (M_i - F + 2P) / S + 1 and
/// output depth is the filter count.
struct ConvGeometry {
  int inputSize = 1;
  int filterSize = 1;
  int pad = 0;
  int stride = 1;
  int inputDepth = 1;
  int filterCount = 1;
};

struct PoolGeometry {
  int inputSize = 1;
  int extent = 1;
  int stride = 1;

  bool overlapping() const { return extent > stride; }
};

/// Throws GeometryError naming the offending fields when the size is not
/// a positive integer.
int conv_output_size(const ConvGeometry& g);
int pool_output_size(const PoolGeometry& g);

}  // namespace madnet
