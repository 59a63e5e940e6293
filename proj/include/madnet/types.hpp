#pragma once

#include <cstdint>

namespace madnet {

/// Class of a window's center pixel. The numeric value is the softmax output index.
enum class Label : std::uint8_t { nonMA = 0, MA = 1 };

struct Point {
  int x = 0;
  int y = 0;

  friend bool operator==(const Point&, const Point&) = default;
  friend auto operator<=>(const Point&, const Point&) = default;
};

}  // namespace madnet
