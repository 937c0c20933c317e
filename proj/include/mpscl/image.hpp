#pragma once

#include <cstdint>
#include <vector>

namespace mpscl {

// Plain row-major rasters. h*w must match v.size().
struct ImageU8 {
  int h = 0;
  int w = 0;
  std::vector<std::uint8_t> v;
};

struct ImageU16 {
  int h = 0;
  int w = 0;
  std::vector<std::uint16_t> v;
};

// Grayscale intensities in [0, 1].
struct ImageF {
  int h = 0;
  int w = 0;
  std::vector<double> v;
};

}  // namespace mpscl
