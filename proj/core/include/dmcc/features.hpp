#pragma once

#include <array>
#include <cstddef>
#include <string_view>

#include "dmcc/image.hpp"

namespace dmcc {

// Sparse chromaticity statistics g(Y) of a preprocessed image: (r, g) pairs
// of the per-channel maxima composite, the channel means, the brightest
// pixel and the darkest pixel by channel sum. Scale-invariant by
// construction.
struct FeatureVector {
  std::array<double, 8> values{};

  double operator[](std::size_t i) const { return values[i]; }
  double& operator[](std::size_t i) { return values[i]; }

  static constexpr std::array<std::string_view, 8> names = {
      "r_max", "g_max", "r_mean", "g_mean", "r_b", "g_b", "r_d", "g_d"};
};

// Statistics run over unmasked pixels only. Maxima are taken per channel
// independently; brightest/darkest ties resolve to the lowest pixel index;
// the darkest pixel is the one with the smallest strictly positive channel
// sum. Throws DataError when every unmasked pixel has zero channel sum.
FeatureVector extract_features(const LinearImage& image, const PixelMask& mask);

}  // namespace dmcc
