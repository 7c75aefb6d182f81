#pragma once

#include <cstdint>
#include <random>

#include "dmcc/image.hpp"

namespace dmcc {

// Illuminant-space augmentation: draw a new illuminant chromaticity from a
// disc around the original and relight the image by the diagonal ratio of
// the two illuminants.
struct AugmentConfig {
  double radius = 0.05;
  int samples_per_image = 4;
  std::uint64_t rng_seed = 0;

  void validate() const;  // 0 <= radius < 0.2, samples_per_image >= 0
};

// Uniform-by-area draw from the disc of the given radius around center:
// radius * sqrt(u) at angle 2*pi*v.
Chromaticity sample_in_disc(const Chromaticity& center, double radius, std::mt19937_64& rng);

// Disc draw rejected until it lands strictly inside the chromaticity
// simplex; falls back to the center after 1000 rejections.
Chromaticity sample_illuminant(const Chromaticity& center, const AugmentConfig& cfg,
                               std::mt19937_64& rng);

// Pixel-wise multiplication by the channel ratio of the G-normalized new and
// old illuminants. Relighting back to the old illuminant restores the image.
LinearImage relight(const LinearImage& image, const Illuminant& old_illuminant,
                    const Illuminant& new_illuminant);

}  // namespace dmcc
