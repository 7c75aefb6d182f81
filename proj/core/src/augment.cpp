#include "dmcc/augment.hpp"

#include <cmath>
#include <numbers>

namespace dmcc {

void AugmentConfig::validate() const {
  if (!std::isfinite(radius) || radius < 0.0 || radius >= 0.2)
    throw DataError("augment: radius must be in [0, 0.2)");
  if (samples_per_image < 0)
    throw DataError("augment: samples_per_image must be >= 0");
}

Chromaticity sample_in_disc(const Chromaticity& center, double radius, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double rad = radius * std::sqrt(unit(rng));
  const double ang = 2.0 * std::numbers::pi * unit(rng);
  return {center.r + rad * std::cos(ang), center.g + rad * std::sin(ang)};
}

Chromaticity sample_illuminant(const Chromaticity& center, const AugmentConfig& cfg,
                               std::mt19937_64& rng) {
  cfg.validate();
  if (!center.valid()) throw DataError("augment: center chromaticity outside the simplex");
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const Chromaticity c = sample_in_disc(center, cfg.radius, rng);
    if (c.valid()) return c;
  }
  return center;
}

LinearImage relight(const LinearImage& image, const Illuminant& old_illuminant,
                    const Illuminant& new_illuminant) {
  image.validate();
  const Vec3 old_n = old_illuminant.rgb() / old_illuminant.rgb().g;
  const Vec3 new_n = new_illuminant.rgb() / new_illuminant.rgb().g;
  const Vec3 gain = cwise_div(new_n, old_n);

  LinearImage out = image;
  const std::size_t n = image.pixel_count();
  for (std::size_t i = 0; i < n; ++i) out.set(i, cwise_mul(image.at(i), gain));
  return out;
}

}  // namespace dmcc
