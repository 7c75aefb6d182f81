#include "dmcc/features.hpp"

#include <limits>

namespace dmcc {

namespace {

Chromaticity to_chroma(const Vec3& v) {
  const double s = v.sum();
  return {v.r / s, v.g / s};
}

}  // namespace

FeatureVector extract_features(const LinearImage& image, const PixelMask& mask) {
  image.validate();
  if (mask.width != image.width || mask.height != image.height)
    throw DataError("extract_features: mask dimensions do not match the image");

  const std::size_t n = image.pixel_count();
  Vec3 channel_max{0.0, 0.0, 0.0};
  Vec3 channel_sum{0.0, 0.0, 0.0};
  std::size_t count = 0;

  double brightest_sum = -std::numeric_limits<double>::infinity();
  std::size_t brightest_idx = 0;
  double darkest_sum = std::numeric_limits<double>::infinity();
  std::size_t darkest_idx = 0;
  bool have_darkest = false;

  for (std::size_t i = 0; i < n; ++i) {
    if (mask.is_excluded(i)) continue;
    const Vec3 v = image.at(i);
    channel_max = {std::max(channel_max.r, v.r), std::max(channel_max.g, v.g),
                   std::max(channel_max.b, v.b)};
    channel_sum = channel_sum + v;
    ++count;

    const double s = v.sum();
    if (s > brightest_sum) {  // strict: ties keep the lowest index
      brightest_sum = s;
      brightest_idx = i;
    }
    if (s > 0.0 && s < darkest_sum) {
      darkest_sum = s;
      darkest_idx = i;
      have_darkest = true;
    }
  }

  if (count == 0) throw DataError("extract_features: every pixel is masked");
  if (!have_darkest || channel_max.sum() <= 0.0 || channel_sum.sum() <= 0.0)
    throw DataError("extract_features: all unmasked pixels have zero channel sum");

  const Chromaticity c_max = to_chroma(channel_max);
  const Chromaticity c_mean = to_chroma(channel_sum / static_cast<double>(count));
  const Chromaticity c_bright = to_chroma(image.at(brightest_idx));
  const Chromaticity c_dark = to_chroma(image.at(darkest_idx));

  FeatureVector f;
  f.values = {c_max.r, c_max.g, c_mean.r, c_mean.g, c_bright.r, c_bright.g, c_dark.r, c_dark.g};
  return f;
}

}  // namespace dmcc
