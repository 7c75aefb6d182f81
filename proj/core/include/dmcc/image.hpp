#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "dmcc/types.hpp"

namespace dmcc {

// Intensity-normalized color coordinates r = R/(R+G+B), g = G/(R+G+B).
struct Chromaticity {
  double r = 0.0;
  double g = 0.0;

  // Strict interior of the chromaticity simplex, as required for illuminants.
  bool valid() const {
    return std::isfinite(r) && std::isfinite(g) && r > 0.0 && g > 0.0 && r + g < 1.0;
  }
};

// Scene illuminant in sensor space. Stored L2-normalized with every
// component strictly positive.
class Illuminant {
 public:
  Illuminant() : rgb_{1.0 / kSqrt3, 1.0 / kSqrt3, 1.0 / kSqrt3} {}

  static Illuminant from_rgb(const Vec3& raw);
  static Illuminant from_chromaticity(const Chromaticity& c);

  const Vec3& rgb() const { return rgb_; }
  Chromaticity chromaticity() const;

 private:
  static constexpr double kSqrt3 = 1.7320508075688772;
  explicit Illuminant(const Vec3& unit) : rgb_(unit) {}
  Vec3 rgb_;
};

// Linear raw image: no tone curve, no gamma, channel-interleaved row-major
// samples with per-channel black level and a scalar saturation level.
struct LinearImage {
  int width = 0;
  int height = 0;
  std::vector<double> pixels;  // width * height * 3
  Vec3 black_level{0.0, 0.0, 0.0};
  double saturation_level = 1.0;

  static LinearImage create(int width, int height, const Vec3& black_level,
                            double saturation_level);

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  Vec3 at(std::size_t pixel_index) const {
    const double* p = pixels.data() + pixel_index * 3;
    return {p[0], p[1], p[2]};
  }
  void set(std::size_t pixel_index, const Vec3& v) {
    double* p = pixels.data() + pixel_index * 3;
    p[0] = v.r;
    p[1] = v.g;
    p[2] = v.b;
  }

  // Throws DataError on violated invariants (dims, sizes, negative or
  // non-finite samples, non-positive saturation).
  void validate() const;
};

// Marks pixels excluded from statistics (clipped highlights, noise floor).
struct PixelMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> excluded;

  static PixelMask none(int width, int height);
  bool is_excluded(std::size_t pixel_index) const { return excluded[pixel_index] != 0; }
  std::size_t excluded_count() const;
};

// One dataset record: a linear capture and its ground-truth illuminant.
struct LabeledImage {
  std::string id;
  LinearImage image;
  Illuminant illuminant;
};

// Removes the per-channel black level and clamps the result at zero.
// Rejects images whose black level reaches the saturation level.
LinearImage subtract_black_level(const LinearImage& image);

// Masks saturated pixels (any channel >= sat_fraction * saturation_level),
// then the darkest dark_fraction of the remaining pixels ranked by channel
// sum (ties by lowest pixel index). At least one pixel always survives.
PixelMask clip_extremes(const LinearImage& image, double sat_fraction = 0.98,
                        double dark_fraction = 0.02);

// Area-weighted box average over unmasked source pixels, then division by
// the saturation level. Output pixels whose footprint is fully masked fall
// back to the full-footprint average and are flagged in out_mask. Values are
// intentionally not clamped to [0, 1]: the result stays linear in the input.
LinearImage resize_box(const LinearImage& image, const PixelMask& mask, int out_width,
                       int out_height, PixelMask* out_mask = nullptr);
LinearImage resize_to_64(const LinearImage& image, const PixelMask& mask,
                         PixelMask* out_mask = nullptr);

struct PreprocessOptions {
  double sat_fraction = 0.98;
  double dark_fraction = 0.02;
};

struct PreprocessedImage {
  LinearImage image;  // 64x64, normalized by saturation
  PixelMask mask;
};

// Shared preprocessing chain: subtract black level, mask extremes, box-resize
// to 64x64 with saturation normalization.
PreprocessedImage preprocess(const LinearImage& image, const PreprocessOptions& opts = {});

// Angle between two sensor-space vectors in degrees. Evaluated as
// atan2(|a x b|, a . b), which is exact near zero where the arccos form
// loses all precision. Throws NumericError for zero or non-finite input.
double angular_error_deg(const Vec3& a, const Vec3& b);

}  // namespace dmcc
