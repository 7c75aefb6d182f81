#include "dmcc/image.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <vector>

namespace dmcc {

Illuminant Illuminant::from_rgb(const Vec3& raw) {
  if (!raw.finite()) throw DataError("illuminant: non-finite component");
  if (!raw.all_positive()) throw DataError("illuminant: all components must be > 0");
  const double n = raw.norm();
  return Illuminant(raw / n);
}

Illuminant Illuminant::from_chromaticity(const Chromaticity& c) {
  if (!c.valid()) {
    std::ostringstream msg;
    msg << "illuminant: chromaticity (" << c.r << ", " << c.g
        << ") outside the open simplex";
    throw DataError(msg.str());
  }
  return from_rgb({c.r, c.g, 1.0 - c.r - c.g});
}

Chromaticity Illuminant::chromaticity() const {
  const double s = rgb_.sum();
  return {rgb_.r / s, rgb_.g / s};
}

LinearImage LinearImage::create(int width, int height, const Vec3& black_level,
                                double saturation_level) {
  LinearImage img;
  img.width = width;
  img.height = height;
  img.black_level = black_level;
  img.saturation_level = saturation_level;
  if (width >= 1 && height >= 1)
    img.pixels.assign(static_cast<std::size_t>(width) * height * 3, 0.0);
  img.validate();
  return img;
}

void LinearImage::validate() const {
  if (width < 1 || height < 1) throw DataError("image: dimensions must be >= 1");
  if (pixels.size() != pixel_count() * 3)
    throw DataError("image: sample buffer does not match width*height*3");
  if (!black_level.finite() || !black_level.all_non_negative())
    throw DataError("image: black level must be finite and >= 0");
  if (!std::isfinite(saturation_level) || saturation_level <= 0.0)
    throw DataError("image: saturation level must be finite and > 0");
  for (double v : pixels) {
    if (!std::isfinite(v) || v < 0.0)
      throw DataError("image: samples must be finite and >= 0");
  }
}

PixelMask PixelMask::none(int width, int height) {
  PixelMask m;
  m.width = width;
  m.height = height;
  m.excluded.assign(static_cast<std::size_t>(width) * height, 0);
  return m;
}

std::size_t PixelMask::excluded_count() const {
  return static_cast<std::size_t>(std::count_if(excluded.begin(), excluded.end(),
                                                [](std::uint8_t v) { return v != 0; }));
}

LinearImage subtract_black_level(const LinearImage& image) {
  image.validate();
  for (int c = 0; c < 3; ++c) {
    if (image.black_level[c] >= image.saturation_level)
      throw DataError("subtract_black_level: black level >= saturation level");
  }
  LinearImage out = image;
  const std::size_t n = image.pixel_count();
  for (std::size_t i = 0; i < n; ++i) {
    Vec3 v = image.at(i) - image.black_level;
    out.set(i, {std::max(v.r, 0.0), std::max(v.g, 0.0), std::max(v.b, 0.0)});
  }
  out.black_level = {0.0, 0.0, 0.0};
  return out;
}

PixelMask clip_extremes(const LinearImage& image, double sat_fraction, double dark_fraction) {
  image.validate();
  if (!(sat_fraction > 0.0) || sat_fraction > 1.0)
    throw DataError("clip_extremes: sat_fraction must be in (0, 1]");
  if (dark_fraction < 0.0 || !(dark_fraction < 1.0))
    throw DataError("clip_extremes: dark_fraction must be in [0, 1)");

  const std::size_t n = image.pixel_count();
  PixelMask mask = PixelMask::none(image.width, image.height);

  const double sat_threshold = sat_fraction * image.saturation_level;
  std::vector<std::size_t> remaining;
  remaining.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 v = image.at(i);
    if (v.r >= sat_threshold || v.g >= sat_threshold || v.b >= sat_threshold)
      mask.excluded[i] = 1;
    else
      remaining.push_back(i);
  }

  const std::size_t dark_count =
      static_cast<std::size_t>(std::floor(dark_fraction * remaining.size() + 1e-9));
  if (dark_count > 0) {
    std::stable_sort(remaining.begin(), remaining.end(), [&](std::size_t a, std::size_t b) {
      const double sa = image.at(a).sum();
      const double sb = image.at(b).sum();
      if (sa != sb) return sa < sb;
      return a < b;
    });
    for (std::size_t k = 0; k < dark_count; ++k) mask.excluded[remaining[k]] = 1;
  }

  if (mask.excluded_count() == n) {
    // Everything saturated: keep the brightest pixel so downstream
    // statistics stay defined.
    std::size_t best = 0;
    double best_sum = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double s = image.at(i).sum();
      if (s > best_sum) {
        best_sum = s;
        best = i;
      }
    }
    mask.excluded[best] = 0;
  }
  return mask;
}

LinearImage resize_box(const LinearImage& image, const PixelMask& mask, int out_width,
                       int out_height, PixelMask* out_mask) {
  image.validate();
  if (out_width < 1 || out_height < 1)
    throw DataError("resize_box: output dimensions must be >= 1");
  if (mask.width != image.width || mask.height != image.height)
    throw DataError("resize_box: mask dimensions do not match the image");

  LinearImage out = LinearImage::create(out_width, out_height, {0.0, 0.0, 0.0}, 1.0);
  PixelMask fallback = PixelMask::none(out_width, out_height);

  const double sx = static_cast<double>(image.width) / out_width;
  const double sy = static_cast<double>(image.height) / out_height;

  for (int oy = 0; oy < out_height; ++oy) {
    const double y0 = oy * sy;
    const double y1 = y0 + sy;
    const int iy_begin = static_cast<int>(std::floor(y0));
    const int iy_end = std::min(image.height, static_cast<int>(std::ceil(y1)));
    for (int ox = 0; ox < out_width; ++ox) {
      const double x0 = ox * sx;
      const double x1 = x0 + sx;
      const int ix_begin = static_cast<int>(std::floor(x0));
      const int ix_end = std::min(image.width, static_cast<int>(std::ceil(x1)));

      Vec3 acc{0.0, 0.0, 0.0};
      double weight = 0.0;
      Vec3 acc_all{0.0, 0.0, 0.0};
      double weight_all = 0.0;
      for (int iy = iy_begin; iy < iy_end; ++iy) {
        const double wy = std::min(y1, iy + 1.0) - std::max(y0, static_cast<double>(iy));
        if (wy <= 0.0) continue;
        for (int ix = ix_begin; ix < ix_end; ++ix) {
          const double wx = std::min(x1, ix + 1.0) - std::max(x0, static_cast<double>(ix));
          if (wx <= 0.0) continue;
          const double w = wx * wy;
          const std::size_t idx = static_cast<std::size_t>(iy) * image.width + ix;
          const Vec3 v = image.at(idx);
          acc_all = acc_all + v * w;
          weight_all += w;
          if (!mask.is_excluded(idx)) {
            acc = acc + v * w;
            weight += w;
          }
        }
      }
      Vec3 mean;
      if (weight > 0.0) {
        mean = acc / weight;
      } else {
        // Fully masked footprint: average everything and flag the output.
        mean = acc_all / weight_all;
        fallback.excluded[static_cast<std::size_t>(oy) * out_width + ox] = 1;
      }
      out.set(static_cast<std::size_t>(oy) * out_width + ox, mean / image.saturation_level);
    }
  }
  if (out_mask) *out_mask = std::move(fallback);
  return out;
}

LinearImage resize_to_64(const LinearImage& image, const PixelMask& mask, PixelMask* out_mask) {
  return resize_box(image, mask, 64, 64, out_mask);
}

PreprocessedImage preprocess(const LinearImage& image, const PreprocessOptions& opts) {
  const LinearImage dark_corrected = subtract_black_level(image);
  const PixelMask mask = clip_extremes(dark_corrected, opts.sat_fraction, opts.dark_fraction);
  PreprocessedImage result;
  result.image = resize_to_64(dark_corrected, mask, &result.mask);
  return result;
}

double angular_error_deg(const Vec3& a, const Vec3& b) {
  if (!a.finite() || !b.finite()) throw NumericError("angular_error: non-finite input");
  if (a.norm() == 0.0 || b.norm() == 0.0) throw NumericError("angular_error: zero-norm input");
  const double rad = std::atan2(a.cross(b).norm(), a.dot(b));
  return rad * 180.0 / std::numbers::pi;
}

}  // namespace dmcc
