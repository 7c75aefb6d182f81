#include "dmcc/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace dmcc {

namespace {

// Linear interpolation between closest ranks on the sorted values
// (position q * (n - 1)).
double quantile_sorted(const std::vector<double>& sorted, double q) {
  const std::size_t n = sorted.size();
  if (n == 1) return sorted[0];
  const double pos = q * static_cast<double>(n - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, n - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace

ErrorSummary summarize(const std::vector<double>& errors_deg) {
  if (errors_deg.empty()) throw DataError("summarize: empty error list");
  for (double e : errors_deg) {
    if (!std::isfinite(e) || e < 0.0)
      throw DataError("summarize: errors must be finite and >= 0");
  }

  std::vector<double> sorted = errors_deg;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();

  ErrorSummary s;
  s.n = static_cast<long>(n);

  double sum = 0.0;
  for (double e : sorted) sum += e;
  s.mean = sum / static_cast<double>(n);

  const double q1 = quantile_sorted(sorted, 0.25);
  s.median = quantile_sorted(sorted, 0.5);
  const double q3 = quantile_sorted(sorted, 0.75);
  s.trimean = (q1 + 2.0 * s.median + q3) / 4.0;

  const std::size_t k = (n + 3) / 4;  // ceil(n / 4)
  double best = 0.0, worst = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    best += sorted[i];
    worst += sorted[n - 1 - i];
  }
  s.best25 = best / static_cast<double>(k);
  s.worst25 = worst / static_cast<double>(k);
  return s;
}

Illuminant baseline_gray_world(const LinearImage& image, const PixelMask& mask) {
  image.validate();
  if (mask.width != image.width || mask.height != image.height)
    throw DataError("gray_world: mask dimensions do not match the image");
  Vec3 acc{0.0, 0.0, 0.0};
  std::size_t count = 0;
  for (std::size_t i = 0; i < image.pixel_count(); ++i) {
    if (mask.is_excluded(i)) continue;
    acc = acc + image.at(i);
    ++count;
  }
  if (count == 0 || !acc.all_positive())
    throw DataError("gray_world: no positive unmasked statistics");
  return Illuminant::from_rgb(acc / static_cast<double>(count));
}

Illuminant baseline_white_patch(const LinearImage& image, const PixelMask& mask) {
  image.validate();
  if (mask.width != image.width || mask.height != image.height)
    throw DataError("white_patch: mask dimensions do not match the image");
  Vec3 mx{0.0, 0.0, 0.0};
  std::size_t count = 0;
  for (std::size_t i = 0; i < image.pixel_count(); ++i) {
    if (mask.is_excluded(i)) continue;
    const Vec3 v = image.at(i);
    mx = {std::max(mx.r, v.r), std::max(mx.g, v.g), std::max(mx.b, v.b)};
    ++count;
  }
  if (count == 0 || !mx.all_positive())
    throw DataError("white_patch: no positive unmasked statistics");
  return Illuminant::from_rgb(mx);
}

Illuminant baseline_shades_of_gray(const LinearImage& image, const PixelMask& mask, double p) {
  image.validate();
  if (mask.width != image.width || mask.height != image.height)
    throw DataError("shades_of_gray: mask dimensions do not match the image");
  if (!std::isfinite(p) || p < 1.0) throw DataError("shades_of_gray: p must be >= 1");
  Vec3 acc{0.0, 0.0, 0.0};
  std::size_t count = 0;
  for (std::size_t i = 0; i < image.pixel_count(); ++i) {
    if (mask.is_excluded(i)) continue;
    const Vec3 v = image.at(i);
    acc = acc + Vec3{std::pow(v.r, p), std::pow(v.g, p), std::pow(v.b, p)};
    ++count;
  }
  if (count == 0) throw DataError("shades_of_gray: every pixel is masked");
  const double inv_n = 1.0 / static_cast<double>(count);
  const Vec3 est{std::pow(acc.r * inv_n, 1.0 / p), std::pow(acc.g * inv_n, 1.0 / p),
                 std::pow(acc.b * inv_n, 1.0 / p)};
  if (!est.all_positive()) throw DataError("shades_of_gray: degenerate channel statistics");
  return Illuminant::from_rgb(est);
}

}  // namespace dmcc
