#include "dmcc/calibration.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <sstream>

namespace dmcc {

void WhitePoint::validate() const {
  if (!rgb.finite() || !rgb.all_positive())
    throw DataError("white point: components must be finite and > 0");
}

SensorMap SensorMap::diagonal(const Vec3& d) {
  if (!d.finite() || !d.all_positive())
    throw DataError("sensor map: diagonal entries must be finite and > 0");
  return SensorMap(Kind::diagonal, {d.r, 0, 0, 0, d.g, 0, 0, 0, d.b});
}

SensorMap SensorMap::full(const std::array<double, 9>& row_major) {
  for (double v : row_major) {
    if (!std::isfinite(v)) throw DataError("sensor map: non-finite matrix entry");
  }
  const auto& m = row_major;
  const double det = m[0] * (m[4] * m[8] - m[5] * m[7]) -
                     m[1] * (m[3] * m[8] - m[5] * m[6]) +
                     m[2] * (m[3] * m[7] - m[4] * m[6]);
  if (std::abs(det) < 1e-12) throw DataError("sensor map: matrix is singular");
  return SensorMap(Kind::full, row_major);
}

bool SensorMap::is_identity() const {
  static constexpr std::array<double, 9> id{1, 0, 0, 0, 1, 0, 0, 0, 1};
  return m_ == id;
}

SensorMap calibrate_diagonal(const WhitePoint& source, const WhitePoint& target) {
  source.validate();
  target.validate();
  const Vec3 s = source.rgb / source.rgb.g;
  const Vec3 t = target.rgb / target.rgb.g;
  return SensorMap::diagonal(cwise_div(t, s));
}

SensorMap calibrate_full(const std::vector<WhitePoint>& source_samples,
                         const std::vector<WhitePoint>& target_samples) {
  if (source_samples.size() != target_samples.size())
    throw DataError("calibrate_full: sample lists differ in length");
  if (source_samples.size() < 3)
    throw DataError("calibrate_full: at least three sample pairs required");
  for (const auto& w : source_samples) w.validate();
  for (const auto& w : target_samples) w.validate();

  const Eigen::Index n = static_cast<Eigen::Index>(source_samples.size());
  Eigen::Matrix3Xd s(3, n), t(3, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec3& sv = source_samples[static_cast<std::size_t>(i)].rgb;
    const Vec3& tv = target_samples[static_cast<std::size_t>(i)].rgb;
    s.col(i) << sv.r, sv.g, sv.b;
    t.col(i) << tv.r, tv.g, tv.b;
  }

  // Normal equations of min_M ||M S - T||_F: M = T S^T (S S^T)^-1.
  const Eigen::Matrix3d gram = s * s.transpose();
  const Eigen::FullPivLU<Eigen::Matrix3d> lu(gram);
  if (lu.rank() < 3)
    throw NumericError("calibrate_full: source samples are rank-deficient");
  const Eigen::Matrix3d m = t * s.transpose() * lu.inverse();

  std::array<double, 9> row_major;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) row_major[static_cast<std::size_t>(r) * 3 + c] = m(r, c);
  return SensorMap::full(row_major);
}

LinearImage map_image(const SensorMap& m, const LinearImage& image) {
  image.validate();
  LinearImage out = image;
  const std::size_t n = image.pixel_count();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 v = m.apply(image.at(i));
    out.set(i, {std::max(v.r, 0.0), std::max(v.g, 0.0), std::max(v.b, 0.0)});
  }
  return out;
}

Illuminant map_illuminant(const SensorMap& m, const Illuminant& ell) {
  const Vec3 mapped = m.apply(ell.rgb());
  if (!mapped.all_positive())
    throw NumericError("map_illuminant: mapped illuminant left the positive octant");
  return Illuminant::from_rgb(mapped);
}

std::string calibration_fingerprint(const SensorMap& m) {
  // FNV-1a over the kind tag and the raw matrix bytes.
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const void* data, std::size_t len) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ull;
    }
  };
  const char tag = m.kind() == SensorMap::Kind::diagonal ? 'd' : 'f';
  mix(&tag, 1);
  mix(m.matrix().data(), sizeof(double) * 9);

  std::ostringstream out;
  out << std::hex;
  for (int shift = 60; shift >= 0; shift -= 4) out << ((h >> shift) & 0xF);
  return out.str();
}

}  // namespace dmcc
