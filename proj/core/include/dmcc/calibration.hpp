#pragma once

#include <array>
#include <string>
#include <vector>

#include "dmcc/image.hpp"
#include "dmcc/types.hpp"

namespace dmcc {

// D65 response of a sensor, as published by the manufacturer or measured
// from a gray target. Components must be strictly positive.
struct WhitePoint {
  Vec3 rgb{1.0, 1.0, 1.0};
  void validate() const;
};

// Cross-sensor calibration matrix M. Diagonal in the standard path; a full
// 3x3 least-squares variant exists for ablations.
class SensorMap {
 public:
  enum class Kind { diagonal, full };

  SensorMap() : SensorMap(Kind::diagonal, {1, 0, 0, 0, 1, 0, 0, 0, 1}) {}

  static SensorMap identity() { return SensorMap(); }
  static SensorMap diagonal(const Vec3& d);
  static SensorMap full(const std::array<double, 9>& row_major);

  Kind kind() const { return kind_; }
  const std::array<double, 9>& matrix() const { return m_; }
  Vec3 diagonal_entries() const { return {m_[0], m_[4], m_[8]}; }
  bool is_identity() const;

  Vec3 apply(const Vec3& v) const {
    if (kind_ == Kind::diagonal) return {m_[0] * v.r, m_[4] * v.g, m_[8] * v.b};
    return {m_[0] * v.r + m_[1] * v.g + m_[2] * v.b,
            m_[3] * v.r + m_[4] * v.g + m_[5] * v.b,
            m_[6] * v.r + m_[7] * v.g + m_[8] * v.b};
  }

 private:
  SensorMap(Kind kind, const std::array<double, 9>& m) : kind_(kind), m_(m) {}
  Kind kind_;
  std::array<double, 9> m_;
};

// Diagonal calibration from one white point per sensor: both whites are
// G-normalized and M takes their per-channel ratio, so M maps the source
// white onto the target white's chromaticity.
SensorMap calibrate_diagonal(const WhitePoint& source, const WhitePoint& target);

// Full-matrix least-squares fit of target responses from source responses
// over corresponding samples. Requires at least three pairs spanning rank 3.
SensorMap calibrate_full(const std::vector<WhitePoint>& source_samples,
                         const std::vector<WhitePoint>& target_samples);

// Applies M to every pixel, clamping negatives (possible for full maps) at
// zero. Expects a black-subtracted image; saturation metadata is preserved.
LinearImage map_image(const SensorMap& m, const LinearImage& image);

// Applies M to an illuminant and renormalizes. Rejects maps that push any
// component out of the positive octant.
Illuminant map_illuminant(const SensorMap& m, const Illuminant& ell);

// Stable 16-hex-digit digest of the map, embedded in trained model files so
// a model can be matched to the calibration it was trained under.
std::string calibration_fingerprint(const SensorMap& m);

}  // namespace dmcc
