#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dmcc/calibration.hpp"
#include "dmcc/image.hpp"

namespace dmcc {

struct IlluminantAnchor {
  Chromaticity center;
  double jitter_radius = 0.02;
};

// Synthetic two-sensor world: flat reflectance patches under a shared scene
// illuminant, observed through one linear transform per sensor plus optional
// Gaussian noise. Ground truth (labels, white points, true map) is exact by
// construction.
struct SyntheticWorldConfig {
  int scene_count = 500;
  int patches_per_scene = 256;  // tiled on a ceil(sqrt(n)) grid
  int image_size = 64;
  double saturation_level = 4.0;
  std::vector<IlluminantAnchor> illuminant_locus;  // empty = default arc
  SensorMap source_transform = SensorMap::identity();
  SensorMap target_transform = SensorMap::identity();
  double observation_noise_sigma = 0.0;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

// Daylight-like arc of (r, g) anchors used when the config leaves the locus
// empty.
std::vector<IlluminantAnchor> default_illuminant_locus();

// Config used by the CLI when no config file is given: a diagonal target
// transform, so the two sensors genuinely differ.
SyntheticWorldConfig default_world_config();

struct SyntheticDataset {
  std::string sensor_name;
  Vec3 d65_white;
  std::vector<LabeledImage> entries;
};

struct SyntheticWorld {
  SyntheticDataset source;
  SyntheticDataset target;
  SensorMap true_map;
  WhitePoint source_white;
  WhitePoint target_white;
};

// Scene content (reflectances, illuminants) depends only on rng_seed and the
// scene index, never on image_size or noise draws, so the same world renders
// consistently at different resolutions. Noise uses separate per-sensor
// streams. For diagonal worlds the emitted true_map equals
// calibrate_diagonal(source_white, target_white).
SyntheticWorld generate_world(const SyntheticWorldConfig& cfg);

}  // namespace dmcc
