#include "dmcc/synth.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <random>

#include "dmcc/augment.hpp"
#include "dmcc/rng.hpp"

namespace dmcc {

namespace {

constexpr std::uint64_t kStreamSceneBase = 0x200000000ull;
constexpr std::uint64_t kStreamSourceNoiseBase = 0x300000000ull;
constexpr std::uint64_t kStreamTargetNoiseBase = 0x400000000ull;

constexpr double kReflectanceLo = 0.05;
constexpr double kReflectanceHi = 0.95;

std::string scene_id(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "scene_%05d", index);
  return buf;
}

Vec3 white_of(const SensorMap& t) { return t.apply({1.0, 1.0, 1.0}); }

SensorMap compute_true_map(const SensorMap& source, const SensorMap& target,
                           const WhitePoint& source_white, const WhitePoint& target_white) {
  if (source.kind() == SensorMap::Kind::diagonal &&
      target.kind() == SensorMap::Kind::diagonal) {
    // Matches the calibration route bit-for-bit on diagonal worlds.
    return calibrate_diagonal(source_white, target_white);
  }
  Eigen::Matrix3d ts, tt;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) {
      ts(r, c) = source.matrix()[static_cast<std::size_t>(r) * 3 + c];
      tt(r, c) = target.matrix()[static_cast<std::size_t>(r) * 3 + c];
    }
  const Eigen::Matrix3d m = tt * ts.inverse();
  std::array<double, 9> row_major;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) row_major[static_cast<std::size_t>(r) * 3 + c] = m(r, c);
  return SensorMap::full(row_major);
}

LinearImage render_sensor(const std::vector<Vec3>& base_pixels, int size,
                          const SensorMap& transform, double saturation, double noise_sigma,
                          std::mt19937_64& noise_rng) {
  LinearImage img = LinearImage::create(size, size, {0.0, 0.0, 0.0}, saturation);
  std::normal_distribution<double> noise(0.0, noise_sigma);
  for (std::size_t i = 0; i < base_pixels.size(); ++i) {
    Vec3 v = transform.apply(base_pixels[i]);
    if (noise_sigma > 0.0) {
      v.r += noise(noise_rng);
      v.g += noise(noise_rng);
      v.b += noise(noise_rng);
    }
    img.set(i, {std::max(v.r, 0.0), std::max(v.g, 0.0), std::max(v.b, 0.0)});
  }
  return img;
}

}  // namespace

void SyntheticWorldConfig::validate() const {
  if (scene_count < 1) throw DataError("synth: scene_count must be >= 1");
  if (patches_per_scene < 1) throw DataError("synth: patches_per_scene must be >= 1");
  if (image_size < 1 || image_size > 4096)
    throw DataError("synth: image_size must be in [1, 4096]");
  if (!std::isfinite(saturation_level) || saturation_level <= 0.0)
    throw DataError("synth: saturation_level must be > 0");
  if (!std::isfinite(observation_noise_sigma) || observation_noise_sigma < 0.0)
    throw DataError("synth: observation_noise_sigma must be >= 0");
  for (const IlluminantAnchor& a : illuminant_locus) {
    if (!a.center.valid()) throw DataError("synth: locus anchor outside the simplex");
    if (!std::isfinite(a.jitter_radius) || a.jitter_radius < 0.0 || a.jitter_radius >= 0.2)
      throw DataError("synth: anchor jitter_radius must be in [0, 0.2)");
  }
}

std::vector<IlluminantAnchor> default_illuminant_locus() {
  // Stand-in daylight-like arc in (r, g): warm anchors at high r, cool ones
  // at low r, with a gentle bulge in g.
  return {{{0.22, 0.36}, 0.02},
          {{0.28, 0.385}, 0.02},
          {{0.34, 0.39}, 0.02},
          {{0.40, 0.375}, 0.02},
          {{0.46, 0.345}, 0.02}};
}

SyntheticWorldConfig default_world_config() {
  SyntheticWorldConfig cfg;
  cfg.target_transform = SensorMap::diagonal({0.7, 1.0, 1.4});
  return cfg;
}

SyntheticWorld generate_world(const SyntheticWorldConfig& cfg) {
  cfg.validate();
  const std::vector<IlluminantAnchor> locus =
      cfg.illuminant_locus.empty() ? default_illuminant_locus() : cfg.illuminant_locus;

  SyntheticWorld world;
  world.source.sensor_name = "synth-source";
  world.target.sensor_name = "synth-target";
  world.source_white.rgb = white_of(cfg.source_transform);
  world.target_white.rgb = white_of(cfg.target_transform);
  world.source_white.validate();
  world.target_white.validate();
  world.source.d65_white = world.source_white.rgb;
  world.target.d65_white = world.target_white.rgb;
  world.true_map = compute_true_map(cfg.source_transform, cfg.target_transform,
                                    world.source_white, world.target_white);

  const int grid = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(cfg.patches_per_scene))));
  const int size = cfg.image_size;

  world.source.entries.reserve(static_cast<std::size_t>(cfg.scene_count));
  world.target.entries.reserve(static_cast<std::size_t>(cfg.scene_count));

  for (int scene = 0; scene < cfg.scene_count; ++scene) {
    // Scene content depends only on (rng_seed, scene): the same seed renders
    // the same reflectances and illuminant at any resolution.
    std::mt19937_64 rng =
        make_rng_stream(cfg.rng_seed, kStreamSceneBase + static_cast<std::uint64_t>(scene));

    std::uniform_int_distribution<std::size_t> pick(0, locus.size() - 1);
    const IlluminantAnchor& anchor = locus[pick(rng)];
    AugmentConfig jitter;
    jitter.radius = anchor.jitter_radius;
    const Chromaticity c = sample_illuminant(anchor.center, jitter, rng);
    // G-normalized scene illuminant; overall scale is irrelevant downstream.
    const Vec3 ell{c.r / c.g, 1.0, (1.0 - c.r - c.g) / c.g};

    std::uniform_real_distribution<double> refl_dist(kReflectanceLo, kReflectanceHi);
    std::vector<Vec3> reflectance(static_cast<std::size_t>(grid) * grid);
    for (Vec3& p : reflectance) {
      p.r = refl_dist(rng);
      p.g = refl_dist(rng);
      p.b = refl_dist(rng);
    }

    std::vector<Vec3> base(static_cast<std::size_t>(size) * size);
    for (int y = 0; y < size; ++y) {
      const int py = y * grid / size;
      for (int x = 0; x < size; ++x) {
        const int px = x * grid / size;
        base[static_cast<std::size_t>(y) * size + x] =
            cwise_mul(reflectance[static_cast<std::size_t>(py) * grid + px], ell);
      }
    }

    std::mt19937_64 noise_s = make_rng_stream(
        cfg.rng_seed, kStreamSourceNoiseBase + static_cast<std::uint64_t>(scene));
    std::mt19937_64 noise_t = make_rng_stream(
        cfg.rng_seed, kStreamTargetNoiseBase + static_cast<std::uint64_t>(scene));

    const std::string id = scene_id(scene);
    world.source.entries.push_back(
        {id,
         render_sensor(base, size, cfg.source_transform, cfg.saturation_level,
                       cfg.observation_noise_sigma, noise_s),
         Illuminant::from_rgb(cfg.source_transform.apply(ell))});
    world.target.entries.push_back(
        {id,
         render_sensor(base, size, cfg.target_transform, cfg.saturation_level,
                       cfg.observation_noise_sigma, noise_t),
         Illuminant::from_rgb(cfg.target_transform.apply(ell))});
  }
  return world;
}

}  // namespace dmcc
