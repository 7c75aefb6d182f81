#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dmcc/calibration.hpp"
#include "dmcc/image.hpp"
#include "dmcc/metrics.hpp"
#include "dmcc/mlp.hpp"
#include "dmcc/synth.hpp"
#include "dmcc/trainer.hpp"

namespace dmcc {

inline constexpr std::string_view kManifestVersion = "dmcc-manifest-1";
inline constexpr std::string_view kModelFormat = "dmcc-mlp-1";

// DMRAW1 raster: one ASCII header line
//   DMRAW1 <width> <height> 3 <black_r> <black_g> <black_b> <saturation>
// followed by width*height*3 little-endian float32 samples, row-major and
// channel-interleaved. Round-trips bit-exactly.
LinearImage load_raster(const std::filesystem::path& path);
void save_raster(const std::filesystem::path& path, const LinearImage& image);

struct ManifestEntry {
  std::string id;
  std::filesystem::path raster_path;  // resolved against the manifest directory
  Illuminant illuminant;
  Vec3 black_level;
  double saturation = 1.0;
  std::string sensor_name;
};

struct Manifest {
  std::string sensor_name;
  std::optional<Vec3> d65_white;
  std::vector<ManifestEntry> entries;
};

// Parses and validates the manifest (version tag, unique ids, valid
// illuminants, referenced rasters exist). Pixel data is loaded per entry via
// load_entry_image, which cross-checks the raster header against the
// manifest metadata.
Manifest load_manifest(const std::filesystem::path& path);
LinearImage load_entry_image(const ManifestEntry& entry);

// Writes rasters under raster_dir and a manifest referencing them by
// relative path.
void save_dataset(const SyntheticDataset& dataset, const std::filesystem::path& manifest_path,
                  const std::filesystem::path& raster_dir);

struct CalibrationFile {
  SensorMap map;
  WhitePoint source_white;
  WhitePoint target_white;
};

CalibrationFile load_calibration(const std::filesystem::path& path);
void save_calibration(const std::filesystem::path& path, const CalibrationFile& calib);

// Model files are pure JSON with no timestamps or environment captures, so
// identical training runs serialize byte-identically. Loading validates the
// format tag, the architecture, the layer shapes and the parameter count.
MlpModel load_model(const std::filesystem::path& path);
void save_model(const std::filesystem::path& path, const MlpModel& model);

struct PerImageError {
  std::string id;
  double error_deg = 0.0;
};

void save_evaluation_report(const std::filesystem::path& path, const ErrorSummary& summary,
                            const std::vector<PerImageError>& per_image);
void save_train_report(const std::filesystem::path& path, const TrainReport& report);
void save_train_curves_csv(const std::filesystem::path& path, const TrainReport& report);

SyntheticWorldConfig load_world_config(const std::filesystem::path& path);

// Writes source/target manifests with rasters, the true map (calibration
// file format) and the white points under out_dir. Deterministic: the same
// world serializes to byte-identical trees.
void save_world(const SyntheticWorld& world, const std::filesystem::path& out_dir);

}  // namespace dmcc
