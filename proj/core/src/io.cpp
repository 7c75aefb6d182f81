#include "dmcc/io.hpp"

#include <json.hpp>

#include <bit>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <unordered_set>

namespace dmcc {

using json = nlohmann::json;

namespace {

constexpr int kMaxRasterDim = 16384;

std::string shortest_double(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& token, const char* what) {
  double v = 0.0;
  const auto res = std::from_chars(token.data(), token.data() + token.size(), v);
  if (res.ec != std::errc() || res.ptr != token.data() + token.size())
    throw DataError(std::string("raster: malformed ") + what + " '" + token + "'");
  return v;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open for writing: " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw DataError("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

json parse_json_file(const std::filesystem::path& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(std::string(what) + ": cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(std::string(what) + ": malformed JSON in " + path.string() + ": " +
                    e.what());
  }
  return j;
}

const json& require_field(const json& j, const char* key, const char* what) {
  const auto it = j.find(key);
  if (it == j.end())
    throw DataError(std::string(what) + ": missing field '" + key + "'");
  return *it;
}

double require_number(const json& j, const char* key, const char* what) {
  const json& f = require_field(j, key, what);
  if (!f.is_number()) throw DataError(std::string(what) + ": field '" + key + "' must be a number");
  return f.get<double>();
}

std::string require_string(const json& j, const char* key, const char* what) {
  const json& f = require_field(j, key, what);
  if (!f.is_string()) throw DataError(std::string(what) + ": field '" + key + "' must be a string");
  return f.get<std::string>();
}

Vec3 require_vec3(const json& j, const char* key, const char* what) {
  const json& f = require_field(j, key, what);
  if (!f.is_array() || f.size() != 3 || !f[0].is_number() || !f[1].is_number() ||
      !f[2].is_number())
    throw DataError(std::string(what) + ": field '" + key + "' must be [r, g, b]");
  return {f[0].get<double>(), f[1].get<double>(), f[2].get<double>()};
}

json vec3_json(const Vec3& v) { return json::array({v.r, v.g, v.b}); }

json matrix_json(const SensorMap& m) {
  json rows = json::array();
  for (int r = 0; r < 3; ++r) {
    json row = json::array();
    for (int c = 0; c < 3; ++c) row.push_back(m.matrix()[static_cast<std::size_t>(r) * 3 + c]);
    rows.push_back(std::move(row));
  }
  return rows;
}

float checked_float(double v, const char* what) {
  if (!std::isfinite(v)) throw DataError(std::string(what) + ": non-finite value");
  const float f = static_cast<float>(v);
  if (!std::isfinite(f)) throw DataError(std::string(what) + ": value exceeds float32 range");
  return f;
}

}  // namespace

LinearImage load_raster(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("raster: cannot open " + path.string());

  std::string header;
  if (!std::getline(in, header) || header.size() > 512)
    throw DataError("raster: missing or oversized header in " + path.string());

  std::istringstream hs(header);
  std::string magic, sw, sh, sc, sbr, sbg, sbb, ssat, extra;
  hs >> magic >> sw >> sh >> sc >> sbr >> sbg >> sbb >> ssat;
  if (!hs || (hs >> extra))
    throw DataError("raster: malformed header in " + path.string());
  if (magic != "DMRAW1") throw DataError("raster: unknown format tag '" + magic + "'");
  if (sc != "3") throw DataError("raster: channel count must be 3");

  int width = 0, height = 0;
  try {
    width = std::stoi(sw);
    height = std::stoi(sh);
  } catch (const std::exception&) {
    throw DataError("raster: malformed dimensions in " + path.string());
  }
  if (width < 1 || height < 1 || width > kMaxRasterDim || height > kMaxRasterDim)
    throw DataError("raster: dimensions out of range in " + path.string());

  LinearImage img;
  img.width = width;
  img.height = height;
  img.black_level = {parse_double(sbr, "black level"), parse_double(sbg, "black level"),
                     parse_double(sbb, "black level")};
  img.saturation_level = parse_double(ssat, "saturation");

  const std::size_t sample_count = static_cast<std::size_t>(width) * height * 3;
  std::vector<unsigned char> payload(sample_count * 4);
  in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
  if (static_cast<std::size_t>(in.gcount()) != payload.size())
    throw DataError("raster: truncated payload in " + path.string());
  if (in.peek() != std::char_traits<char>::eof())
    throw DataError("raster: trailing bytes after payload in " + path.string());

  img.pixels.resize(sample_count);
  for (std::size_t i = 0; i < sample_count; ++i) {
    const std::uint32_t bits = static_cast<std::uint32_t>(payload[i * 4]) |
                               (static_cast<std::uint32_t>(payload[i * 4 + 1]) << 8) |
                               (static_cast<std::uint32_t>(payload[i * 4 + 2]) << 16) |
                               (static_cast<std::uint32_t>(payload[i * 4 + 3]) << 24);
    const float f = std::bit_cast<float>(bits);
    if (!std::isfinite(f) || f < 0.0f)
      throw DataError("raster: samples must be finite and >= 0 in " + path.string());
    img.pixels[i] = static_cast<double>(f);
  }
  img.validate();
  return img;
}

void save_raster(const std::filesystem::path& path, const LinearImage& image) {
  image.validate();
  std::string out;
  out.reserve(64 + image.pixels.size() * 4);
  out += "DMRAW1 ";
  out += std::to_string(image.width);
  out += ' ';
  out += std::to_string(image.height);
  out += " 3 ";
  out += shortest_double(image.black_level.r);
  out += ' ';
  out += shortest_double(image.black_level.g);
  out += ' ';
  out += shortest_double(image.black_level.b);
  out += ' ';
  out += shortest_double(image.saturation_level);
  out += '\n';

  for (double v : image.pixels) {
    const std::uint32_t bits = std::bit_cast<std::uint32_t>(checked_float(v, "raster"));
    out += static_cast<char>(bits & 0xFF);
    out += static_cast<char>((bits >> 8) & 0xFF);
    out += static_cast<char>((bits >> 16) & 0xFF);
    out += static_cast<char>((bits >> 24) & 0xFF);
  }
  write_file_atomic(path, out);
}

Manifest load_manifest(const std::filesystem::path& path) {
  const json j = parse_json_file(path, "manifest");
  if (require_string(j, "version", "manifest") != kManifestVersion)
    throw DataError("manifest: unsupported version tag in " + path.string());

  Manifest manifest;
  const json& sensor = require_field(j, "sensor", "manifest");
  manifest.sensor_name = require_string(sensor, "name", "manifest.sensor");
  if (sensor.contains("d65_white"))
    manifest.d65_white = require_vec3(sensor, "d65_white", "manifest.sensor");

  const json& entries = require_field(j, "entries", "manifest");
  if (!entries.is_array()) throw DataError("manifest: 'entries' must be an array");

  const std::filesystem::path base = path.parent_path();
  std::unordered_set<std::string> seen_ids;
  for (const json& e : entries) {
    ManifestEntry entry;
    entry.id = require_string(e, "id", "manifest.entry");
    if (!seen_ids.insert(entry.id).second)
      throw DataError("manifest: duplicate entry id '" + entry.id + "'");

    std::filesystem::path raster = require_string(e, "raster_path", "manifest.entry");
    if (raster.is_relative()) raster = base / raster;
    if (!std::filesystem::exists(raster))
      throw DataError("manifest: raster missing for entry '" + entry.id +
                      "': " + raster.string());
    entry.raster_path = raster;

    entry.illuminant = Illuminant::from_rgb(require_vec3(e, "illuminant_rgb", "manifest.entry"));
    entry.black_level = require_vec3(e, "black_level", "manifest.entry");
    entry.saturation = require_number(e, "saturation", "manifest.entry");
    if (!(entry.saturation > 0.0))
      throw DataError("manifest: saturation must be > 0 for entry '" + entry.id + "'");
    entry.sensor_name = require_string(e, "sensor_name", "manifest.entry");
    manifest.entries.push_back(std::move(entry));
  }
  return manifest;
}

LinearImage load_entry_image(const ManifestEntry& entry) {
  LinearImage img = load_raster(entry.raster_path);
  const bool black_match = img.black_level.r == entry.black_level.r &&
                           img.black_level.g == entry.black_level.g &&
                           img.black_level.b == entry.black_level.b;
  if (!black_match || img.saturation_level != entry.saturation)
    throw DataError("manifest: raster header disagrees with manifest metadata for entry '" +
                    entry.id + "'");
  return img;
}

void save_dataset(const SyntheticDataset& dataset, const std::filesystem::path& manifest_path,
                  const std::filesystem::path& raster_dir) {
  std::filesystem::create_directories(raster_dir);
  const std::filesystem::path base = manifest_path.parent_path();

  json entries = json::array();
  for (const LabeledImage& e : dataset.entries) {
    const std::filesystem::path raster_path = raster_dir / (e.id + ".dmraw");
    save_raster(raster_path, e.image);

    json entry;
    entry["id"] = e.id;
    entry["raster_path"] =
        std::filesystem::relative(raster_path, base).generic_string();
    entry["illuminant_rgb"] = vec3_json(e.illuminant.rgb());
    entry["black_level"] = vec3_json(e.image.black_level);
    entry["saturation"] = e.image.saturation_level;
    entry["sensor_name"] = dataset.sensor_name;
    entries.push_back(std::move(entry));
  }

  json j;
  j["version"] = kManifestVersion;
  j["sensor"]["name"] = dataset.sensor_name;
  j["sensor"]["d65_white"] = vec3_json(dataset.d65_white);
  j["entries"] = std::move(entries);
  write_file_atomic(manifest_path, j.dump(2) + "\n");
}

CalibrationFile load_calibration(const std::filesystem::path& path) {
  const json j = parse_json_file(path, "calibration");
  const std::string kind = require_string(j, "kind", "calibration");

  const json& rows = require_field(j, "matrix", "calibration");
  if (!rows.is_array() || rows.size() != 3)
    throw DataError("calibration: 'matrix' must be 3 rows");
  std::array<double, 9> m;
  for (std::size_t r = 0; r < 3; ++r) {
    const json& row = rows[r];
    if (!row.is_array() || row.size() != 3)
      throw DataError("calibration: 'matrix' rows must have 3 entries");
    for (std::size_t c = 0; c < 3; ++c) {
      if (!row[c].is_number()) throw DataError("calibration: matrix entries must be numbers");
      m[r * 3 + c] = row[c].get<double>();
    }
  }

  CalibrationFile calib;
  if (kind == "diagonal") {
    if (m[1] != 0.0 || m[2] != 0.0 || m[3] != 0.0 || m[5] != 0.0 || m[6] != 0.0 || m[7] != 0.0)
      throw DataError("calibration: kind is diagonal but the matrix has off-diagonal entries");
    calib.map = SensorMap::diagonal({m[0], m[4], m[8]});
  } else if (kind == "full") {
    calib.map = SensorMap::full(m);
  } else {
    throw DataError("calibration: unknown kind '" + kind + "'");
  }
  calib.source_white.rgb = require_vec3(j, "source_white", "calibration");
  calib.target_white.rgb = require_vec3(j, "target_white", "calibration");
  calib.source_white.validate();
  calib.target_white.validate();
  return calib;
}

void save_calibration(const std::filesystem::path& path, const CalibrationFile& calib) {
  calib.source_white.validate();
  calib.target_white.validate();
  json j;
  j["kind"] = calib.map.kind() == SensorMap::Kind::diagonal ? "diagonal" : "full";
  j["matrix"] = matrix_json(calib.map);
  j["source_white"] = vec3_json(calib.source_white.rgb);
  j["target_white"] = vec3_json(calib.target_white.rgb);
  write_file_atomic(path, j.dump(2) + "\n");
}

MlpModel load_model(const std::filesystem::path& path) {
  const json j = parse_json_file(path, "model");
  if (require_string(j, "format", "model") != kModelFormat)
    throw DataError("model: unsupported format tag in " + path.string());

  MlpModel model;
  const json& arch = require_field(j, "arch", "model");
  model.arch.input_dim = static_cast<int>(require_number(arch, "input_dim", "model.arch"));
  model.arch.hidden_width = static_cast<int>(require_number(arch, "hidden_width", "model.arch"));
  model.arch.hidden_layers = static_cast<int>(require_number(arch, "hidden_layers", "model.arch"));
  model.arch.output_dim = static_cast<int>(require_number(arch, "output_dim", "model.arch"));
  model.arch.validate();

  const json& order = require_field(j, "feature_order", "model");
  if (!order.is_array()) throw DataError("model: 'feature_order' must be an array");
  for (const json& name : order) {
    if (!name.is_string()) throw DataError("model: feature names must be strings");
    model.feature_order.push_back(name.get<std::string>());
  }

  const json& layers = require_field(j, "layers", "model");
  if (!layers.is_array()) throw DataError("model: 'layers' must be an array");
  long file_params = 0;
  for (const json& lj : layers) {
    MlpLayer layer;
    const json& w = require_field(lj, "w", "model.layer");
    const json& b = require_field(lj, "b", "model.layer");
    if (!w.is_array() || !b.is_array())
      throw DataError("model: layer 'w' and 'b' must be arrays");
    for (const json& row : w) {
      if (!row.is_array()) throw DataError("model: weight rows must be arrays");
      for (const json& v : row) {
        if (!v.is_number()) throw DataError("model: weights must be numbers");
        layer.weights.push_back(checked_float(v.get<double>(), "model"));
      }
    }
    for (const json& v : b) {
      if (!v.is_number()) throw DataError("model: biases must be numbers");
      layer.biases.push_back(checked_float(v.get<double>(), "model"));
    }
    file_params += static_cast<long>(layer.weights.size() + layer.biases.size());
    model.layers.push_back(std::move(layer));
  }

  if (file_params != model.arch.parameter_count()) {
    std::ostringstream msg;
    msg << "model: parameter count mismatch: file carries " << file_params
        << ", architecture requires " << model.arch.parameter_count();
    throw DataError(msg.str());
  }

  if (j.contains("meta")) {
    const json& meta = j["meta"];
    if (meta.contains("seed")) {
      if (!meta["seed"].is_number_unsigned() && !meta["seed"].is_number_integer())
        throw DataError("model: meta.seed must be an integer");
      model.seed = meta["seed"].get<std::uint64_t>();
    }
    if (meta.contains("calibration")) {
      if (!meta["calibration"].is_string())
        throw DataError("model: meta.calibration must be a string");
      model.calibration_fingerprint = meta["calibration"].get<std::string>();
    }
  }

  model.validate();
  return model;
}

void save_model(const std::filesystem::path& path, const MlpModel& model) {
  model.validate();
  json j;
  j["format"] = kModelFormat;
  j["arch"]["input_dim"] = model.arch.input_dim;
  j["arch"]["hidden_width"] = model.arch.hidden_width;
  j["arch"]["hidden_layers"] = model.arch.hidden_layers;
  j["arch"]["output_dim"] = model.arch.output_dim;
  j["feature_order"] = model.feature_order;

  json layers = json::array();
  for (int l = 0; l < model.arch.weight_layer_count(); ++l) {
    const MlpLayer& layer = model.layers[static_cast<std::size_t>(l)];
    const int in = model.arch.layer_input_dim(l);
    const int out = model.arch.layer_output_dim(l);
    json w = json::array();
    for (int o = 0; o < out; ++o) {
      json row = json::array();
      for (int i = 0; i < in; ++i)
        row.push_back(static_cast<double>(layer.weights[static_cast<std::size_t>(o) * in + i]));
      w.push_back(std::move(row));
    }
    json b = json::array();
    for (float v : layer.biases) b.push_back(static_cast<double>(v));
    json lj;
    lj["w"] = std::move(w);
    lj["b"] = std::move(b);
    layers.push_back(std::move(lj));
  }
  j["layers"] = std::move(layers);
  j["meta"]["seed"] = model.seed;
  j["meta"]["calibration"] = model.calibration_fingerprint;
  write_file_atomic(path, j.dump(2) + "\n");
}

void save_evaluation_report(const std::filesystem::path& path, const ErrorSummary& summary,
                            const std::vector<PerImageError>& per_image) {
  json j;
  j["n"] = summary.n;
  j["mean"] = summary.mean;
  j["median"] = summary.median;
  j["trimean"] = summary.trimean;
  j["best25"] = summary.best25;
  j["worst25"] = summary.worst25;
  j["quantile_rule"] = "linear-interp";
  json per = json::array();
  for (const PerImageError& e : per_image) {
    json entry;
    entry["id"] = e.id;
    entry["error_deg"] = e.error_deg;
    per.push_back(std::move(entry));
  }
  j["per_image"] = std::move(per);
  write_file_atomic(path, j.dump(2) + "\n");
}

void save_train_report(const std::filesystem::path& path, const TrainReport& report) {
  json j;
  j["epochs_run"] = report.train_loss.size();
  j["best_epoch"] = report.best_epoch;
  j["best_val_error_deg"] = report.best_val_error_deg;
  j["final_lr"] = report.final_lr;
  j["wall_seconds"] = report.wall_seconds;
  j["train_loss"] = report.train_loss;
  j["val_error_deg"] = report.val_error_deg;
  write_file_atomic(path, j.dump(2) + "\n");
}

void save_train_curves_csv(const std::filesystem::path& path, const TrainReport& report) {
  std::string out = "epoch,train_loss,val_error_deg\n";
  for (std::size_t i = 0; i < report.train_loss.size(); ++i) {
    out += std::to_string(i);
    out += ',';
    out += shortest_double(report.train_loss[i]);
    out += ',';
    out += shortest_double(report.val_error_deg[i]);
    out += '\n';
  }
  write_file_atomic(path, out);
}

namespace {

SensorMap transform_from_json(const json& j, const char* what) {
  const std::string kind = require_string(j, "kind", what);
  if (kind == "identity") return SensorMap::identity();
  const json& values = require_field(j, "values", what);
  if (kind == "diagonal") {
    if (!values.is_array() || values.size() != 3)
      throw DataError(std::string(what) + ": diagonal 'values' must be [r, g, b]");
    return SensorMap::diagonal(
        {values[0].get<double>(), values[1].get<double>(), values[2].get<double>()});
  }
  if (kind == "full") {
    if (!values.is_array() || values.size() != 3)
      throw DataError(std::string(what) + ": full 'values' must be 3 rows");
    std::array<double, 9> m;
    for (std::size_t r = 0; r < 3; ++r) {
      const json& row = values[r];
      if (!row.is_array() || row.size() != 3)
        throw DataError(std::string(what) + ": full 'values' rows must have 3 entries");
      for (std::size_t c = 0; c < 3; ++c) m[r * 3 + c] = row[c].get<double>();
    }
    return SensorMap::full(m);
  }
  throw DataError(std::string(what) + ": unknown transform kind '" + kind + "'");
}

}  // namespace

SyntheticWorldConfig load_world_config(const std::filesystem::path& path) {
  const json j = parse_json_file(path, "world config");
  SyntheticWorldConfig cfg = default_world_config();
  if (j.contains("scene_count")) cfg.scene_count = j["scene_count"].get<int>();
  if (j.contains("patches_per_scene")) cfg.patches_per_scene = j["patches_per_scene"].get<int>();
  if (j.contains("image_size")) cfg.image_size = j["image_size"].get<int>();
  if (j.contains("saturation_level")) cfg.saturation_level = j["saturation_level"].get<double>();
  if (j.contains("observation_noise_sigma"))
    cfg.observation_noise_sigma = j["observation_noise_sigma"].get<double>();
  if (j.contains("rng_seed")) cfg.rng_seed = j["rng_seed"].get<std::uint64_t>();
  if (j.contains("source_transform"))
    cfg.source_transform = transform_from_json(j["source_transform"], "world config");
  if (j.contains("target_transform"))
    cfg.target_transform = transform_from_json(j["target_transform"], "world config");
  if (j.contains("illuminant_locus")) {
    cfg.illuminant_locus.clear();
    const json& locus = j["illuminant_locus"];
    if (!locus.is_array()) throw DataError("world config: 'illuminant_locus' must be an array");
    for (const json& a : locus) {
      IlluminantAnchor anchor;
      anchor.center.r = require_number(a, "r", "world config anchor");
      anchor.center.g = require_number(a, "g", "world config anchor");
      if (a.contains("jitter_radius")) anchor.jitter_radius = a["jitter_radius"].get<double>();
      cfg.illuminant_locus.push_back(anchor);
    }
  }
  cfg.validate();
  return cfg;
}

void save_world(const SyntheticWorld& world, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  save_dataset(world.source, out_dir / "source_manifest.json", out_dir / "source");
  save_dataset(world.target, out_dir / "target_manifest.json", out_dir / "target");
  CalibrationFile truth;
  truth.map = world.true_map;
  truth.source_white = world.source_white;
  truth.target_white = world.target_white;
  save_calibration(out_dir / "true_map.json", truth);
}

}  // namespace dmcc
