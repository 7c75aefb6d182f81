// dmcc: command-line front end for the dual-mapping color constancy library.
// Subcommands: calibrate, train, estimate, evaluate, synth, apply.
// Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dmcc/io.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

dmcc::Vec3 vec3_from_flag(const std::vector<double>& v, const char* flag) {
  if (v.size() != 3)
    throw UsageError(std::string(flag) + " expects three comma-separated values 'r,g,b'");
  return {v[0], v[1], v[2]};
}

json vec3_json(const dmcc::Vec3& v) { return json::array({v.r, v.g, v.b}); }

void print_matrix(const dmcc::SensorMap& m) {
  const auto& a = m.matrix();
  for (int r = 0; r < 3; ++r) {
    std::cout << "  [";
    for (int c = 0; c < 3; ++c) std::cout << ' ' << a[static_cast<std::size_t>(r) * 3 + c];
    std::cout << " ]\n";
  }
}

dmcc::WhitePoint white_from_manifest(const fs::path& manifest_path) {
  const dmcc::Manifest m = dmcc::load_manifest(manifest_path);
  if (!m.d65_white)
    throw dmcc::DataError("manifest has no sensor.d65_white: " + manifest_path.string());
  dmcc::WhitePoint w{*m.d65_white};
  w.validate();
  return w;
}

// ---- calibrate ----------------------------------------------------------

struct CalibrateArgs {
  std::vector<double> source_white;
  std::vector<double> target_white;
  std::string source_manifest;
  std::string target_manifest;
  std::string pairs_csv;
  std::string out;
  bool full = false;
  bool json_out = false;
};

std::pair<std::vector<dmcc::WhitePoint>, std::vector<dmcc::WhitePoint>> read_pairs_csv(
    const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw dmcc::DataError("pairs: cannot open " + path.string());
  std::vector<dmcc::WhitePoint> source, target;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::vector<double> vals;
    std::string tok;
    while (std::getline(ls, tok, ',')) {
      try {
        vals.push_back(std::stod(tok));
      } catch (const std::exception&) {
        throw dmcc::DataError("pairs: malformed number at line " + std::to_string(line_no));
      }
    }
    if (vals.size() != 6)
      throw dmcc::DataError("pairs: line " + std::to_string(line_no) +
                            " must be 'sr,sg,sb,tr,tg,tb'");
    source.push_back({{vals[0], vals[1], vals[2]}});
    target.push_back({{vals[3], vals[4], vals[5]}});
  }
  return {std::move(source), std::move(target)};
}

int run_calibrate(const CalibrateArgs& args) {
  dmcc::WhitePoint source, target;
  if (!args.source_manifest.empty())
    source = white_from_manifest(args.source_manifest);
  else if (!args.source_white.empty())
    source.rgb = vec3_from_flag(args.source_white, "--source-white");
  else
    throw UsageError("calibrate requires --source-white or --source-manifest");
  if (!args.target_manifest.empty())
    target = white_from_manifest(args.target_manifest);
  else if (!args.target_white.empty())
    target.rgb = vec3_from_flag(args.target_white, "--target-white");
  else
    throw UsageError("calibrate requires --target-white or --target-manifest");
  source.validate();
  target.validate();

  dmcc::SensorMap map = dmcc::SensorMap::identity();
  if (args.full) {
    if (args.pairs_csv.empty()) throw UsageError("--full requires --pairs <csv>");
    auto [s, t] = read_pairs_csv(args.pairs_csv);
    map = dmcc::calibrate_full(s, t);
  } else {
    map = dmcc::calibrate_diagonal(source, target);
  }

  dmcc::CalibrationFile calib{map, source, target};
  dmcc::save_calibration(args.out, calib);

  if (args.json_out) {
    json j;
    j["kind"] = map.kind() == dmcc::SensorMap::Kind::diagonal ? "diagonal" : "full";
    j["fingerprint"] = dmcc::calibration_fingerprint(map);
    j["out"] = args.out;
    std::cout << j.dump() << "\n";
  } else {
    std::cout << "calibration ("
              << (map.kind() == dmcc::SensorMap::Kind::diagonal ? "diagonal" : "full")
              << "):\n";
    print_matrix(map);
    std::cout << "written: " << args.out << "\n";
  }
  return 0;
}

// ---- train --------------------------------------------------------------

struct TrainArgs {
  std::string dataset;
  std::string calib;
  std::string out;
  std::string report;
  std::string curves;
  std::uint64_t seed = 0;
  int epochs = 10000;
  int batch_size = 32;
  double lr = 7e-3;
  double lr_min = 0.0;
  double l1 = 1e-5;
  double aug_radius = 0.05;
  int aug_per_image = 4;
  double val_fraction = 0.1;
  int patience = 0;
  double sat_fraction = 0.98;
  double dark_fraction = 0.02;
  bool json_out = false;
};

int run_train(const TrainArgs& args) {
  const dmcc::Manifest manifest = dmcc::load_manifest(args.dataset);
  const dmcc::CalibrationFile calib = dmcc::load_calibration(args.calib);

  dmcc::AugmentConfig aug;
  aug.radius = args.aug_radius;
  aug.samples_per_image = args.aug_per_image;
  aug.rng_seed = args.seed;

  dmcc::PreprocessOptions prep;
  prep.sat_fraction = args.sat_fraction;
  prep.dark_fraction = args.dark_fraction;

  const auto provider = [&manifest](std::size_t i) -> dmcc::LabeledImage {
    const dmcc::ManifestEntry& e = manifest.entries[i];
    return {e.id, dmcc::load_entry_image(e), e.illuminant};
  };

  dmcc::DatasetSplit split = dmcc::build_training_set(
      manifest.entries.size(), provider, calib.map, aug, prep, args.val_fraction);
  for (const auto& [id, reason] : split.failures)
    std::cerr << "warning: entry '" << id << "' skipped: " << reason << "\n";

  dmcc::TrainingConfig cfg;
  cfg.batch_size = args.batch_size;
  cfg.epochs = args.epochs;
  cfg.learning_rate = args.lr;
  cfg.lr_min = args.lr_min;
  cfg.l1_lambda = args.l1;
  cfg.early_stopping_patience = args.patience;
  cfg.validation_fraction = args.val_fraction;
  cfg.rng_seed = args.seed;

  auto [model, report] = dmcc::train(split, cfg);
  model.calibration_fingerprint = dmcc::calibration_fingerprint(calib.map);
  dmcc::save_model(args.out, model);
  if (!args.report.empty()) dmcc::save_train_report(args.report, report);
  if (!args.curves.empty()) dmcc::save_train_curves_csv(args.curves, report);

  if (args.json_out) {
    json j;
    j["model"] = args.out;
    j["train_size"] = split.training.size();
    j["val_size"] = split.validation.size();
    j["best_epoch"] = report.best_epoch;
    j["best_val_error_deg"] = report.best_val_error_deg;
    j["wall_seconds"] = report.wall_seconds;
    std::cout << j.dump() << "\n";
  } else {
    std::cout << "trained on " << split.training.size() << " samples ("
              << split.validation.size() << " validation scenes)\n";
    std::cout << "best epoch " << report.best_epoch << ": validation error "
              << report.best_val_error_deg << " deg\n";
    std::cout << "written: " << args.out << "\n";
  }
  return 0;
}

// ---- estimate / apply ---------------------------------------------------

struct EstimateArgs {
  std::string model;
  std::string image;
  bool json_out = false;
};

int run_estimate(const EstimateArgs& args) {
  const dmcc::MlpModel model = dmcc::load_model(args.model);
  const dmcc::LinearImage image = dmcc::load_raster(args.image);

  const auto t0 = std::chrono::steady_clock::now();
  const dmcc::Illuminant est = dmcc::predict_illuminant(model, image);
  const double latency_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();

  const dmcc::Chromaticity c = est.chromaticity();
  const double b = 1.0 - c.r - c.g;
  if (args.json_out) {
    json j;
    j["r"] = c.r;
    j["g"] = c.g;
    j["b"] = b;
    j["illuminant_rgb"] = vec3_json(est.rgb());
    j["latency_ms"] = latency_ms;
    std::cout << j.dump() << "\n";
  } else {
    std::cout << "estimate: r=" << c.r << " g=" << c.g << " b=" << b << "\n";
    std::cout << "illuminant_rgb: [" << est.rgb().r << ", " << est.rgb().g << ", "
              << est.rgb().b << "]\n";
    std::cout << "latency_ms: " << latency_ms << "\n";
  }
  return 0;
}

struct ApplyArgs {
  std::string model;
  std::string image;
  std::string out;
  bool json_out = false;
};

int run_apply(const ApplyArgs& args) {
  const dmcc::MlpModel model = dmcc::load_model(args.model);
  const dmcc::LinearImage image = dmcc::load_raster(args.image);
  const dmcc::Illuminant est = dmcc::predict_illuminant(model, image);

  // Von Kries correction: divide each channel by the G-normalized estimate.
  const dmcc::Vec3 gains = est.rgb() / est.rgb().g;
  dmcc::LinearImage corrected = dmcc::subtract_black_level(image);
  for (std::size_t i = 0; i < corrected.pixel_count(); ++i)
    corrected.set(i, dmcc::cwise_div(corrected.at(i), gains));
  dmcc::save_raster(args.out, corrected);

  if (args.json_out) {
    json j;
    j["estimate_rgb"] = vec3_json(est.rgb());
    j["out"] = args.out;
    std::cout << j.dump() << "\n";
  } else {
    std::cout << "estimate_rgb: [" << est.rgb().r << ", " << est.rgb().g << ", "
              << est.rgb().b << "]\n";
    std::cout << "written: " << args.out << "\n";
  }
  return 0;
}

// ---- evaluate -----------------------------------------------------------

struct EvaluateArgs {
  std::string model;
  std::string dataset;
  std::string report;
  std::string baseline;
  double sog_p = 6.0;
  double sat_fraction = 0.98;
  double dark_fraction = 0.02;
  bool json_out = false;
};

int run_evaluate(const EvaluateArgs& args) {
  if (args.baseline.empty() && args.model.empty())
    throw UsageError("evaluate requires --model or --baseline");
  if (!args.baseline.empty() && args.baseline != "gray-world" &&
      args.baseline != "white-patch" && args.baseline != "shades-of-gray")
    throw UsageError("--baseline must be gray-world, white-patch or shades-of-gray");

  const dmcc::Manifest manifest = dmcc::load_manifest(args.dataset);
  if (manifest.entries.empty()) throw dmcc::DataError("evaluate: dataset has no entries");

  std::optional<dmcc::MlpModel> model;
  if (args.baseline.empty()) model = dmcc::load_model(args.model);

  dmcc::PreprocessOptions prep;
  prep.sat_fraction = args.sat_fraction;
  prep.dark_fraction = args.dark_fraction;

  std::vector<double> errors;
  std::vector<dmcc::PerImageError> per_image;
  errors.reserve(manifest.entries.size());
  for (const dmcc::ManifestEntry& entry : manifest.entries) {
    const dmcc::LinearImage raw = dmcc::load_entry_image(entry);
    dmcc::Illuminant est;
    if (model) {
      est = dmcc::predict_illuminant(*model, raw, prep);
    } else {
      const dmcc::PreprocessedImage pre = dmcc::preprocess(raw, prep);
      if (args.baseline == "gray-world")
        est = dmcc::baseline_gray_world(pre.image, pre.mask);
      else if (args.baseline == "white-patch")
        est = dmcc::baseline_white_patch(pre.image, pre.mask);
      else
        est = dmcc::baseline_shades_of_gray(pre.image, pre.mask, args.sog_p);
    }
    const double err = dmcc::angular_error_deg(est.rgb(), entry.illuminant.rgb());
    errors.push_back(err);
    per_image.push_back({entry.id, err});
  }

  const dmcc::ErrorSummary summary = dmcc::summarize(errors);
  if (!args.report.empty()) dmcc::save_evaluation_report(args.report, summary, per_image);

  if (args.json_out) {
    json j;
    j["n"] = summary.n;
    j["mean"] = summary.mean;
    j["median"] = summary.median;
    j["trimean"] = summary.trimean;
    j["best25"] = summary.best25;
    j["worst25"] = summary.worst25;
    std::cout << j.dump() << "\n";
  } else {
    std::cout << "n=" << summary.n << " mean=" << summary.mean << " median=" << summary.median
              << " trimean=" << summary.trimean << " best25=" << summary.best25
              << " worst25=" << summary.worst25 << " (degrees)\n";
    if (!args.report.empty()) std::cout << "report written: " << args.report << "\n";
  }
  return 0;
}

// ---- synth --------------------------------------------------------------

struct SynthArgs {
  std::string config;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> scenes;
  std::optional<int> image_size;
  std::optional<double> noise_sigma;
  bool json_out = false;
};

int run_synth(const SynthArgs& args) {
  dmcc::SyntheticWorldConfig cfg =
      args.config.empty() ? dmcc::default_world_config() : dmcc::load_world_config(args.config);
  if (args.seed) cfg.rng_seed = *args.seed;
  if (args.scenes) cfg.scene_count = *args.scenes;
  if (args.image_size) cfg.image_size = *args.image_size;
  if (args.noise_sigma) cfg.observation_noise_sigma = *args.noise_sigma;
  cfg.validate();

  const dmcc::SyntheticWorld world = dmcc::generate_world(cfg);
  dmcc::save_world(world, args.out_dir);

  if (args.json_out) {
    json j;
    j["scenes"] = cfg.scene_count;
    j["image_size"] = cfg.image_size;
    j["out_dir"] = args.out_dir;
    std::cout << j.dump() << "\n";
  } else {
    std::cout << "world: " << cfg.scene_count << " scenes at " << cfg.image_size << "x"
              << cfg.image_size << "\n";
    std::cout << "written: " << args.out_dir << "/{source,target}_manifest.json\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dual-mapping color constancy: calibrate, train, estimate, evaluate"};
  app.require_subcommand(1);

  CalibrateArgs cal;
  CLI::App* cal_cmd = app.add_subcommand("calibrate", "Compute a cross-sensor calibration");
  cal_cmd->add_option("--source-white", cal.source_white, "source D65 white 'r,g,b'")
      ->delimiter(',');
  cal_cmd->add_option("--target-white", cal.target_white, "target D65 white 'r,g,b'")
      ->delimiter(',');
  cal_cmd->add_option("--source-manifest", cal.source_manifest,
                      "manifest supplying the source white");
  cal_cmd->add_option("--target-manifest", cal.target_manifest,
                      "manifest supplying the target white");
  cal_cmd->add_flag("--full", cal.full, "least-squares 3x3 fit instead of diagonal");
  cal_cmd->add_option("--pairs", cal.pairs_csv, "csv of 'sr,sg,sb,tr,tg,tb' correspondences");
  cal_cmd->add_option("--out", cal.out, "output calibration json")->required();
  cal_cmd->add_flag("--json", cal.json_out, "machine-readable stdout");

  TrainArgs tr;
  CLI::App* tr_cmd = app.add_subcommand("train", "Train the illuminant estimator");
  tr_cmd->add_option("--dataset", tr.dataset, "source-sensor manifest")->required();
  tr_cmd->add_option("--calib", tr.calib, "calibration json")->required();
  tr_cmd->add_option("--out", tr.out, "output model json")->required();
  tr_cmd->add_option("--seed", tr.seed, "seed controlling all randomness")->required();
  tr_cmd->add_option("--epochs", tr.epochs, "training epochs");
  tr_cmd->add_option("--batch", tr.batch_size, "mini-batch size");
  tr_cmd->add_option("--lr", tr.lr, "peak learning rate");
  tr_cmd->add_option("--lr-min", tr.lr_min, "final learning rate of the cosine schedule");
  tr_cmd->add_option("--l1", tr.l1, "L1 regularization weight");
  tr_cmd->add_option("--aug-radius", tr.aug_radius, "augmentation disc radius");
  tr_cmd->add_option("--aug-per-image", tr.aug_per_image, "augmented copies per image");
  tr_cmd->add_option("--val-fraction", tr.val_fraction, "validation split fraction");
  tr_cmd->add_option("--patience", tr.patience, "early-stopping patience (0 = off)");
  tr_cmd->add_option("--sat-fraction", tr.sat_fraction, "saturation clip threshold fraction");
  tr_cmd->add_option("--dark-fraction", tr.dark_fraction, "dark pixel clip fraction");
  tr_cmd->add_option("--report", tr.report, "write training report json");
  tr_cmd->add_option("--curves", tr.curves, "write per-epoch csv");
  tr_cmd->add_flag("--json", tr.json_out, "machine-readable stdout");

  EstimateArgs est;
  CLI::App* est_cmd = app.add_subcommand("estimate", "Estimate the illuminant of one raster");
  est_cmd->add_option("--model", est.model, "model json")->required();
  est_cmd->add_option("--image", est.image, "input raster")->required();
  est_cmd->add_flag("--json", est.json_out, "machine-readable stdout");

  EvaluateArgs ev;
  CLI::App* ev_cmd = app.add_subcommand("evaluate", "Evaluate a model or baseline on a dataset");
  ev_cmd->add_option("--model", ev.model, "model json");
  ev_cmd->add_option("--dataset", ev.dataset, "manifest to evaluate on")->required();
  ev_cmd->add_option("--report", ev.report, "output report json");
  ev_cmd->add_option("--baseline", ev.baseline,
                     "evaluate gray-world, white-patch or shades-of-gray instead");
  ev_cmd->add_option("--sog-p", ev.sog_p, "shades-of-gray norm order");
  ev_cmd->add_option("--sat-fraction", ev.sat_fraction, "saturation clip threshold fraction");
  ev_cmd->add_option("--dark-fraction", ev.dark_fraction, "dark pixel clip fraction");
  ev_cmd->add_flag("--json", ev.json_out, "machine-readable stdout");

  SynthArgs sy;
  CLI::App* sy_cmd = app.add_subcommand("synth", "Generate a synthetic two-sensor world");
  sy_cmd->add_option("--config", sy.config, "world config json (defaults when omitted)");
  sy_cmd->add_option("--out-dir", sy.out_dir, "output directory")->required();
  sy_cmd->add_option("--seed", sy.seed, "override the config rng seed");
  sy_cmd->add_option("--scenes", sy.scenes, "override the scene count");
  sy_cmd->add_option("--image-size", sy.image_size, "override the image size");
  sy_cmd->add_option("--noise-sigma", sy.noise_sigma, "override the observation noise");
  sy_cmd->add_flag("--json", sy.json_out, "machine-readable stdout");

  ApplyArgs ap;
  CLI::App* ap_cmd = app.add_subcommand("apply", "White-balance a raster with a model");
  ap_cmd->add_option("--model", ap.model, "model json")->required();
  ap_cmd->add_option("--image", ap.image, "input raster")->required();
  ap_cmd->add_option("--out", ap.out, "output raster")->required();
  ap_cmd->add_flag("--json", ap.json_out, "machine-readable stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (cal_cmd->parsed()) return run_calibrate(cal);
    if (tr_cmd->parsed()) return run_train(tr);
    if (est_cmd->parsed()) return run_estimate(est);
    if (ev_cmd->parsed()) return run_evaluate(ev);
    if (sy_cmd->parsed()) return run_synth(sy);
    if (ap_cmd->parsed()) return run_apply(ap);
    std::cerr << "error: no subcommand selected\n";
    return 2;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const dmcc::NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 4;
  } catch (const dmcc::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
