#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "dmcc/augment.hpp"
#include "dmcc/calibration.hpp"
#include "dmcc/mlp.hpp"

namespace dmcc {

struct TrainingSample {
  std::string id;
  FeatureVector features;
  Illuminant label;
};

struct DatasetSplit {
  std::vector<TrainingSample> training;
  std::vector<TrainingSample> validation;
  std::vector<std::pair<std::string, std::string>> failures;  // entry id, reason
};

struct TrainReport {
  std::vector<double> train_loss;     // per-epoch mean loss (radians + L1 term)
  std::vector<double> val_error_deg;  // per-epoch validation mean angular error
  int best_epoch = -1;
  double best_val_error_deg = 0.0;
  double final_lr = 0.0;
  double wall_seconds = 0.0;
};

using SampleProvider = std::function<LabeledImage(std::size_t)>;

// Maps every source entry through M (image and label), preprocesses, and
// featurizes; then appends samples_per_image relit copies per training
// original. The validation split is drawn from the originals before
// augmentation, so no augmented view of a validation scene leaks into
// training. Per-entry failures carry the entry id; more than 10% failures
// abort. Feature extraction parallelizes over entries when DMCC_THREADS > 1
// with per-entry rng streams, so results match the single-threaded run.
DatasetSplit build_training_set(std::size_t count, const SampleProvider& provider,
                                const SensorMap& m, const AugmentConfig& aug,
                                const PreprocessOptions& prep = {},
                                double validation_fraction = 0.1);
DatasetSplit build_training_set(const std::vector<LabeledImage>& source, const SensorMap& m,
                                const AugmentConfig& aug, const PreprocessOptions& prep = {},
                                double validation_fraction = 0.1);

// Mini-batch Adam with a cosine learning-rate schedule over
// epochs * ceil(n / batch_size) steps and a per-epoch seeded shuffle. The
// short final batch is used, its gradient averaged over its actual size.
// Returns the parameters of the epoch with the lowest validation error.
// Training aborts with NumericError when the loss stops being finite,
// reporting the epoch and batch. Single-threaded for determinism.
std::pair<MlpModel, TrainReport> train(const DatasetSplit& split, const TrainingConfig& cfg);

// Inference pipeline: preprocess, featurize, forward. Returns the estimate
// as a unit-norm illuminant.
Illuminant predict_illuminant(const MlpModel& model, const LinearImage& image,
                              const PreprocessOptions& prep = {});

}  // namespace dmcc
