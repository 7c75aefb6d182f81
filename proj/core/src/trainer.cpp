#include "dmcc/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <numeric>
#include <sstream>
#include <thread>

#include "dmcc/features.hpp"
#include "dmcc/rng.hpp"

namespace dmcc {

namespace {

// Stream ids partitioning the run's randomness; entry streams are offset so
// they never collide with the scalar ones.
constexpr std::uint64_t kStreamHeInit = 0x4E;
constexpr std::uint64_t kStreamShuffle = 0x53;
constexpr std::uint64_t kStreamSplit = 0x51;
constexpr std::uint64_t kStreamEntryBase = 0xA0000000ull;

unsigned thread_count_from_env() {
  const char* env = std::getenv("DMCC_THREADS");
  if (env == nullptr || *env == '\0') return 1;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (end == nullptr || *end != '\0' || v < 1 || v > 256)
    throw DataError("DMCC_THREADS must be an integer in [1, 256]");
  return static_cast<unsigned>(v);
}

struct EntryResult {
  bool ok = false;
  std::string id;
  std::string error;
  TrainingSample original;
  std::vector<TrainingSample> augmented;
};

EntryResult process_entry(std::size_t index, const SampleProvider& provider, const SensorMap& m,
                          const AugmentConfig& aug, const PreprocessOptions& prep) {
  EntryResult result;
  result.id = "#" + std::to_string(index);
  try {
    const LabeledImage src = provider(index);
    result.id = src.id;

    const LinearImage dark = subtract_black_level(src.image);
    const LinearImage mapped = m.is_identity() ? dark : map_image(m, dark);
    const PixelMask full_mask = clip_extremes(mapped, prep.sat_fraction, prep.dark_fraction);
    PixelMask mask64;
    const LinearImage img64 = resize_to_64(mapped, full_mask, &mask64);

    const Illuminant label = map_illuminant(m, src.illuminant);
    result.original = {src.id, extract_features(img64, mask64), label};

    std::mt19937_64 rng = make_rng_stream(aug.rng_seed, kStreamEntryBase + index);
    result.augmented.reserve(static_cast<std::size_t>(aug.samples_per_image));
    for (int k = 0; k < aug.samples_per_image; ++k) {
      const Chromaticity c = sample_illuminant(label.chromaticity(), aug, rng);
      const Illuminant relit_label = Illuminant::from_chromaticity(c);
      const LinearImage relit = relight(img64, label, relit_label);
      result.augmented.push_back(
          {src.id + "#aug" + std::to_string(k), extract_features(relit, mask64), relit_label});
    }
    result.ok = true;
  } catch (const std::exception& e) {
    result.ok = false;
    result.error = e.what();
  }
  return result;
}

}  // namespace

DatasetSplit build_training_set(std::size_t count, const SampleProvider& provider,
                                const SensorMap& m, const AugmentConfig& aug,
                                const PreprocessOptions& prep, double validation_fraction) {
  aug.validate();
  if (validation_fraction < 0.0 || !(validation_fraction < 1.0))
    throw DataError("build_training_set: validation_fraction must be in [0, 1)");

  DatasetSplit split;
  if (count == 0) return split;

  std::vector<EntryResult> results(count);
  const unsigned threads = std::min<unsigned>(thread_count_from_env(),
                                              static_cast<unsigned>(count));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i)
      results[i] = process_entry(i, provider, m, aug, prep);
  } else {
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        results[i] = process_entry(i, provider, m, aug, prep);
      }
    };
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }

  std::vector<std::size_t> ok_indices;
  ok_indices.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (results[i].ok) {
      ok_indices.push_back(i);
    } else {
      split.failures.emplace_back(results[i].id, results[i].error);
    }
  }
  if (split.failures.size() * 10 > count) {
    std::ostringstream msg;
    msg << "build_training_set: " << split.failures.size() << " of " << count
        << " entries failed (>10%)";
    for (std::size_t i = 0; i < std::min<std::size_t>(split.failures.size(), 5); ++i)
      msg << "\n  " << split.failures[i].first << ": " << split.failures[i].second;
    throw DataError(msg.str());
  }

  // Validation scenes are chosen among the originals; their augmented copies
  // are dropped so no view of a validation scene reaches training.
  std::vector<std::size_t> order = ok_indices;
  std::mt19937_64 split_rng = make_rng_stream(aug.rng_seed, kStreamSplit);
  std::shuffle(order.begin(), order.end(), split_rng);

  std::size_t val_count = 0;
  if (order.size() >= 2 && validation_fraction > 0.0) {
    val_count = static_cast<std::size_t>(std::floor(validation_fraction *
                                                    static_cast<double>(order.size())));
    val_count = std::clamp<std::size_t>(val_count, 1, order.size() - 1);
  }
  std::vector<bool> is_validation(count, false);
  for (std::size_t k = 0; k < val_count; ++k) is_validation[order[k]] = true;

  for (std::size_t i : ok_indices) {
    EntryResult& r = results[i];
    if (is_validation[i]) {
      split.validation.push_back(std::move(r.original));
    } else {
      split.training.push_back(std::move(r.original));
      for (TrainingSample& s : r.augmented) split.training.push_back(std::move(s));
    }
  }
  return split;
}

DatasetSplit build_training_set(const std::vector<LabeledImage>& source, const SensorMap& m,
                                const AugmentConfig& aug, const PreprocessOptions& prep,
                                double validation_fraction) {
  return build_training_set(
      source.size(), [&source](std::size_t i) { return source[i]; }, m, aug, prep,
      validation_fraction);
}

std::pair<MlpModel, TrainReport> train(const DatasetSplit& split, const TrainingConfig& cfg) {
  cfg.validate();
  if (split.training.empty()) throw DataError("train: empty training set");
  // With no validation scenes (tiny datasets), epoch selection falls back to
  // the training samples.
  const std::vector<TrainingSample>& validation =
      split.validation.empty() ? split.training : split.validation;

  const auto t_start = std::chrono::steady_clock::now();

  std::mt19937_64 init_rng = make_rng_stream(cfg.rng_seed, kStreamHeInit);
  MlpModel model = he_init(cfg.architecture, init_rng);
  model.seed = cfg.rng_seed;
  model.validate();

  const long param_count = model.parameter_count();
  AdamState state = AdamState::for_parameter_count(param_count);
  MlpGradient grad;
  grad.values.assign(static_cast<std::size_t>(param_count), 0.0);
  detail::TrainWorkspace ws;

  const std::size_t n = split.training.size();
  const long batches_per_epoch =
      static_cast<long>((n + static_cast<std::size_t>(cfg.batch_size) - 1) /
                        static_cast<std::size_t>(cfg.batch_size));
  const long total_steps = static_cast<long>(cfg.epochs) * batches_per_epoch;

  std::vector<std::size_t> indices(n);
  std::iota(indices.begin(), indices.end(), 0);
  std::mt19937_64 shuffle_rng = make_rng_stream(cfg.rng_seed, kStreamShuffle);

  TrainReport report;
  report.train_loss.reserve(static_cast<std::size_t>(cfg.epochs));
  report.val_error_deg.reserve(static_cast<std::size_t>(cfg.epochs));

  std::vector<MlpLayer> best_layers = model.layers;
  double best_val = std::numeric_limits<double>::infinity();
  int best_epoch = -1;

  long global_step = 0;
  double final_lr = 0.0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(indices.begin(), indices.end(), shuffle_rng);

    double epoch_loss_sum = 0.0;
    for (long b = 0; b < batches_per_epoch; ++b) {
      const std::size_t begin = static_cast<std::size_t>(b) * cfg.batch_size;
      const std::size_t end = std::min(n, begin + static_cast<std::size_t>(cfg.batch_size));
      const double batch_n = static_cast<double>(end - begin);

      std::fill(grad.values.begin(), grad.values.end(), 0.0);
      double angular_sum = 0.0;
      try {
        for (std::size_t k = begin; k < end; ++k) {
          const TrainingSample& s = split.training[indices[k]];
          angular_sum +=
              detail::accumulate_angular_gradient(model, s.features, s.label, grad.values, ws);
        }
      } catch (const NumericError& e) {
        std::ostringstream msg;
        msg << e.what() << " (epoch " << epoch << ", batch " << b << ")";
        throw NumericError(msg.str());
      }
      for (double& g : grad.values) g /= batch_n;

      // L1 term: lambda * ||theta||_1 in the loss, lambda * sign(theta) in
      // the gradient, added once per batch (it does not depend on samples).
      double l1 = 0.0;
      long idx = 0;
      for (const MlpLayer& l : model.layers) {
        for (float w : l.weights) {
          l1 += std::abs(static_cast<double>(w));
          grad.values[static_cast<std::size_t>(idx++)] +=
              cfg.l1_lambda * (w > 0.0f ? 1.0 : (w < 0.0f ? -1.0 : 0.0));
        }
        for (float v : l.biases) {
          l1 += std::abs(static_cast<double>(v));
          grad.values[static_cast<std::size_t>(idx++)] +=
              cfg.l1_lambda * (v > 0.0f ? 1.0 : (v < 0.0f ? -1.0 : 0.0));
        }
      }

      const double batch_loss = angular_sum / batch_n + cfg.l1_lambda * l1;
      if (!std::isfinite(batch_loss)) {
        std::ostringstream msg;
        msg << "train: non-finite loss at epoch " << epoch << ", batch " << b;
        throw NumericError(msg.str());
      }
      epoch_loss_sum += batch_loss;

      const double lr = cosine_lr(global_step, total_steps, cfg.learning_rate, cfg.lr_min);
      adam_step(state, model, grad, lr);
      final_lr = lr;
      ++global_step;
    }
    report.train_loss.push_back(epoch_loss_sum / static_cast<double>(batches_per_epoch));

    double val_sum = 0.0;
    for (const TrainingSample& s : validation) {
      const Chromaticity c = detail::forward_unchecked(model, s.features, ws);
      val_sum += angular_error_deg({c.r, c.g, 1.0 - c.r - c.g}, s.label.rgb());
    }
    const double val_err = val_sum / static_cast<double>(validation.size());
    report.val_error_deg.push_back(val_err);

    if (val_err < best_val) {
      best_val = val_err;
      best_epoch = epoch;
      best_layers = model.layers;
    }
    if (cfg.early_stopping_patience > 0 &&
        epoch - best_epoch >= cfg.early_stopping_patience) {
      break;
    }
  }

  model.layers = std::move(best_layers);
  report.best_epoch = best_epoch;
  report.best_val_error_deg = best_val;
  report.final_lr = final_lr;
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return {std::move(model), std::move(report)};
}

Illuminant predict_illuminant(const MlpModel& model, const LinearImage& image,
                              const PreprocessOptions& prep) {
  const PreprocessedImage pre = preprocess(image, prep);
  const FeatureVector f = extract_features(pre.image, pre.mask);
  const Chromaticity c = forward(model, f);
  return Illuminant::from_chromaticity(c);
}

}  // namespace dmcc
