// Microbenchmarks for the inference-facing pieces: preprocessing, feature
// extraction, the network forward pass, and the end-to-end estimate.

#include <benchmark/benchmark.h>

#include <random>

#include "dmcc/features.hpp"
#include "dmcc/mlp.hpp"
#include "dmcc/rng.hpp"
#include "dmcc/synth.hpp"
#include "dmcc/trainer.hpp"

namespace {

dmcc::LinearImage make_image(int size) {
  dmcc::SyntheticWorldConfig cfg;
  cfg.scene_count = 1;
  cfg.image_size = size;
  cfg.rng_seed = 11;
  cfg.target_transform = dmcc::SensorMap::diagonal({0.7, 1.0, 1.4});
  return dmcc::generate_world(cfg).source.entries[0].image;
}

dmcc::MlpModel make_model() {
  std::mt19937_64 rng = dmcc::make_rng_stream(3, 0);
  return dmcc::he_init(dmcc::MlpArchitecture{}, rng);
}

void BM_Preprocess64(benchmark::State& state) {
  const dmcc::LinearImage img = make_image(64);
  for (auto _ : state) {
    benchmark::DoNotOptimize(dmcc::preprocess(img));
  }
}
BENCHMARK(BM_Preprocess64);

void BM_Preprocess256(benchmark::State& state) {
  const dmcc::LinearImage img = make_image(256);
  for (auto _ : state) {
    benchmark::DoNotOptimize(dmcc::preprocess(img));
  }
}
BENCHMARK(BM_Preprocess256);

void BM_ExtractFeatures(benchmark::State& state) {
  const dmcc::PreprocessedImage pre = dmcc::preprocess(make_image(64));
  for (auto _ : state) {
    benchmark::DoNotOptimize(dmcc::extract_features(pre.image, pre.mask));
  }
}
BENCHMARK(BM_ExtractFeatures);

void BM_Forward(benchmark::State& state) {
  const dmcc::MlpModel model = make_model();
  const dmcc::PreprocessedImage pre = dmcc::preprocess(make_image(64));
  const dmcc::FeatureVector f = dmcc::extract_features(pre.image, pre.mask);
  dmcc::detail::TrainWorkspace ws;
  for (auto _ : state) {
    benchmark::DoNotOptimize(dmcc::detail::forward_unchecked(model, f, ws));
  }
}
BENCHMARK(BM_Forward);

void BM_EstimateEndToEnd(benchmark::State& state) {
  const dmcc::MlpModel model = make_model();
  const dmcc::LinearImage img = make_image(64);
  for (auto _ : state) {
    benchmark::DoNotOptimize(dmcc::predict_illuminant(model, img));
  }
}
BENCHMARK(BM_EstimateEndToEnd);

}  // namespace

BENCHMARK_MAIN();
