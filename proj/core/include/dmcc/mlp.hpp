#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dmcc/features.hpp"
#include "dmcc/image.hpp"

namespace dmcc {

// Fully connected ReLU network mapping the 8 chromaticity statistics to an
// (r, g) illuminant estimate. The default shape carries exactly 651
// parameters.
struct MlpArchitecture {
  int input_dim = 8;
  int hidden_width = 11;
  int hidden_layers = 5;
  int output_dim = 2;

  int weight_layer_count() const { return hidden_layers + 1; }
  int layer_input_dim(int layer) const;
  int layer_output_dim(int layer) const;
  long parameter_count() const;
  void validate() const;

  bool operator==(const MlpArchitecture&) const = default;
};

struct MlpLayer {
  std::vector<float> weights;  // layer_output_dim x layer_input_dim, row-major
  std::vector<float> biases;   // layer_output_dim
};

// Parameters are stored as 32-bit floats; all forward/backward arithmetic
// runs in double so analytic gradients survive finite-difference checks.
struct MlpModel {
  MlpArchitecture arch;
  std::vector<MlpLayer> layers;
  std::vector<std::string> feature_order;  // defaults to FeatureVector::names
  std::uint64_t seed = 0;
  std::string calibration_fingerprint;

  long parameter_count() const;  // enumerated over the stored arrays
  void validate() const;         // shapes match arch, all values finite
};

// Flat parameter order: for each weight layer, weights row-major then biases.
float get_parameter(const MlpModel& model, long flat_index);
void set_parameter(MlpModel& model, long flat_index, float value);

// Weights ~ N(0, sqrt(2 / fan_in)), biases zero.
MlpModel he_init(const MlpArchitecture& arch, std::mt19937_64& rng);

// ReLU hidden layers, linear output head with each component clamped to
// [0.001, 0.998] and the pair rescaled by 0.999/sum whenever the sum exceeds
// 0.999. Keeps (r, g, 1-r-g) strictly inside the chromaticity simplex.
// Throws NumericError on non-finite activations.
Chromaticity forward(const MlpModel& model, const FeatureVector& x);

// Angular loss in radians between the estimate (r, g, 1-r-g) and the label,
// acos(clamp(cos, -1+1e-7, 1-1e-7)), plus l1_lambda * ||theta||_1 over every
// weight and bias.
double loss(const MlpModel& model, const FeatureVector& x, const Illuminant& ell,
            double l1_lambda);

struct MlpGradient {
  std::vector<double> values;  // flat parameter order
};

// Exact analytic gradient of loss(), including the clamp/rescale head
// Jacobian and the subgradient sign(theta) of the L1 term (zero at zero).
MlpGradient backward(const MlpModel& model, const FeatureVector& x, const Illuminant& ell,
                     double l1_lambda);

// Fingerprint of every branch a forward pass takes: ReLU signs, output
// clamps, rescale, cosine clamp. Finite-difference checks skip parameters
// whose perturbation changes the pattern (the loss is non-smooth there).
std::uint64_t branch_signature(const MlpModel& model, const FeatureVector& x,
                               const Illuminant& ell);

struct AdamState {
  long step = 0;
  std::vector<double> m;
  std::vector<double> v;

  static AdamState for_parameter_count(long n);
};

// Adam with beta1 = 0.9, beta2 = 0.999, eps = 1e-8 and bias correction.
// Moments are kept in double; parameters update through double arithmetic
// and round back to float storage.
void adam_update(AdamState& state, std::span<float> params, std::span<const double> grad,
                 double lr);
void adam_step(AdamState& state, MlpModel& model, const MlpGradient& grad, double lr);

// lr_min + 0.5 * (lr_max - lr_min) * (1 + cos(pi * step / total_steps)).
double cosine_lr(long step, long total_steps, double lr_max, double lr_min = 0.0);

struct TrainingConfig {
  MlpArchitecture architecture{};
  int batch_size = 32;
  int epochs = 10000;
  double learning_rate = 7e-3;
  double lr_min = 0.0;
  double l1_lambda = 1e-5;
  int early_stopping_patience = 0;  // 0 = run every epoch, keep the best snapshot
  double validation_fraction = 0.1;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

namespace detail {

// Scratch buffers reused across samples in the training hot loop.
struct TrainWorkspace {
  std::vector<std::vector<double>> pre;  // pre-activations per weight layer
  std::vector<std::vector<double>> act;  // act[0] = input, act[l+1] = post layer l
  std::vector<std::vector<double>> delta;
};

// Adds the angular-term gradient (no L1) for one sample into grad_accum and
// returns the angular loss in radians.
double accumulate_angular_gradient(const MlpModel& model, const FeatureVector& x,
                                   const Illuminant& ell, std::span<double> grad_accum,
                                   TrainWorkspace& ws);

// forward() without the per-call model validation, for hot loops that
// validated the model once.
Chromaticity forward_unchecked(const MlpModel& model, const FeatureVector& x,
                               TrainWorkspace& ws);

}  // namespace detail

}  // namespace dmcc
