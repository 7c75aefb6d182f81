#include "dmcc/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace dmcc {

namespace {

constexpr double kOutputLo = 0.001;
constexpr double kOutputHi = 0.998;
constexpr double kOutputSumCap = 0.999;
constexpr double kCosineClamp = 1e-7;
constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

struct HeadResult {
  double raw0 = 0.0, raw1 = 0.0;   // linear outputs
  double c0 = 0.0, c1 = 0.0;       // after per-component clamp
  double r = 0.0, g = 0.0;         // after the sum rescale
  bool pass0 = false, pass1 = false;  // clamp lets the gradient through
  bool rescaled = false;
};

HeadResult apply_head(double o0, double o1) {
  HeadResult h;
  h.raw0 = o0;
  h.raw1 = o1;
  h.c0 = std::clamp(o0, kOutputLo, kOutputHi);
  h.c1 = std::clamp(o1, kOutputLo, kOutputHi);
  h.pass0 = o0 > kOutputLo && o0 < kOutputHi;
  h.pass1 = o1 > kOutputLo && o1 < kOutputHi;
  const double s = h.c0 + h.c1;
  if (s > kOutputSumCap) {
    h.rescaled = true;
    h.r = kOutputSumCap * h.c0 / s;
    h.g = kOutputSumCap * h.c1 / s;
  } else {
    h.r = h.c0;
    h.g = h.c1;
  }
  return h;
}

// Dense forward pass in double precision; fills ws.pre/ws.act.
void run_layers(const MlpModel& model, const FeatureVector& x, detail::TrainWorkspace& ws) {
  const int layer_count = model.arch.weight_layer_count();
  ws.pre.resize(static_cast<std::size_t>(layer_count));
  ws.act.resize(static_cast<std::size_t>(layer_count) + 1);

  ws.act[0].assign(x.values.begin(), x.values.begin() + model.arch.input_dim);
  for (int l = 0; l < layer_count; ++l) {
    const int in = model.arch.layer_input_dim(l);
    const int out = model.arch.layer_output_dim(l);
    const MlpLayer& layer = model.layers[static_cast<std::size_t>(l)];
    const std::vector<double>& a = ws.act[static_cast<std::size_t>(l)];
    std::vector<double>& pre = ws.pre[static_cast<std::size_t>(l)];
    pre.resize(static_cast<std::size_t>(out));
    for (int o = 0; o < out; ++o) {
      const float* w = layer.weights.data() + static_cast<std::size_t>(o) * in;
      double acc = static_cast<double>(layer.biases[static_cast<std::size_t>(o)]);
      for (int i = 0; i < in; ++i) acc += static_cast<double>(w[i]) * a[static_cast<std::size_t>(i)];
      if (!std::isfinite(acc)) throw NumericError("mlp: non-finite activation");
      pre[static_cast<std::size_t>(o)] = acc;
    }
    std::vector<double>& next = ws.act[static_cast<std::size_t>(l) + 1];
    next.resize(static_cast<std::size_t>(out));
    const bool last = l == layer_count - 1;
    for (int o = 0; o < out; ++o) {
      const double v = pre[static_cast<std::size_t>(o)];
      next[static_cast<std::size_t>(o)] = last ? v : std::max(v, 0.0);
    }
  }
}

struct AngularTerms {
  HeadResult head;
  Vec3 estimate;   // (r, g, 1 - r - g)
  double u_raw = 0.0;
  double u = 0.0;  // clamped cosine
  double loss_rad = 0.0;
};

AngularTerms angular_terms(const MlpModel& model, const FeatureVector& x, const Illuminant& ell,
                           detail::TrainWorkspace& ws) {
  run_layers(model, x, ws);
  const std::vector<double>& out = ws.act.back();
  AngularTerms t;
  t.head = apply_head(out[0], out[1]);
  t.estimate = {t.head.r, t.head.g, 1.0 - t.head.r - t.head.g};
  const Vec3& label = ell.rgb();
  t.u_raw = t.estimate.dot(label) / (t.estimate.norm() * label.norm());
  t.u = std::clamp(t.u_raw, -1.0 + kCosineClamp, 1.0 - kCosineClamp);
  t.loss_rad = std::acos(t.u);
  return t;
}

void validate_input(const MlpModel& model, const FeatureVector& x) {
  if (model.arch.input_dim > static_cast<int>(x.values.size()))
    throw DataError("mlp: architecture input dim exceeds the feature vector");
  for (int i = 0; i < model.arch.input_dim; ++i) {
    if (!std::isfinite(x.values[static_cast<std::size_t>(i)]))
      throw DataError("mlp: non-finite feature value");
  }
}

}  // namespace

int MlpArchitecture::layer_input_dim(int layer) const {
  return layer == 0 ? input_dim : hidden_width;
}

int MlpArchitecture::layer_output_dim(int layer) const {
  return layer == weight_layer_count() - 1 ? output_dim : hidden_width;
}

long MlpArchitecture::parameter_count() const {
  long total = 0;
  for (int l = 0; l < weight_layer_count(); ++l) {
    total += static_cast<long>(layer_input_dim(l)) * layer_output_dim(l) + layer_output_dim(l);
  }
  return total;
}

void MlpArchitecture::validate() const {
  if (input_dim < 1 || hidden_width < 1 || hidden_layers < 1)
    throw DataError("mlp: architecture dimensions must be >= 1");
  if (output_dim != 2)
    throw DataError("mlp: the output head expects exactly 2 chromaticity outputs");
}

long MlpModel::parameter_count() const {
  long total = 0;
  for (const MlpLayer& l : layers)
    total += static_cast<long>(l.weights.size()) + static_cast<long>(l.biases.size());
  return total;
}

void MlpModel::validate() const {
  arch.validate();
  if (layers.size() != static_cast<std::size_t>(arch.weight_layer_count()))
    throw DataError("mlp: layer count does not match the architecture");
  for (int l = 0; l < arch.weight_layer_count(); ++l) {
    const MlpLayer& layer = layers[static_cast<std::size_t>(l)];
    const std::size_t want_w =
        static_cast<std::size_t>(arch.layer_input_dim(l)) * arch.layer_output_dim(l);
    const std::size_t want_b = static_cast<std::size_t>(arch.layer_output_dim(l));
    if (layer.weights.size() != want_w || layer.biases.size() != want_b) {
      std::ostringstream msg;
      msg << "mlp: layer " << l << " shape mismatch";
      throw DataError(msg.str());
    }
    for (float v : layer.weights)
      if (!std::isfinite(v)) throw DataError("mlp: non-finite weight");
    for (float v : layer.biases)
      if (!std::isfinite(v)) throw DataError("mlp: non-finite bias");
  }
  if (feature_order.size() != static_cast<std::size_t>(arch.input_dim))
    throw DataError("mlp: feature order length does not match the input dim");
  if (arch.input_dim == static_cast<int>(FeatureVector::names.size())) {
    for (std::size_t i = 0; i < feature_order.size(); ++i) {
      if (feature_order[i] != FeatureVector::names[i])
        throw DataError("mlp: feature order mismatch: expected '" +
                        std::string(FeatureVector::names[i]) + "', found '" +
                        feature_order[i] + "'");
    }
  }
}

float get_parameter(const MlpModel& model, long flat_index) {
  if (flat_index < 0) throw DataError("mlp: parameter index out of range");
  long idx = flat_index;
  for (const MlpLayer& l : model.layers) {
    if (idx < static_cast<long>(l.weights.size()))
      return l.weights[static_cast<std::size_t>(idx)];
    idx -= static_cast<long>(l.weights.size());
    if (idx < static_cast<long>(l.biases.size()))
      return l.biases[static_cast<std::size_t>(idx)];
    idx -= static_cast<long>(l.biases.size());
  }
  throw DataError("mlp: parameter index out of range");
}

void set_parameter(MlpModel& model, long flat_index, float value) {
  if (flat_index < 0) throw DataError("mlp: parameter index out of range");
  long idx = flat_index;
  for (MlpLayer& l : model.layers) {
    if (idx < static_cast<long>(l.weights.size())) {
      l.weights[static_cast<std::size_t>(idx)] = value;
      return;
    }
    idx -= static_cast<long>(l.weights.size());
    if (idx < static_cast<long>(l.biases.size())) {
      l.biases[static_cast<std::size_t>(idx)] = value;
      return;
    }
    idx -= static_cast<long>(l.biases.size());
  }
  throw DataError("mlp: parameter index out of range");
}

MlpModel he_init(const MlpArchitecture& arch, std::mt19937_64& rng) {
  arch.validate();
  MlpModel model;
  model.arch = arch;
  model.layers.resize(static_cast<std::size_t>(arch.weight_layer_count()));
  for (int l = 0; l < arch.weight_layer_count(); ++l) {
    const int in = arch.layer_input_dim(l);
    const int out = arch.layer_output_dim(l);
    MlpLayer& layer = model.layers[static_cast<std::size_t>(l)];
    layer.weights.resize(static_cast<std::size_t>(in) * out);
    layer.biases.assign(static_cast<std::size_t>(out), 0.0f);
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / in));
    for (float& w : layer.weights) w = static_cast<float>(dist(rng));
  }
  if (arch.input_dim == static_cast<int>(FeatureVector::names.size())) {
    for (auto name : FeatureVector::names) model.feature_order.emplace_back(name);
  } else {
    for (int i = 0; i < arch.input_dim; ++i)
      model.feature_order.push_back("x" + std::to_string(i));
  }
  return model;
}

Chromaticity forward(const MlpModel& model, const FeatureVector& x) {
  model.validate();
  validate_input(model, x);
  detail::TrainWorkspace ws;
  run_layers(model, x, ws);
  const HeadResult h = apply_head(ws.act.back()[0], ws.act.back()[1]);
  return {h.r, h.g};
}

double loss(const MlpModel& model, const FeatureVector& x, const Illuminant& ell,
            double l1_lambda) {
  model.validate();
  validate_input(model, x);
  detail::TrainWorkspace ws;
  const AngularTerms t = angular_terms(model, x, ell, ws);
  double l1 = 0.0;
  for (const MlpLayer& l : model.layers) {
    for (float w : l.weights) l1 += std::abs(static_cast<double>(w));
    for (float b : l.biases) l1 += std::abs(static_cast<double>(b));
  }
  return t.loss_rad + l1_lambda * l1;
}

namespace detail {

double accumulate_angular_gradient(const MlpModel& model, const FeatureVector& x,
                                   const Illuminant& ell, std::span<double> grad_accum,
                                   TrainWorkspace& ws) {
  const AngularTerms t = angular_terms(model, x, ell, ws);

  // d acos(u) / d estimate, with the clamped cosine used throughout.
  const double dacos = -1.0 / std::sqrt(1.0 - t.u * t.u);
  const Vec3& label = ell.rgb();
  const double ne = t.estimate.norm();
  const double nl = label.norm();
  const Vec3 du_dest = label / (ne * nl) - t.estimate * (t.u / (ne * ne));
  const Vec3 dl_dest = du_dest * dacos;

  // estimate = (r, g, 1 - r - g).
  double dl_dr = dl_dest.r - dl_dest.b;
  double dl_dg = dl_dest.g - dl_dest.b;

  double dl_dc0, dl_dc1;
  if (t.head.rescaled) {
    const double s = t.head.c0 + t.head.c1;
    const double s2 = s * s;
    dl_dc0 = dl_dr * (kOutputSumCap * t.head.c1 / s2) + dl_dg * (-kOutputSumCap * t.head.c1 / s2);
    dl_dc1 = dl_dr * (-kOutputSumCap * t.head.c0 / s2) + dl_dg * (kOutputSumCap * t.head.c0 / s2);
  } else {
    dl_dc0 = dl_dr;
    dl_dc1 = dl_dg;
  }

  const int layer_count = model.arch.weight_layer_count();
  ws.delta.resize(static_cast<std::size_t>(layer_count));
  std::vector<double>& delta_out = ws.delta[static_cast<std::size_t>(layer_count) - 1];
  delta_out.assign(2, 0.0);
  delta_out[0] = t.head.pass0 ? dl_dc0 : 0.0;
  delta_out[1] = t.head.pass1 ? dl_dc1 : 0.0;

  // Offsets of each layer's block in the flat parameter order.
  long offset = 0;
  std::vector<long> layer_offset(static_cast<std::size_t>(layer_count));
  for (int l = 0; l < layer_count; ++l) {
    layer_offset[static_cast<std::size_t>(l)] = offset;
    offset += static_cast<long>(model.arch.layer_input_dim(l)) * model.arch.layer_output_dim(l) +
              model.arch.layer_output_dim(l);
  }

  for (int l = layer_count - 1; l >= 0; --l) {
    const int in = model.arch.layer_input_dim(l);
    const int out = model.arch.layer_output_dim(l);
    const MlpLayer& layer = model.layers[static_cast<std::size_t>(l)];
    const std::vector<double>& a = ws.act[static_cast<std::size_t>(l)];
    const std::vector<double>& delta = ws.delta[static_cast<std::size_t>(l)];
    double* gw = grad_accum.data() + layer_offset[static_cast<std::size_t>(l)];
    double* gb = gw + static_cast<long>(in) * out;
    for (int o = 0; o < out; ++o) {
      const double d = delta[static_cast<std::size_t>(o)];
      double* row = gw + static_cast<std::size_t>(o) * in;
      for (int i = 0; i < in; ++i) row[i] += d * a[static_cast<std::size_t>(i)];
      gb[o] += d;
    }
    if (l > 0) {
      std::vector<double>& prev = ws.delta[static_cast<std::size_t>(l) - 1];
      prev.assign(static_cast<std::size_t>(in), 0.0);
      for (int o = 0; o < out; ++o) {
        const double d = delta[static_cast<std::size_t>(o)];
        if (d == 0.0) continue;
        const float* row = layer.weights.data() + static_cast<std::size_t>(o) * in;
        for (int i = 0; i < in; ++i) prev[static_cast<std::size_t>(i)] += d * static_cast<double>(row[i]);
      }
      const std::vector<double>& pre_prev = ws.pre[static_cast<std::size_t>(l) - 1];
      for (int i = 0; i < in; ++i) {
        if (!(pre_prev[static_cast<std::size_t>(i)] > 0.0)) prev[static_cast<std::size_t>(i)] = 0.0;
      }
    }
  }
  return t.loss_rad;
}

Chromaticity forward_unchecked(const MlpModel& model, const FeatureVector& x,
                               TrainWorkspace& ws) {
  run_layers(model, x, ws);
  const HeadResult h = apply_head(ws.act.back()[0], ws.act.back()[1]);
  return {h.r, h.g};
}

}  // namespace detail

MlpGradient backward(const MlpModel& model, const FeatureVector& x, const Illuminant& ell,
                     double l1_lambda) {
  model.validate();
  validate_input(model, x);
  MlpGradient grad;
  grad.values.assign(static_cast<std::size_t>(model.parameter_count()), 0.0);
  detail::TrainWorkspace ws;
  detail::accumulate_angular_gradient(model, x, ell, grad.values, ws);

  // L1 subgradient: sign(theta), zero at zero.
  long idx = 0;
  for (const MlpLayer& l : model.layers) {
    for (float w : l.weights) {
      const double s = w > 0.0f ? 1.0 : (w < 0.0f ? -1.0 : 0.0);
      grad.values[static_cast<std::size_t>(idx++)] += l1_lambda * s;
    }
    for (float b : l.biases) {
      const double s = b > 0.0f ? 1.0 : (b < 0.0f ? -1.0 : 0.0);
      grad.values[static_cast<std::size_t>(idx++)] += l1_lambda * s;
    }
  }
  return grad;
}

std::uint64_t branch_signature(const MlpModel& model, const FeatureVector& x,
                               const Illuminant& ell) {
  detail::TrainWorkspace ws;
  const AngularTerms t = angular_terms(model, x, ell, ws);

  std::uint64_t h = 1469598103934665603ull;
  auto mix_bit = [&h](bool bit) {
    h ^= bit ? 0x9Eu : 0x61u;
    h *= 1099511628211ull;
  };
  const int layer_count = model.arch.weight_layer_count();
  for (int l = 0; l + 1 < layer_count; ++l) {
    for (double v : ws.pre[static_cast<std::size_t>(l)]) mix_bit(v > 0.0);
  }
  mix_bit(t.head.pass0);
  mix_bit(t.head.pass1);
  mix_bit(t.head.rescaled);
  mix_bit(t.u_raw <= -1.0 + kCosineClamp);
  mix_bit(t.u_raw >= 1.0 - kCosineClamp);
  return h;
}

AdamState AdamState::for_parameter_count(long n) {
  AdamState s;
  s.m.assign(static_cast<std::size_t>(n), 0.0);
  s.v.assign(static_cast<std::size_t>(n), 0.0);
  return s;
}

void adam_update(AdamState& state, std::span<float> params, std::span<const double> grad,
                 double lr) {
  if (params.size() != grad.size() || params.size() != state.m.size())
    throw DataError("adam: parameter, gradient and state sizes disagree");
  if (!std::isfinite(lr) || lr < 0.0) throw DataError("adam: invalid learning rate");

  state.step += 1;
  const double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grad[i];
    state.m[i] = kAdamBeta1 * state.m[i] + (1.0 - kAdamBeta1) * g;
    state.v[i] = kAdamBeta2 * state.v[i] + (1.0 - kAdamBeta2) * g * g;
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    const double updated =
        static_cast<double>(params[i]) - lr * m_hat / (std::sqrt(v_hat) + kAdamEps);
    params[i] = static_cast<float>(updated);
  }
}

void adam_step(AdamState& state, MlpModel& model, const MlpGradient& grad, double lr) {
  if (static_cast<long>(grad.values.size()) != model.parameter_count())
    throw DataError("adam: gradient size does not match the model");
  if (state.m.size() != static_cast<std::size_t>(model.parameter_count()))
    throw DataError("adam: state size does not match the model");
  if (!std::isfinite(lr) || lr < 0.0) throw DataError("adam: invalid learning rate");

  state.step += 1;
  const double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(state.step));
  std::size_t offset = 0;
  auto apply = [&](std::vector<float>& block) {
    for (std::size_t i = 0; i < block.size(); ++i) {
      const double g = grad.values[offset + i];
      double& m = state.m[offset + i];
      double& v = state.v[offset + i];
      m = kAdamBeta1 * m + (1.0 - kAdamBeta1) * g;
      v = kAdamBeta2 * v + (1.0 - kAdamBeta2) * g * g;
      const double m_hat = m / bc1;
      const double v_hat = v / bc2;
      block[i] = static_cast<float>(static_cast<double>(block[i]) -
                                    lr * m_hat / (std::sqrt(v_hat) + kAdamEps));
    }
    offset += block.size();
  };
  for (MlpLayer& l : model.layers) {
    apply(l.weights);
    apply(l.biases);
  }
}

double cosine_lr(long step, long total_steps, double lr_max, double lr_min) {
  if (total_steps < 1) throw DataError("cosine_lr: total_steps must be >= 1");
  if (step < 0 || step > total_steps) throw DataError("cosine_lr: step out of range");
  if (!(lr_max >= lr_min) || lr_min < 0.0)
    throw DataError("cosine_lr: lr_max >= lr_min >= 0 required");
  const double phase = std::numbers::pi * static_cast<double>(step) / static_cast<double>(total_steps);
  return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(phase));
}

void TrainingConfig::validate() const {
  architecture.validate();
  if (batch_size < 1) throw DataError("training: batch_size must be >= 1");
  if (epochs < 1) throw DataError("training: epochs must be >= 1");
  if (!std::isfinite(learning_rate) || learning_rate <= 0.0)
    throw DataError("training: learning_rate must be > 0");
  if (!std::isfinite(lr_min) || lr_min < 0.0 || lr_min > learning_rate)
    throw DataError("training: lr_min must be in [0, learning_rate]");
  if (!std::isfinite(l1_lambda) || l1_lambda < 0.0)
    throw DataError("training: l1_lambda must be >= 0");
  if (early_stopping_patience < 0) throw DataError("training: patience must be >= 0");
  if (validation_fraction < 0.0 || !(validation_fraction < 1.0))
    throw DataError("training: validation_fraction must be in [0, 1)");
}

}  // namespace dmcc
