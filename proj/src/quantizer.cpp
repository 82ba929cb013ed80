#include "stemc/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

#include <spdlog/spdlog.h>

#include "kernels.hpp"
#include "stemc/error.hpp"
#include "stemc/parallel.hpp"
#include "stemc/refengine.hpp"

namespace stemc {

QuantParams QuantParams::symmetric(double scale, int bits) {
  const int q_max = (1 << (bits - 1)) - 1;
  return QuantParams{scale, 0, -q_max, q_max};
}

QuantParams derive_scale(double r_max, double r_min, int q_max, int q_min) {
  const double magnitude = std::max(std::abs(r_max), std::abs(r_min));
  QuantParams p{kScaleFloor, 0, q_min, q_max};
  if (!(magnitude > 0.0) || !std::isfinite(magnitude)) {
    spdlog::warn("degenerate tensor range [{}, {}]; using scale floor {}", r_min, r_max, kScaleFloor);
    return p;
  }
  p.scale = magnitude / q_max;
  return p;
}

std::int32_t quantize_value(double r, const QuantParams& p, bool* clamped) {
  const double q = std::round(r / p.scale) + p.zero_point;
  const double bounded = std::clamp(q, static_cast<double>(p.q_min), static_cast<double>(p.q_max));
  if (clamped) *clamped = bounded != q;
  return static_cast<std::int32_t>(bounded);
}

Quantized quantize_tensor(std::span<const float> values, const QuantParams& p) {
  Quantized out;
  out.values.reserve(values.size());
  for (float r : values) {
    bool clamped = false;
    out.values.push_back(quantize_value(r, p, &clamped));
    out.clamped += clamped ? 1 : 0;
  }
  return out;
}

double dequantize(std::int64_t q, const QuantParams& p) {
  return p.scale * static_cast<double>(q - p.zero_point);
}

std::string_view to_string(BiasScheme scheme) {
  return scheme == BiasScheme::WeightInputScale ? "sb=swsx" : "sb=sa";
}

BiasScheme parse_bias_scheme(std::string_view text) {
  if (text == "sb=swsx") return BiasScheme::WeightInputScale;
  if (text == "sb=sa") return BiasScheme::ActivationScale;
  throw Error(ErrorKind::Format, "unknown bias scheme '" + std::string(text) + "'");
}

void QuantConfig::validate() const {
  if (activation_bits < 2 || activation_bits > 16) throw Error(ErrorKind::Config, "K must lie in [2, 16]");
  if (acc_bits < activation_bits || acc_bits > 32) throw Error(ErrorKind::Config, "accumulator bits must lie in [K, 32]");
  if (weight_bits < 2 || weight_bits > 8) throw Error(ErrorKind::Config, "weight bits must lie in [2, 8]");
  if (bias_bits < 2 || bias_bits > 32) throw Error(ErrorKind::Config, "bias bits must lie in [2, 32]");
}

std::int64_t QuantizedLayer::bias_at(std::size_t neuron) const {
  if (bias.empty()) return 0;
  return bias[neuron / detail::bias_stride(spec)];
}

int QuantizedNetwork::index_of(const std::string& layer) const {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].spec.name == layer) return static_cast<int>(i);
  }
  return -1;
}

double integration_scale(std::int64_t i_max, int acc_bits) {
  const double limit = static_cast<double>((std::int64_t{1} << (acc_bits - 1)) - 1);
  return limit / static_cast<double>(std::max<std::int64_t>(i_max, 1));
}

double safe_integration_scale(std::int64_t i_max, int acc_bits, int steps) {
  const std::int64_t limit = (std::int64_t{1} << (acc_bits - 1)) - 1;
  if (i_max <= limit) return 1.0;
  // Each per-step rounding and the bias preload rounding may add up to 1/2.
  const double drift = steps / 2 + 1;
  return (static_cast<double>(limit) - drift) / static_cast<double>(i_max);
}

std::vector<std::int64_t> quantize_bias(std::span<const float> bias, double bias_scale) {
  std::vector<std::int64_t> out;
  out.reserve(bias.size());
  for (float b : bias) out.push_back(std::llround(static_cast<double>(b) / bias_scale));
  return out;
}

BiasScheme calibrate_bias(std::span<const float> bias, double weight_scale, double input_scale, int bias_width) {
  const std::int64_t limit = (std::int64_t{1} << (bias_width - 1)) - 1;
  for (auto q : quantize_bias(bias, weight_scale * input_scale)) {
    if (q > limit || q < -limit) return BiasScheme::ActivationScale;
  }
  return BiasScheme::WeightInputScale;
}

namespace {

// Tensors are numbered 0 for the network input and i + 1 for layer i.
class ScaleGroups {
 public:
  explicit ScaleGroups(std::size_t tensors) : parent_(tensors) { std::iota(parent_.begin(), parent_.end(), 0); }

  std::size_t find(std::size_t t) {
    while (parent_[t] != t) t = parent_[t] = parent_[parent_[t]];
    return t;
  }
  void join(std::size_t a, std::size_t b) { parent_[find(a)] = find(b); }

 private:
  std::vector<std::size_t> parent_;
};

std::size_t tensor_index(int layer_id) { return static_cast<std::size_t>(layer_id + 1); }

/// Every layer constant except the integration split (m0 = 1, m1 = m_hat).
QuantizedNetwork derive_network(const FloatModel& model, const TensorRange& input_range,
                                const std::vector<TensorRange>& output_ranges, const QuantConfig& config) {
  config.validate();
  if (output_ranges.size() != model.layers.size()) {
    throw Error(ErrorKind::Config, "calibration statistics do not cover every layer");
  }
  const std::size_t tensors = model.layers.size() + 1;
  ScaleGroups groups(tensors);
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const auto& spec = model.layers[i].spec;
    if (spec.kind == LayerKind::Flatten) groups.join(tensor_index(spec.input_ids[0]), i + 1);
    if (spec.kind == LayerKind::ResidualAdd) {
      groups.join(tensor_index(spec.input_ids[0]), tensor_index(spec.input_ids[1]));
    }
  }
  std::vector<double> magnitude(tensors, 0.0);
  auto range_of = [&](std::size_t t) { return t == 0 ? input_range : output_ranges[t - 1]; };
  for (std::size_t t = 0; t < tensors; ++t) {
    const auto r = range_of(t);
    auto& m = magnitude[groups.find(t)];
    m = std::max({m, std::abs(r.r_max), std::abs(r.r_min)});
  }
  const int q_max = (1 << (config.activation_bits - 1)) - 1;
  auto params_of = [&](int layer_id) {
    return derive_scale(magnitude[groups.find(tensor_index(layer_id))], 0.0, q_max, -q_max);
  };

  QuantizedNetwork qnet;
  qnet.name = model.name;
  qnet.input_shape = model.input_shape;
  qnet.config = config;
  qnet.input = params_of(kNetworkInput);

  const int w_max = (1 << (config.weight_bits - 1)) - 1;
  const std::int64_t bias_limit = (std::int64_t{1} << (config.bias_bits - 1)) - 1;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const auto& src = model.layers[i];
    QuantizedLayer layer;
    layer.spec = src.spec;
    layer.in = params_of(src.spec.input_ids[0]);
    layer.out = params_of(static_cast<int>(i));
    layer.w = QuantParams::symmetric(1.0, config.weight_bits);
    layer.m_hat = FixedMult::identity();

    switch (src.spec.kind) {
      case LayerKind::FullyConnected:
      case LayerKind::Conv2d: {
        float w_abs = 0.0F;
        for (float w : src.weights.data) w_abs = std::max(w_abs, std::abs(w));
        layer.w = derive_scale(w_abs, 0.0, w_max, -w_max);
        const auto qw = quantize_tensor(src.weights.data, layer.w);
        layer.weights = Tensor<std::int8_t>(src.weights.shape);
        std::transform(qw.values.begin(), qw.values.end(), layer.weights.data.begin(),
                       [](std::int32_t v) { return static_cast<std::int8_t>(v); });

        layer.bias_scheme = calibrate_bias(src.bias, layer.w.scale, layer.in.scale, config.bias_bits);
        const double bias_scale = layer.bias_scheme == BiasScheme::WeightInputScale
                                      ? layer.w.scale * layer.in.scale
                                      : layer.out.scale;
        std::size_t clamped = 0;
        for (auto q : quantize_bias(src.bias, bias_scale)) {
          const auto fit = std::clamp(q, -bias_limit, bias_limit);
          clamped += fit != q ? 1 : 0;
          layer.bias.push_back(static_cast<std::int32_t>(fit));
        }
        if (clamped > 0) {
          spdlog::warn("layer '{}': {} bias value(s) clamped to {} bits", src.spec.name, clamped, config.bias_bits);
        }
        layer.m_hat = FixedMult::from_real(layer.w.scale * layer.in.scale / layer.out.scale);
        break;
      }
      case LayerKind::AvgPool2d: {
        const double area = static_cast<double>(src.spec.kernel) * src.spec.kernel;
        layer.m_hat = FixedMult::from_real(layer.in.scale / (layer.out.scale * area));
        break;
      }
      case LayerKind::ResidualAdd:
        layer.m_hat = FixedMult::from_real(layer.in.scale / layer.out.scale);
        break;
      case LayerKind::Flatten:
        break;
    }
    layer.m0 = FixedMult::identity();
    layer.m1 = layer.m_hat;
    qnet.layers.push_back(std::move(layer));
  }
  return qnet;
}

void set_integration(QuantizedLayer& layer, std::int64_t i_max, const QuantConfig& config) {
  if (!layer.accumulates()) return;
  layer.i_max = std::max<std::int64_t>(i_max, 1);
  layer.m0 = FixedMult::from_real(safe_integration_scale(layer.i_max, config.acc_bits, config.activation_bits));
  layer.m1 = FixedMult::from_real(layer.m_hat.value() / layer.m0.value());
}

void widen(TensorRange& range, std::span<const float> values) {
  for (float v : values) {
    range.r_min = std::min(range.r_min, static_cast<double>(v));
    range.r_max = std::max(range.r_max, static_cast<double>(v));
  }
}

}  // namespace

CalibStats calibrate(const FloatModel& model, std::span<const FloatTensor> samples, const QuantConfig& config,
                     int jobs) {
  if (samples.empty()) throw Error(ErrorKind::Config, "calibration set is empty");
  config.validate();

  std::vector<FloatRecord> records(samples.size());
  parallel_for(samples.size(), jobs, [&](std::size_t s) { records[s] = float_forward(model, samples[s]); });

  CalibStats stats;
  stats.samples = samples.size();
  stats.outputs.assign(model.layers.size(), TensorRange{});
  for (const auto& rec : records) {
    widen(stats.input, rec.input.data);
    for (std::size_t l = 0; l < model.layers.size(); ++l) widen(stats.outputs[l], rec.layers[l].data);
  }

  QuantizedNetwork qnet = derive_network(model, stats.input, stats.outputs, config);
  std::vector<ActivationRecord> acts(samples.size());
  for (std::size_t s = 0; s < samples.size(); ++s) {
    acts[s].input = quantize_input(qnet, samples[s]);
    acts[s].layers.resize(qnet.layers.size());
  }

  // Layer by layer: measure I_max on the integer inputs the executor will see,
  // fix M0/M1, then produce this layer's outputs for the next one.
  stats.i_max.assign(qnet.layers.size(), 0);
  std::vector<std::int64_t> per_sample(samples.size());
  for (std::size_t l = 0; l < qnet.layers.size(); ++l) {
    auto& layer = qnet.layers[l];
    const auto signs = input_signs(qnet, layer);
    if (layer.accumulates()) {
      parallel_for(samples.size(), jobs, [&](std::size_t s) {
        per_sample[s] = max_partial_sum(layer, layer_inputs(layer, acts[s]), signs.span(), qnet.k());
      });
      stats.i_max[l] = std::max<std::int64_t>(1, *std::max_element(per_sample.begin(), per_sample.end()));
      set_integration(layer, stats.i_max[l], config);
    }
    parallel_for(samples.size(), jobs, [&](std::size_t s) {
      acts[s].layers[l] = layer_forward(layer, layer_inputs(layer, acts[s]), signs.span(), qnet.k(), qnet.n(),
                                        IntMode::Emulated, nullptr);
    });
  }
  return stats;
}

QuantizedNetwork build_quantized_network(const FloatModel& model, const CalibStats& stats,
                                         const QuantConfig& config) {
  if (stats.i_max.size() != model.layers.size()) {
    throw Error(ErrorKind::Config, "calibration statistics are missing I_max for some layers");
  }
  QuantizedNetwork qnet = derive_network(model, stats.input, stats.outputs, config);
  for (std::size_t l = 0; l < qnet.layers.size(); ++l) set_integration(qnet.layers[l], stats.i_max[l], config);
  qnet.sparsity = identity_plan(qnet);
  validate(qnet);
  return qnet;
}

void validate(const QuantizedNetwork& qnet) {
  qnet.config.validate();
  std::vector<LayerSpec> specs;
  for (const auto& l : qnet.layers) specs.push_back(l.spec);
  const auto order = resolve_graph(qnet.input_shape, specs);
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (order[i] != i || specs[i].input_ids != qnet.layers[i].spec.input_ids) {
      throw Error(ErrorKind::Graph, "quantized layers are not in topological order");
    }
  }

  const int w_max = (1 << (qnet.config.weight_bits - 1)) - 1;
  const std::int64_t bias_limit = (std::int64_t{1} << (qnet.config.bias_bits - 1)) - 1;
  for (const auto& layer : qnet.layers) {
    const auto& name = layer.spec.name;
    const bool shape_ok = has_parameters(layer.spec.kind)
                              ? layer.weights.shape == expected_weight_shape(layer.spec) &&
                                    layer.weights.data.size() == element_count(layer.weights.shape)
                              : layer.weights.data.empty();
    if (!shape_ok) {
      throw Error(ErrorKind::Shape, "layer '" + name + "': quantized weight shape mismatch");
    }
    for (auto w : layer.weights.data) {
      if (w > w_max || w < -w_max) throw Error(ErrorKind::Range, "layer '" + name + "': weight outside range");
    }
    if (!layer.bias.empty() && layer.bias.size() != expected_bias_length(layer.spec)) {
      throw Error(ErrorKind::Shape, "layer '" + name + "': bias length mismatch");
    }
    for (auto b : layer.bias) {
      if (b > bias_limit || b < -bias_limit) throw Error(ErrorKind::Range, "layer '" + name + "': bias exceeds bias bits");
    }
    if (layer.accumulates()) {
      const double product = layer.m0.value() * layer.m1.value();
      if (std::abs(product - layer.m_hat.value()) > std::ldexp(layer.m_hat.value(), -29)) {
        throw Error(ErrorKind::Range, "layer '" + name + "': M0*M1 does not reproduce M-hat");
      }
    }
    if (layer.spec.kind == LayerKind::ResidualAdd) {
      auto scale_of = [&](int id) {
        return id == kNetworkInput ? qnet.input.scale : qnet.layers[static_cast<std::size_t>(id)].out.scale;
      };
      if (scale_of(layer.spec.input_ids[0]) != scale_of(layer.spec.input_ids[1])) {
        throw Error(ErrorKind::Config, "layer '" + name + "': residual branches have different scales");
      }
    }
  }
  validate_plan(qnet.sparsity, qnet);
}

std::string calibration_report(const QuantizedNetwork& qnet, const CalibStats& stats) {
  std::ostringstream out;
  out << std::left << std::setw(16) << "layer" << std::right << std::setw(12) << "r_max" << std::setw(12)
      << "I_max" << std::setw(10) << "scheme" << std::setw(14) << "M0" << std::setw(14) << "M1" << '\n';
  for (std::size_t l = 0; l < qnet.layers.size(); ++l) {
    const auto& layer = qnet.layers[l];
    out << std::left << std::setw(16) << layer.spec.name << std::right << std::setw(12) << std::setprecision(5)
        << stats.outputs[l].r_max << std::setw(12) << layer.i_max << std::setw(10)
        << (has_parameters(layer.spec.kind) ? to_string(layer.bias_scheme) : "-") << std::setw(14)
        << std::setprecision(6) << layer.m0.value() << std::setw(14) << layer.m1.value() << '\n';
  }
  return out.str();
}

}  // namespace stemc
