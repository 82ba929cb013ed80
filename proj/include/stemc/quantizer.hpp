#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "stemc/fixedpoint.hpp"
#include "stemc/graph.hpp"
#include "stemc/model.hpp"
#include "stemc/sparsity.hpp"
#include "stemc/tensor.hpp"

namespace stemc {

/// Symmetric per-tensor quantization; the zero point is always 0 and the
/// integer range is [-(2^(bits-1) - 1), 2^(bits-1) - 1].
struct QuantParams {
  double scale = 1.0;
  int zero_point = 0;
  int q_min = -127;
  int q_max = 127;

  static QuantParams symmetric(double scale, int bits);
  bool operator==(const QuantParams&) const = default;
};

/// Scale floor used for all-zero ranges.
inline constexpr double kScaleFloor = 1.0 / (1 << 20);

/// S = max(|r_max|, |r_min|) / q_max with Z = 0. A degenerate (all-zero) range
/// falls back to kScaleFloor and logs a warning.
QuantParams derive_scale(double r_max, double r_min, int q_max, int q_min);

struct Quantized {
  std::vector<std::int32_t> values;
  std::size_t clamped = 0;
};

/// round-half-away(r / S), clamped to [q_min, q_max].
Quantized quantize_tensor(std::span<const float> values, const QuantParams& p);
std::int32_t quantize_value(double r, const QuantParams& p, bool* clamped = nullptr);
double dequantize(std::int64_t q, const QuantParams& p);

enum class BiasScheme {
  WeightInputScale,  // S_b = S_w * S_x, bias joins the accumulator
  ActivationScale,   // S_b = S_a, bias added after requantization
};

std::string_view to_string(BiasScheme scheme);
BiasScheme parse_bias_scheme(std::string_view text);

struct QuantConfig {
  int activation_bits = 8;  // K: spike train length
  int weight_bits = 8;
  int acc_bits = 16;   // n: width of the accumulator U
  int bias_bits = 16;  // storage width checked by bias calibration

  void validate() const;
  bool operator==(const QuantConfig&) const = default;
};

struct TensorRange {
  double r_min = 0.0;
  double r_max = 0.0;
  bool operator==(const TensorRange&) const = default;
};

struct CalibStats {
  std::size_t samples = 0;
  TensorRange input;
  std::vector<TensorRange> outputs;  // per layer, model order
  /// Per layer: largest |partial sum| of raw synaptic current (plus any bias
  /// preloaded into the accumulator) seen along the bit-serial schedule.
  /// Zero for layers that do not accumulate (flatten).
  std::vector<std::int64_t> i_max;
};

struct QuantizedLayer {
  LayerSpec spec;
  Tensor<std::int8_t> weights;     // empty for parameter-free kinds
  std::vector<std::int32_t> bias;  // per output feature/channel; empty means zero
  BiasScheme bias_scheme = BiasScheme::ActivationScale;
  QuantParams in;
  QuantParams w;
  QuantParams out;
  FixedMult m_hat;
  FixedMult m0;
  FixedMult m1;
  std::int64_t i_max = 0;

  bool accumulates() const { return spec.kind != LayerKind::Flatten; }
  /// Bias of output neuron `i` (row-major over out_shape).
  std::int64_t bias_at(std::size_t neuron) const;
  bool operator==(const QuantizedLayer&) const = default;
};

struct QuantizedNetwork {
  std::string name;
  Shape input_shape;
  QuantParams input;
  QuantConfig config;
  std::vector<QuantizedLayer> layers;  // topological order, output layer last
  SparsityPlan sparsity;

  int k() const { return config.activation_bits; }
  int n() const { return config.acc_bits; }
  int index_of(const std::string& layer) const;

  bool operator==(const QuantizedNetwork&) const = default;
};

/// Checks structural invariants (weight range, constant consistency, graph).
void validate(const QuantizedNetwork& qnet);

/// Real value of the accumulator pre-scale, (2^(n-1) - 1) / I_max.
double integration_scale(std::int64_t i_max, int acc_bits);

/// Pre-scale used when building networks: 1 when I_max already fits the
/// accumulator, otherwise the scale above tightened by the worst-case
/// rounding drift of `steps` per-step roundings plus one preload rounding.
double safe_integration_scale(std::int64_t i_max, int acc_bits, int steps);

/// Quantized bias values under scale `bias_scale`, unclamped.
std::vector<std::int64_t> quantize_bias(std::span<const float> bias, double bias_scale);

/// Keeps S_b = S_w*S_x unless some quantized bias exceeds the signed
/// `bias_width` range, in which case S_b = S_a is selected.
BiasScheme calibrate_bias(std::span<const float> bias, double weight_scale, double input_scale,
                          int bias_width);

/// Float statistics plus I_max per layer. I_max is measured on the exact
/// integer path the spiking executor follows, layer by layer.
CalibStats calibrate(const FloatModel& model, std::span<const FloatTensor> samples,
                     const QuantConfig& config, int jobs = 1);

QuantizedNetwork build_quantized_network(const FloatModel& model, const CalibStats& stats,
                                         const QuantConfig& config);

/// Human-readable calibration table: layer, r_max, I_max, scheme, M0, M1.
std::string calibration_report(const QuantizedNetwork& qnet, const CalibStats& stats);

}  // namespace stemc
