#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "stemc/model.hpp"
#include "stemc/quantizer.hpp"

namespace stemc {

// ---------------------------------------------------------------------------
// Float reference
// ---------------------------------------------------------------------------

struct FloatRecord {
  FloatTensor input;
  std::vector<FloatTensor> layers;  // post-activation output of every layer

  const FloatTensor& output() const { return layers.back(); }
};

FloatRecord float_forward(const FloatModel& model, const FloatTensor& x);

// ---------------------------------------------------------------------------
// Integer oracle
// ---------------------------------------------------------------------------

/// Ideal: one wide sum per neuron, requantized once by M-hat.
/// Emulated: the bit-serial schedule with per-step M0 scaling into a saturating
/// n-bit accumulator, then M1 at finalize. The spiking executor must agree
/// with Emulated exactly.
enum class IntMode { Ideal, Emulated };

struct LayerActivity {
  /// Ideal: sum of W*X plus any accumulator bias. Emulated: final accumulator.
  std::vector<std::int64_t> pre_activation;
  IntTensor output;
  std::size_t saturations = 0;
};

struct ActivationRecord {
  IntTensor input;
  std::vector<LayerActivity> layers;

  const IntTensor& output() const { return layers.back().output; }
  std::size_t saturation_count() const;
};

IntTensor quantize_input(const QuantizedNetwork& qnet, const FloatTensor& x);

/// `plan` overrides qnet.sparsity when given.
ActivationRecord int_forward(const QuantizedNetwork& qnet, const IntTensor& input, IntMode mode,
                             const SparsityPlan* plan = nullptr);

/// Recomputes layers [first_layer, end) of an existing record in place.
void int_forward_from(const QuantizedNetwork& qnet, ActivationRecord& record, std::size_t first_layer,
                      IntMode mode, const SparsityPlan* plan = nullptr);

/// Whether the tensor produced by `layer_id` (or the network input for
/// kNetworkInput) is carried by signed spike trains.
bool tensor_is_signed(const QuantizedNetwork& qnet, int layer_id);

struct InputSigns {
  std::array<bool, 2> flags{};
  std::size_t count = 0;
  std::span<const bool> span() const { return {flags.data(), count}; }
};

/// Signedness of each input group of `layer`.
InputSigns input_signs(const QuantizedNetwork& qnet, const QuantizedLayer& layer);

/// The tensors feeding `layer` inside `record`.
std::vector<const IntTensor*> layer_inputs(const QuantizedLayer& layer, const ActivationRecord& record);

/// Sum over all input groups of W*X for every output neuron.
std::vector<std::int64_t> weighted_sums(const QuantizedLayer& layer,
                                        std::span<const IntTensor* const> inputs);

/// Synaptic current I[step][neuron] for the MSB-first schedule: the weighted
/// sum of bit plane (k-1-step) of every input, times that plane's weight.
std::vector<std::vector<std::int64_t>> step_currents(const QuantizedLayer& layer,
                                                     std::span<const IntTensor* const> inputs,
                                                     std::span<const bool> input_signed, int k);

/// Bias routed through the accumulator (non-zero only for S_b = S_w*S_x).
std::int64_t accumulator_bias(const QuantizedLayer& layer, std::size_t neuron);
/// Bias added after M1 / M-hat (non-zero only for S_b = S_a).
std::int64_t output_bias(const QuantizedLayer& layer, std::size_t neuron);

/// Clamp bounds of a layer's output: [0, q_max] for ReLU, [-q_max, q_max] otherwise.
std::pair<std::int64_t, std::int64_t> output_bounds(const QuantizedLayer& layer, int k);

LayerActivity layer_forward(const QuantizedLayer& layer, std::span<const IntTensor* const> inputs,
                            std::span<const bool> input_signed, int k, int n, IntMode mode,
                            const SparsityEntry* sparsity);

/// Largest |partial accumulator sum| of one sample, in raw current units.
std::int64_t max_partial_sum(const QuantizedLayer& layer, std::span<const IntTensor* const> inputs,
                             std::span<const bool> input_signed, int k);

/// Layer-wise dump: layer,index,pre_activation,output.
void write_activation_csv(std::ostream& out, const QuantizedNetwork& qnet,
                          const ActivationRecord& record);

// ---------------------------------------------------------------------------
// Output decoding
// ---------------------------------------------------------------------------

/// Index of the largest element; ties go to the lowest index. Throws on empty.
std::size_t argmax_decode(std::span<const std::int32_t> outputs);
std::size_t argmax_decode(std::span<const double> outputs);

struct Box {
  int row = 0;
  int col = 0;
  double confidence = 0.0;
  double cx = 0.0;  // normalized to [0, 1] over the grid
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;
  std::size_t label = 0;
};

/// Decodes a [5 + classes, S, S] grid laid out as (conf, x, y, w, h, scores...)
/// per cell. One box per cell whose confidence exceeds `conf_threshold`.
std::vector<Box> yolo_decode(std::span<const double> outputs, const Shape& shape, double conf_threshold);

}  // namespace stemc
