#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "stemc/fixedpoint.hpp"
#include "stemc/tensor.hpp"

namespace stemc {

/// Significance of each time step of a K-step train. Trains are sent MSB
/// first: step t carries bit position K-1-t. For signed trains step 0 is the
/// two's-complement sign bit with weight -2^(K-1).
struct PhiSchedule {
  int k = 8;
  bool is_signed = false;

  int bit_position(int step) const { return k - 1 - step; }
  std::int64_t weight(int step) const {
    const std::int64_t w = std::int64_t{1} << bit_position(step);
    return (is_signed && step == 0) ? -w : w;
  }
};

/// Binary spikes for a population over K steps, stored step-major so a whole
/// step can be handed to the next layer as one row.
class SpikeTrain {
 public:
  SpikeTrain() = default;
  SpikeTrain(int k, std::size_t neurons) : k_(k), neurons_(neurons), bits_(static_cast<std::size_t>(k) * neurons, 0) {}

  int steps() const { return k_; }
  std::size_t neurons() const { return neurons_; }

  std::span<std::uint8_t> row(int step) { return {bits_.data() + offset(step), neurons_}; }
  std::span<const std::uint8_t> row(int step) const { return {bits_.data() + offset(step), neurons_}; }
  bool bit(std::size_t neuron, int step) const { return bits_[offset(step) + neuron] != 0; }
  void set(std::size_t neuron, int step, bool on) { bits_[offset(step) + neuron] = on ? 1 : 0; }

  std::size_t spike_count() const;
  std::size_t spike_count(int step) const;

  /// Two's-complement encoding of every value, MSB first.
  static SpikeTrain encode(std::span<const std::int32_t> values, int k, bool is_signed);
  std::vector<std::int64_t> decode(const PhiSchedule& schedule) const;

  bool operator==(const SpikeTrain&) const = default;

 private:
  std::size_t offset(int step) const { return static_cast<std::size_t>(step) * neurons_; }

  int k_ = 0;
  std::size_t neurons_ = 0;
  std::vector<std::uint8_t> bits_;
};

/// K spike bits for one value in step order. Throws Error(Range) when `q`
/// is outside [-2^(K-1), 2^(K-1)-1] (signed) or [0, 2^(K-1)-1] (unsigned).
std::vector<std::uint8_t> encode_integer(std::int64_t q, int k, bool is_signed);

/// Sum over steps of weight(step) * bit(step).
std::int64_t decode_train(std::span<const std::uint8_t> bits, const PhiSchedule& schedule);

enum class StemPhase { Accumulating, Generating };

/// Local state of a population of STEM neurons.
struct StemState {
  std::vector<std::int64_t> u;  // saturating acc_bits accumulator
  std::vector<std::int64_t> v;  // generation potential
  StemPhase phase = StemPhase::Accumulating;
  std::size_t saturation_count = 0;
  int acc_bits = 16;

  StemState() = default;
  StemState(std::size_t neurons, int acc_bits);

  std::size_t size() const { return u.size(); }

  /// U <- saturate(M0 * preload) (zero when `preload` is empty); phase back to
  /// accumulating.
  void reset(std::span<const std::int64_t> preload, FixedMult m0);
};

/// U_i <- saturate(U_i + M0 * current_i), counting clamps. `current` is the
/// already-weighted synaptic current of this step.
void accumulate_step(StemState& state, std::span<const std::int64_t> current, FixedMult m0);

/// Dense column-gather form: current_i = Phi(step) * sum of weights[i][j] over
/// inputs j spiking at `step`. `weights` is [neurons, inputs].
void accumulate_step(StemState& state, std::span<const std::uint8_t> spikes, const Tensor<std::int8_t>& weights,
                     int step, FixedMult m0, const PhiSchedule& schedule);

/// V_i = M1 * U_i + bias_i, clamped to [0, 2^(K-1)-1] (unsigned) or
/// [-(2^(K-1)-1), 2^(K-1)-1] (signed). `clamp` = false leaves V untouched,
/// which only exists to observe raw generation behaviour.
void finalize(StemState& state, FixedMult m1, std::span<const std::int64_t> bias, int k, bool signed_output,
              bool clamp = true);

/// Emits one step: spike iff V crosses the step threshold, then V is reduced
/// by the threshold. Spikes at bit positions below `drlo_bits` are suppressed
/// after the update.
void generate_step(StemState& state, int step, const PhiSchedule& schedule, std::span<std::uint8_t> spikes,
                   int drlo_bits = 0);

/// One line per step, "<step>: <ranges>" where ranges are comma-separated
/// active neuron indices with consecutive runs collapsed to "a-b"; "-" when
/// the step is silent.
std::string format_spike_dump(const SpikeTrain& train);
SpikeTrain parse_spike_dump(const std::string& text, int k, std::size_t neurons);

}  // namespace stemc
