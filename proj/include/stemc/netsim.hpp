#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "stemc/quantizer.hpp"
#include "stemc/sparsity.hpp"
#include "stemc/stem.hpp"

namespace stemc {

/// Limits of the target neuromorphic fabric.
struct HardwareProfile {
  int accumulator_bits = 16;
  int weight_bits = 8;
  std::size_t max_fanin_per_neuron = 1024;
  std::size_t max_neurons_per_core = 1024;
  std::size_t core_count = 576;
};

struct Synapse {
  std::uint32_t group = 0;
  std::uint32_t source = 0;
  std::int32_t weight = 0;
};

/// Explicit synapse list in CSR form, one row per target neuron.
struct SynapseTable {
  std::vector<std::size_t> offsets{0};
  std::vector<Synapse> synapses;

  std::size_t neurons() const { return offsets.size() - 1; }
  std::span<const Synapse> row(std::size_t neuron) const {
    return {synapses.data() + offsets[neuron], offsets[neuron + 1] - offsets[neuron]};
  }
};

/// Synapses feeding one population. Structured forms are kept compact;
/// `unroll` expands any of them into an explicit table with identical
/// behaviour.
class Connectivity {
 public:
  struct Dense {
    std::size_t inputs = 0;
    std::size_t outputs = 0;
    std::vector<std::int8_t> by_source;  // [inputs][outputs], transposed for scatter
  };
  struct Conv {
    LayerSpec spec;
    std::vector<std::int8_t> weights;  // [oc][ic][k][k]; empty for pooling
  };
  struct Join {
    std::size_t neurons = 0;
    std::size_t groups = 2;
  };

  Connectivity() = default;
  static Connectivity dense(std::size_t inputs, std::size_t outputs, std::span<const std::int8_t> weights);
  static Connectivity conv(const LayerSpec& spec, std::span<const std::int8_t> weights);
  static Connectivity pool(const LayerSpec& spec);
  static Connectivity join(std::size_t neurons, std::size_t groups);
  static Connectivity table(SynapseTable synapses, std::size_t groups);

  std::size_t neurons() const;
  std::size_t groups() const;
  std::size_t max_fan_in() const;
  bool is_unrolled() const { return std::holds_alternative<SynapseTable>(form_); }
  /// The explicit table; nullptr unless unrolled.
  const SynapseTable* synapse_table() const { return std::get_if<SynapseTable>(&form_); }

  /// Adds the weight of every synapse of `group` whose source spikes in
  /// `spikes` into `out`. Returns the number of synaptic events.
  std::uint64_t gather(std::size_t group, std::span<const std::uint8_t> spikes, std::span<std::int64_t> out) const;

  /// Outgoing synapses of every source neuron of `group`.
  std::vector<std::uint32_t> fan_out(std::size_t group, std::size_t sources) const;

  Connectivity unroll() const;

 private:
  std::variant<std::monostate, Dense, Conv, Join, SynapseTable> form_;
  std::size_t groups_ = 1;
};

/// Source of a population's input group: another population, or the encoded
/// network input.
inline constexpr int kInputSource = -1;

struct Population {
  std::string name;
  LayerKind kind = LayerKind::FullyConnected;
  std::size_t layer_index = 0;  // index into QuantizedNetwork::layers
  std::size_t neurons = 0;
  int depth = 0;  // pipeline stage, 0 for populations fed by the input
  std::vector<int> sources;  // population index or kInputSource, one per group
  std::vector<PhiSchedule> schedules;  // per group
  Connectivity synapses;
  FixedMult m0;
  FixedMult m1;
  std::vector<std::int64_t> preload;  // per neuron, empty when zero
  std::vector<std::int64_t> bias;     // per neuron, added at finalize
  bool signed_output = false;
  SparsityEntry sparsity;  // identity unless the layer is sparsified

  bool reads_network_input() const;
};

/// A quantized network mapped onto populations of STEM neurons. Flatten
/// layers disappear; their consumers read the flattened population directly.
struct SpikingNetwork {
  std::string name;
  int k = 8;
  int n = 16;
  Shape input_shape;
  QuantParams input;
  QuantParams output;
  Shape output_shape;
  std::vector<Population> populations;  // topological order, output last

  int depth_count() const;
  const Population& output_population() const { return populations.back(); }
};

struct CapacityReport {
  struct Entry {
    std::string population;
    std::size_t neurons = 0;
    std::size_t max_fan_in = 0;
    std::size_t cores = 0;
  };
  std::vector<Entry> populations;
  std::size_t cores_used = 0;
  std::vector<std::string> violations;

  bool ok() const { return violations.empty(); }
};

CapacityReport check_capacity(const SpikingNetwork& snet, const HardwareProfile& hw);

/// `plan` overrides qnet.sparsity when given. With `strict`, any capacity
/// violation throws Error(Capacity); otherwise violations are logged.
SpikingNetwork compile(const QuantizedNetwork& qnet, const SparsityPlan* plan = nullptr,
                       const HardwareProfile& hw = {}, bool strict = false);

struct LayerRunStats {
  std::string layer;
  std::uint64_t sops = 0;
  std::uint64_t saturations = 0;
  std::uint64_t spikes_in = 0;
  std::uint64_t spikes_out = 0;

  LayerRunStats& operator+=(const LayerRunStats& other);
  bool operator==(const LayerRunStats&) const = default;
};

struct RunOptions {
  bool record_spikes = false;
};

struct RunResult {
  IntTensor output;
  std::vector<double> dequantized;
  std::vector<LayerRunStats> layers;  // one per population
  std::size_t steps = 0;              // latency of this sample in time steps
  SpikeTrain input_spikes;            // filled when recording
  std::vector<SpikeTrain> spikes;     // per population, filled when recording

  std::uint64_t total_sops() const;
  std::uint64_t total_saturations() const;
};

/// Runs one sample population by population, K accumulation steps followed
/// by K generation steps each.
RunResult run_sample(const SpikingNetwork& snet, const IntTensor& input, const RunOptions& options = {});

/// Independent sequential runs, parallel over samples.
std::vector<RunResult> run_batch(const SpikingNetwork& snet, std::span<const IntTensor> inputs, int jobs = 1,
                                 const RunOptions& options = {});

struct PipelineResult {
  std::vector<RunResult> samples;
  std::size_t total_steps = 0;
  std::size_t sequential_steps = 0;  // what back-to-back run_sample calls would take

  double steps_per_sample() const;
};

/// Streams samples through the network layer-pipelined: while a population
/// generates sample s it already accumulates sample s+1.
PipelineResult run_pipeline(const SpikingNetwork& snet, std::span<const IntTensor> inputs,
                            const RunOptions& options = {});

}  // namespace stemc
