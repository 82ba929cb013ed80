#include "stemc/netsim.hpp"

#include <algorithm>
#include <map>

#include <spdlog/spdlog.h>

#include "stemc/error.hpp"
#include "stemc/parallel.hpp"
#include "stemc/refengine.hpp"

namespace stemc {

// ---------------------------------------------------------------------------
// Connectivity
// ---------------------------------------------------------------------------

namespace {

template <typename Visit>
void for_each_window(const LayerSpec& spec, Visit&& visit) {
  const bool pool = spec.kind == LayerKind::AvgPool2d;
  const int ih = spec.in_shape[1], iw = spec.in_shape[2];
  const int oh = spec.out_shape[1], ow = spec.out_shape[2];
  const int k = spec.kernel;
  std::size_t target = 0;
  for (int oc = 0; oc < spec.out_channels; ++oc) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox, ++target) {
        const int ic_begin = pool ? oc : 0;
        const int ic_end = pool ? oc + 1 : spec.in_channels;
        for (int ic = ic_begin; ic < ic_end; ++ic) {
          for (int ky = 0; ky < k; ++ky) {
            const int iy = oy * spec.stride - spec.padding + ky;
            if (iy < 0 || iy >= ih) continue;
            for (int kx = 0; kx < k; ++kx) {
              const int ix = ox * spec.stride - spec.padding + kx;
              if (ix < 0 || ix >= iw) continue;
              const std::size_t source = (static_cast<std::size_t>(ic) * ih + iy) * iw + ix;
              const std::size_t widx = pool ? 0 : ((static_cast<std::size_t>(oc) * spec.in_channels + ic) * k + ky) * k + kx;
              visit(target, source, widx);
            }
          }
        }
      }
    }
  }
}

}  // namespace

Connectivity Connectivity::dense(std::size_t inputs, std::size_t outputs, std::span<const std::int8_t> weights) {
  if (weights.size() != inputs * outputs) throw Error(ErrorKind::Shape, "dense weight count mismatch");
  Dense d{inputs, outputs, std::vector<std::int8_t>(inputs * outputs)};
  for (std::size_t i = 0; i < outputs; ++i) {
    for (std::size_t j = 0; j < inputs; ++j) d.by_source[j * outputs + i] = weights[i * inputs + j];
  }
  Connectivity c;
  c.form_ = std::move(d);
  return c;
}

Connectivity Connectivity::conv(const LayerSpec& spec, std::span<const std::int8_t> weights) {
  Connectivity c;
  c.form_ = Conv{spec, std::vector<std::int8_t>(weights.begin(), weights.end())};
  return c;
}

Connectivity Connectivity::pool(const LayerSpec& spec) {
  Connectivity c;
  c.form_ = Conv{spec, {}};
  return c;
}

Connectivity Connectivity::join(std::size_t neurons, std::size_t groups) {
  Connectivity c;
  c.form_ = Join{neurons, groups};
  c.groups_ = groups;
  return c;
}

Connectivity Connectivity::table(SynapseTable synapses, std::size_t groups) {
  Connectivity c;
  c.form_ = std::move(synapses);
  c.groups_ = groups;
  return c;
}

std::size_t Connectivity::neurons() const {
  return std::visit(
      [](const auto& f) -> std::size_t {
        using F = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<F, Dense>) return f.outputs;
        else if constexpr (std::is_same_v<F, Conv>) return element_count(f.spec.out_shape);
        else if constexpr (std::is_same_v<F, Join>) return f.neurons;
        else if constexpr (std::is_same_v<F, SynapseTable>) return f.neurons();
        else return 0;
      },
      form_);
}

std::size_t Connectivity::groups() const { return groups_; }

std::size_t Connectivity::max_fan_in() const {
  return std::visit(
      [](const auto& f) -> std::size_t {
        using F = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<F, Dense>) {
          return f.inputs;
        } else if constexpr (std::is_same_v<F, Conv>) {
          const std::size_t window = static_cast<std::size_t>(f.spec.kernel) * f.spec.kernel;
          return f.weights.empty() ? window : window * static_cast<std::size_t>(f.spec.in_channels);
        } else if constexpr (std::is_same_v<F, Join>) {
          return f.groups;
        } else if constexpr (std::is_same_v<F, std::monostate>) {
          return 0;
        } else {
          std::size_t best = 0;
          for (std::size_t i = 0; i < f.neurons(); ++i) best = std::max(best, f.row(i).size());
          return best;
        }
      },
      form_);
}

std::uint64_t Connectivity::gather(std::size_t group, std::span<const std::uint8_t> spikes,
                                   std::span<std::int64_t> out) const {
  std::uint64_t events = 0;
  std::visit(
      [&](const auto& f) {
        using F = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<F, Dense>) {
          for (std::size_t j = 0; j < f.inputs; ++j) {
            if (!spikes[j]) continue;
            const std::int8_t* row = f.by_source.data() + j * f.outputs;
            for (std::size_t i = 0; i < f.outputs; ++i) out[i] += row[i];
            events += f.outputs;
          }
        } else if constexpr (std::is_same_v<F, Conv>) {
          const bool pool = f.weights.empty();
          for_each_window(f.spec, [&](std::size_t target, std::size_t source, std::size_t widx) {
            if (!spikes[source]) return;
            out[target] += pool ? 1 : f.weights[widx];
            ++events;
          });
        } else if constexpr (std::is_same_v<F, Join>) {
          for (std::size_t i = 0; i < f.neurons; ++i) {
            out[i] += spikes[i];
            events += spikes[i];
          }
        } else if constexpr (std::is_same_v<F, SynapseTable>) {
          for (std::size_t i = 0; i < f.neurons(); ++i) {
            for (const Synapse& s : f.row(i)) {
              if (s.group != group || !spikes[s.source]) continue;
              out[i] += s.weight;
              ++events;
            }
          }
        }
      },
      form_);
  return events;
}

std::vector<std::uint32_t> Connectivity::fan_out(std::size_t group, std::size_t sources) const {
  std::vector<std::uint32_t> counts(sources, 0);
  std::visit(
      [&](const auto& f) {
        using F = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<F, Dense>) {
          std::fill(counts.begin(), counts.end(), static_cast<std::uint32_t>(f.outputs));
        } else if constexpr (std::is_same_v<F, Conv>) {
          for_each_window(f.spec, [&](std::size_t, std::size_t source, std::size_t) { ++counts[source]; });
        } else if constexpr (std::is_same_v<F, Join>) {
          std::fill(counts.begin(), counts.end(), 1U);
        } else if constexpr (std::is_same_v<F, SynapseTable>) {
          for (const Synapse& s : f.synapses) {
            if (s.group == group) ++counts[s.source];
          }
        }
      },
      form_);
  return counts;
}

Connectivity Connectivity::unroll() const {
  SynapseTable table;
  const std::size_t count = neurons();
  std::visit(
      [&](const auto& f) {
        using F = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<F, Dense>) {
          for (std::size_t i = 0; i < count; ++i) {
            for (std::size_t j = 0; j < f.inputs; ++j) {
              table.synapses.push_back({0, static_cast<std::uint32_t>(j), f.by_source[j * f.outputs + i]});
            }
            table.offsets.push_back(table.synapses.size());
          }
        } else if constexpr (std::is_same_v<F, Conv>) {
          std::vector<std::vector<Synapse>> rows(count);
          const bool pool = f.weights.empty();
          for_each_window(f.spec, [&](std::size_t target, std::size_t source, std::size_t widx) {
            rows[target].push_back({0, static_cast<std::uint32_t>(source), pool ? 1 : f.weights[widx]});
          });
          for (auto& r : rows) {
            table.synapses.insert(table.synapses.end(), r.begin(), r.end());
            table.offsets.push_back(table.synapses.size());
          }
        } else if constexpr (std::is_same_v<F, Join>) {
          for (std::size_t i = 0; i < count; ++i) {
            for (std::size_t g = 0; g < f.groups; ++g) {
              table.synapses.push_back({static_cast<std::uint32_t>(g), static_cast<std::uint32_t>(i), 1});
            }
            table.offsets.push_back(table.synapses.size());
          }
        } else if constexpr (std::is_same_v<F, SynapseTable>) {
          table = f;
        }
      },
      form_);
  return Connectivity::table(std::move(table), groups_);
}

// ---------------------------------------------------------------------------
// Compilation
// ---------------------------------------------------------------------------

bool Population::reads_network_input() const {
  return std::find(sources.begin(), sources.end(), kInputSource) != sources.end();
}

int SpikingNetwork::depth_count() const {
  int depth = 0;
  for (const auto& p : populations) depth = std::max(depth, p.depth + 1);
  return depth;
}

CapacityReport check_capacity(const SpikingNetwork& snet, const HardwareProfile& hw) {
  CapacityReport report;
  if (snet.n > hw.accumulator_bits) {
    report.violations.push_back("accumulator width " + std::to_string(snet.n) + " exceeds hardware " +
                                std::to_string(hw.accumulator_bits) + " bits");
  }
  for (const auto& pop : snet.populations) {
    CapacityReport::Entry e;
    e.population = pop.name;
    e.neurons = pop.neurons;
    e.max_fan_in = pop.synapses.max_fan_in();
    e.cores = (pop.neurons + hw.max_neurons_per_core - 1) / hw.max_neurons_per_core;
    if (e.max_fan_in > hw.max_fanin_per_neuron) {
      report.violations.push_back(pop.name + ": fan-in " + std::to_string(e.max_fan_in) + " exceeds " +
                                  std::to_string(hw.max_fanin_per_neuron));
    }
    report.cores_used += e.cores;
    report.populations.push_back(e);
  }
  if (report.cores_used > hw.core_count) {
    report.violations.push_back("needs " + std::to_string(report.cores_used) + " cores, hardware has " +
                                std::to_string(hw.core_count));
  }
  return report;
}

SpikingNetwork compile(const QuantizedNetwork& qnet, const SparsityPlan* plan, const HardwareProfile& hw,
                       bool strict) {
  validate(qnet);
  const SparsityPlan& active = plan ? *plan : qnet.sparsity;
  if (plan) validate_plan(*plan, qnet);
  if (qnet.layers.back().spec.kind == LayerKind::Flatten) {
    throw Error(ErrorKind::Graph, "output layer cannot be a flatten");
  }
  if (qnet.config.weight_bits > hw.weight_bits) {
    const std::string msg = "weights use " + std::to_string(qnet.config.weight_bits) + " bits, hardware supports " +
                            std::to_string(hw.weight_bits);
    if (strict) throw Error(ErrorKind::Capacity, msg);
    spdlog::warn("{}", msg);
  }

  SpikingNetwork snet;
  snet.name = qnet.name;
  snet.k = qnet.k();
  snet.n = qnet.n();
  snet.input_shape = qnet.input_shape;
  snet.input = qnet.input;
  snet.output = qnet.layers.back().out;
  snet.output_shape = qnet.layers.back().spec.out_shape;

  // Population carrying the tensor of every layer (flatten aliases its source).
  std::vector<int> population_of(qnet.layers.size(), kInputSource);
  for (std::size_t l = 0; l < qnet.layers.size(); ++l) {
    const auto& layer = qnet.layers[l];
    if (layer.spec.kind == LayerKind::Flatten) {
      const int src = layer.spec.input_ids[0];
      population_of[l] = src == kNetworkInput ? kInputSource : population_of[static_cast<std::size_t>(src)];
      continue;
    }
    Population pop;
    pop.name = layer.spec.name;
    pop.kind = layer.spec.kind;
    pop.layer_index = l;
    pop.neurons = element_count(layer.spec.out_shape);
    pop.m0 = layer.m0;
    pop.m1 = layer.m1;
    pop.signed_output = layer.spec.is_signed_output();
    for (int id : layer.spec.input_ids) {
      const int src = id == kNetworkInput ? kInputSource : population_of[static_cast<std::size_t>(id)];
      pop.sources.push_back(src);
      pop.schedules.push_back({snet.k, tensor_is_signed(qnet, id)});
      if (src != kInputSource) {
        pop.depth = std::max(pop.depth, snet.populations[static_cast<std::size_t>(src)].depth + 1);
      }
    }
    const auto weights = std::span<const std::int8_t>(layer.weights.data);
    switch (layer.spec.kind) {
      case LayerKind::FullyConnected:
        pop.synapses = Connectivity::dense(static_cast<std::size_t>(layer.spec.in_features), pop.neurons, weights);
        break;
      case LayerKind::Conv2d:
        pop.synapses = Connectivity::conv(layer.spec, weights);
        break;
      case LayerKind::AvgPool2d:
        pop.synapses = Connectivity::pool(layer.spec);
        break;
      case LayerKind::ResidualAdd:
        pop.synapses = Connectivity::join(pop.neurons, pop.sources.size());
        break;
      case LayerKind::Flatten:
        break;
    }
    if (!layer.bias.empty()) {
      const bool preload = layer.bias_scheme == BiasScheme::WeightInputScale;
      auto& target = preload ? pop.preload : pop.bias;
      target.resize(pop.neurons);
      for (std::size_t i = 0; i < pop.neurons; ++i) target[i] = layer.bias_at(i);
    }
    const bool sparsifiable = l + 1 < qnet.layers.size() && !pop.signed_output;
    if (const SparsityEntry* e = sparsifiable ? active.find(pop.name) : nullptr) pop.sparsity = *e;
    pop.sparsity.layer = pop.name;
    population_of[l] = static_cast<int>(snet.populations.size());
    snet.populations.push_back(std::move(pop));
  }

  const auto report = check_capacity(snet, hw);
  if (!report.ok()) {
    std::string msg;
    for (const auto& v : report.violations) msg += (msg.empty() ? "" : "; ") + v;
    if (strict) throw Error(ErrorKind::Capacity, msg);
    spdlog::warn("capacity: {}", msg);
  }
  return snet;
}

// ---------------------------------------------------------------------------
// Execution
// ---------------------------------------------------------------------------

LayerRunStats& LayerRunStats::operator+=(const LayerRunStats& other) {
  sops += other.sops;
  saturations += other.saturations;
  spikes_in += other.spikes_in;
  spikes_out += other.spikes_out;
  return *this;
}

std::uint64_t RunResult::total_sops() const {
  std::uint64_t total = 0;
  for (const auto& l : layers) total += l.sops;
  return total;
}

std::uint64_t RunResult::total_saturations() const {
  std::uint64_t total = 0;
  for (const auto& l : layers) total += l.saturations;
  return total;
}

double PipelineResult::steps_per_sample() const {
  return samples.empty() ? 0.0 : static_cast<double>(total_steps) / static_cast<double>(samples.size());
}

namespace {

SpikeTrain encode_input(const SpikingNetwork& snet, const IntTensor& input) {
  if (input.size() != element_count(snet.input_shape)) {
    throw Error(ErrorKind::Shape, "input has " + std::to_string(input.size()) + " values, network expects " +
                                      shape_to_string(snet.input_shape));
  }
  return SpikeTrain::encode(input.data, snet.k, true);
}

/// Per-population scratch for accumulating one step.
struct Accumulator {
  std::vector<std::int64_t> current;
  std::vector<std::int64_t> partial;

  explicit Accumulator(std::size_t neurons) : current(neurons), partial(neurons) {}

  void step(const Population& pop, StemState& state, std::span<const std::span<const std::uint8_t>> rows, int step,
            LayerRunStats& stats) {
    std::fill(current.begin(), current.end(), 0);
    for (std::size_t g = 0; g < rows.size(); ++g) {
      std::fill(partial.begin(), partial.end(), 0);
      stats.sops += pop.synapses.gather(g, rows[g], partial);
      stats.spikes_in += static_cast<std::uint64_t>(std::count(rows[g].begin(), rows[g].end(), std::uint8_t{1}));
      const std::int64_t w = pop.schedules[g].weight(step);
      for (std::size_t i = 0; i < current.size(); ++i) current[i] += w * partial[i];
    }
    accumulate_step(state, current, pop.m0);
  }
};

void begin_sample(const Population& pop, StemState& state) {
  state.saturation_count = 0;
  state.reset(pop.preload, pop.m0);
}

void end_accumulation(const Population& pop, StemState& state, int k) {
  finalize(state, pop.m1, pop.bias, k, pop.signed_output);
  if (pop.sparsity.rot_bits > 0) {
    for (auto& v : state.v) v = rot(v, pop.sparsity.rot_bits, k);
  }
}

void decode_output(const SpikingNetwork& snet, const SpikeTrain& train, RunResult& result) {
  const auto values = train.decode({snet.k, snet.output_population().signed_output});
  result.output = IntTensor(snet.output_shape);
  result.dequantized.resize(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    result.output[i] = static_cast<std::int32_t>(values[i]);
    result.dequantized[i] = dequantize(values[i], snet.output);
  }
}

std::vector<LayerRunStats> empty_stats(const SpikingNetwork& snet) {
  std::vector<LayerRunStats> stats(snet.populations.size());
  for (std::size_t p = 0; p < stats.size(); ++p) stats[p].layer = snet.populations[p].name;
  return stats;
}

}  // namespace

RunResult run_sample(const SpikingNetwork& snet, const IntTensor& input, const RunOptions& options) {
  const int k = snet.k;
  const SpikeTrain input_train = encode_input(snet, input);
  RunResult result;
  result.layers = empty_stats(snet);
  result.steps = static_cast<std::size_t>(k) * static_cast<std::size_t>(snet.depth_count() + 1);
  std::vector<SpikeTrain> trains(snet.populations.size());

  for (std::size_t p = 0; p < snet.populations.size(); ++p) {
    const Population& pop = snet.populations[p];
    auto& stats = result.layers[p];
    StemState state(pop.neurons, snet.n);
    Accumulator acc(pop.neurons);
    begin_sample(pop, state);
    std::vector<std::span<const std::uint8_t>> rows(pop.sources.size());
    for (int step = 0; step < k; ++step) {
      for (std::size_t g = 0; g < rows.size(); ++g) {
        const int src = pop.sources[g];
        rows[g] = src == kInputSource ? input_train.row(step) : trains[static_cast<std::size_t>(src)].row(step);
      }
      acc.step(pop, state, rows, step, stats);
    }
    end_accumulation(pop, state, k);
    stats.saturations = state.saturation_count;

    SpikeTrain out(k, pop.neurons);
    const PhiSchedule schedule{k, pop.signed_output};
    for (int step = 0; step < k; ++step) generate_step(state, step, schedule, out.row(step), pop.sparsity.drlo_bits);
    stats.spikes_out = out.spike_count();
    trains[p] = std::move(out);
  }

  decode_output(snet, trains.back(), result);
  if (options.record_spikes) {
    result.input_spikes = input_train;
    result.spikes = std::move(trains);
  }
  return result;
}

std::vector<RunResult> run_batch(const SpikingNetwork& snet, std::span<const IntTensor> inputs, int jobs,
                                 const RunOptions& options) {
  std::vector<RunResult> results(inputs.size());
  parallel_for(inputs.size(), jobs, [&](std::size_t i) { results[i] = run_sample(snet, inputs[i], options); });
  return results;
}

PipelineResult run_pipeline(const SpikingNetwork& snet, std::span<const IntTensor> inputs,
                            const RunOptions& options) {
  const int k = snet.k;
  const std::size_t count = snet.populations.size();
  const std::size_t samples = inputs.size();
  const std::size_t levels = static_cast<std::size_t>(snet.depth_count());
  const std::size_t K = static_cast<std::size_t>(k);

  PipelineResult result;
  result.total_steps = samples == 0 ? 0 : K * (levels + samples);
  result.sequential_steps = samples * K * (levels + 1);
  result.samples.resize(samples);
  for (auto& r : result.samples) {
    r.layers = empty_stats(snet);
    r.steps = K * (levels + 1);
    if (options.record_spikes) r.spikes.resize(count);
  }

  // Readers of every population's output channel (and the input channel).
  std::vector<int> readers(count, 0);
  int input_readers = 0;
  for (const auto& pop : snet.populations) {
    for (int src : pop.sources) (src == kInputSource ? input_readers : readers[static_cast<std::size_t>(src)])++;
  }

  struct Slot {
    StemState state;
    std::size_t sample = 0;
  };
  std::vector<Slot> accumulating(count), generating(count);
  std::vector<Accumulator> scratch;
  for (std::size_t p = 0; p < count; ++p) {
    accumulating[p].state = StemState(snet.populations[p].neurons, snet.n);
    generating[p].state = StemState(snet.populations[p].neurons, snet.n);
    scratch.emplace_back(snet.populations[p].neurons);
  }
  // Per-sample spike buffers with the number of outstanding readers.
  struct Buffer {
    SpikeTrain train;
    int pending = 0;
  };
  std::vector<std::map<std::size_t, Buffer>> channels(count);
  std::map<std::size_t, Buffer> input_channel;

  auto release = [](std::map<std::size_t, Buffer>& channel, std::size_t sample) {
    auto it = channel.find(sample);
    if (--it->second.pending <= 0) channel.erase(it);
  };

  for (std::size_t t = 0; t < result.total_steps; ++t) {
    const std::size_t window = t / K;
    const int step = static_cast<int>(t % K);

    if (step == 0 && window < samples) {
      auto& buf = input_channel[window];
      buf.train = encode_input(snet, inputs[window]);
      buf.pending = input_readers;
      if (options.record_spikes) result.samples[window].input_spikes = buf.train;
    }

    for (std::size_t p = 0; p < count; ++p) {
      const Population& pop = snet.populations[p];
      const std::size_t depth = static_cast<std::size_t>(pop.depth);

      // Generation of the sample accumulated in the previous window.
      if (window >= depth + 1 && window - depth - 1 < samples) {
        Slot& slot = generating[p];
        auto& buf = channels[p][slot.sample];
        if (step == 0) {
          buf.train = SpikeTrain(k, pop.neurons);
          buf.pending = readers[p];
        }
        generate_step(slot.state, step, {k, pop.signed_output}, buf.train.row(step), pop.sparsity.drlo_bits);
        if (step == k - 1) {
          RunResult& r = result.samples[slot.sample];
          r.layers[p].spikes_out = buf.train.spike_count();
          if (options.record_spikes) r.spikes[p] = buf.train;
          if (p + 1 == count) {
            decode_output(snet, buf.train, r);
            channels[p].erase(slot.sample);
          }
        }
      }

      // Accumulation of the sample currently entering this stage.
      if (window >= depth && window - depth < samples) {
        const std::size_t s = window - depth;
        Slot& slot = accumulating[p];
        if (step == 0) {
          slot.sample = s;
          begin_sample(pop, slot.state);
        }
        std::vector<std::span<const std::uint8_t>> rows(pop.sources.size());
        for (std::size_t g = 0; g < rows.size(); ++g) {
          const int src = pop.sources[g];
          auto& channel = src == kInputSource ? input_channel : channels[static_cast<std::size_t>(src)];
          rows[g] = channel.at(s).train.row(step);
        }
        RunResult& r = result.samples[s];
        scratch[p].step(pop, slot.state, rows, step, r.layers[p]);
        if (step == k - 1) {
          for (int src : pop.sources) {
            release(src == kInputSource ? input_channel : channels[static_cast<std::size_t>(src)], s);
          }
          end_accumulation(pop, slot.state, k);
          r.layers[p].saturations = slot.state.saturation_count;
          std::swap(accumulating[p], generating[p]);
        }
      }
    }
  }
  return result;
}

}  // namespace stemc
