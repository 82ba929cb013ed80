#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stemc/netsim.hpp"
#include "stemc/refengine.hpp"

namespace stemc {

/// Energy per operation in picojoules (45 nm figures).
struct EnergyModel {
  double mac_pj = 0.23;
  double ac_pj = 0.03;
};

struct EnergyEstimate {
  double ann_uj = 0.0;
  double sdann_uj = 0.0;

  /// sdann / ann; 0 when the ANN side is empty.
  double ratio() const { return ann_uj > 0.0 ? sdann_uj / ann_uj : 0.0; }
};

EnergyEstimate energy_estimate(double macs, double sops, const EnergyModel& model = {});

/// Multiply-accumulates of the equivalent ANN for one sample. Pooling and
/// residual additions are not multiplications and only count when
/// `include_adds` is set.
std::uint64_t count_macs(const QuantizedNetwork& qnet, bool include_adds = false);

/// Counts synaptic operations from spike counts and synapse fan-out, without
/// running the executor.
class SopCounter {
 public:
  explicit SopCounter(const SpikingNetwork& snet);

  /// Per population SOPs implied by the spike trains feeding it.
  std::vector<std::uint64_t> from_trains(const SpikeTrain& input, std::span<const SpikeTrain> trains) const;

  /// Per population SOPs implied by integer activations: every value x sends
  /// popcount of its K-bit train through each outgoing synapse.
  std::vector<std::uint64_t> from_activations(const QuantizedNetwork& qnet, const ActivationRecord& record) const;

  /// Sum over populations; the ones reading the network input and the output
  /// population only count with `include_io`.
  std::uint64_t total(std::span<const std::uint64_t> per_population, bool include_io) const;

 private:
  const SpikingNetwork* snet_;
  std::vector<std::vector<std::vector<std::uint32_t>>> fan_out_;  // [population][group][source]
};

std::uint64_t total_sops(const SpikingNetwork& snet, std::span<const LayerRunStats> layers, bool include_io);

/// Aggregate of one evaluated configuration.
struct RunSummary {
  std::string run;
  std::size_t samples = 0;
  std::optional<double> accuracy;
  std::vector<LayerRunStats> layers;  // summed over samples
  std::uint64_t total_sops = 0;       // summed over samples, io policy applied
  std::uint64_t macs = 0;             // per sample
  std::size_t steps = 0;
  bool include_io = false;

  double sops_per_sample() const;
  EnergyEstimate energy(const EnergyModel& model = {}) const;
};

RunSummary summarize(const std::string& run, const SpikingNetwork& snet, const QuantizedNetwork& qnet,
                     std::span<const RunResult> results, std::size_t steps, std::optional<double> accuracy,
                     bool include_io);

/// Writes <prefix>.csv (run,layer,sops,saturations,spikes_in,spikes_out) and
/// <prefix>_summary.csv with one row per run plus the SOP/energy change of
/// every run relative to the first one.
void emit_report(std::span<const RunSummary> runs, const std::filesystem::path& prefix);
void write_layer_csv(std::ostream& out, std::span<const RunSummary> runs);
void write_summary_csv(std::ostream& out, std::span<const RunSummary> runs);
std::string summary_text(std::span<const RunSummary> runs);

void save_run_summary(const RunSummary& run, const std::filesystem::path& path);
RunSummary load_run_summary(const std::filesystem::path& path);

}  // namespace stemc
