#include "stemc/metrics.hpp"

#include <bit>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "stemc/error.hpp"

namespace stemc {

EnergyEstimate energy_estimate(double macs, double sops, const EnergyModel& model) {
  return {macs * model.mac_pj * 1e-6, sops * model.ac_pj * 1e-6};
}

std::uint64_t count_macs(const QuantizedNetwork& qnet, bool include_adds) {
  std::uint64_t total = 0;
  for (const auto& layer : qnet.layers) {
    const auto& s = layer.spec;
    const std::uint64_t outputs = element_count(s.out_shape);
    const std::uint64_t window = static_cast<std::uint64_t>(s.kernel) * static_cast<std::uint64_t>(s.kernel);
    switch (s.kind) {
      case LayerKind::FullyConnected:
        total += outputs * static_cast<std::uint64_t>(s.in_features);
        break;
      case LayerKind::Conv2d:
        total += outputs * static_cast<std::uint64_t>(s.in_channels) * window;
        break;
      case LayerKind::AvgPool2d:
        if (include_adds) total += outputs * window;
        break;
      case LayerKind::ResidualAdd:
        if (include_adds) total += outputs;
        break;
      case LayerKind::Flatten:
        break;
    }
  }
  return total;
}

SopCounter::SopCounter(const SpikingNetwork& snet) : snet_(&snet) {
  const std::size_t input_size = element_count(snet.input_shape);
  for (const auto& pop : snet.populations) {
    auto& groups = fan_out_.emplace_back();
    for (std::size_t g = 0; g < pop.sources.size(); ++g) {
      const int src = pop.sources[g];
      const std::size_t sources =
          src == kInputSource ? input_size : snet.populations[static_cast<std::size_t>(src)].neurons;
      groups.push_back(pop.synapses.fan_out(g, sources));
    }
  }
}

std::vector<std::uint64_t> SopCounter::from_trains(const SpikeTrain& input, std::span<const SpikeTrain> trains) const {
  std::vector<std::uint64_t> sops(snet_->populations.size(), 0);
  for (std::size_t p = 0; p < sops.size(); ++p) {
    const auto& pop = snet_->populations[p];
    for (std::size_t g = 0; g < pop.sources.size(); ++g) {
      const int src = pop.sources[g];
      const SpikeTrain& train = src == kInputSource ? input : trains[static_cast<std::size_t>(src)];
      const auto& fan = fan_out_[p][g];
      for (int step = 0; step < train.steps(); ++step) {
        const auto row = train.row(step);
        for (std::size_t j = 0; j < row.size(); ++j) sops[p] += row[j] ? fan[j] : 0;
      }
    }
  }
  return sops;
}

std::vector<std::uint64_t> SopCounter::from_activations(const QuantizedNetwork& qnet,
                                                        const ActivationRecord& record) const {
  const std::uint32_t mask = (std::uint32_t{1} << qnet.k()) - 1;
  std::vector<std::uint64_t> sops(snet_->populations.size(), 0);
  for (std::size_t p = 0; p < sops.size(); ++p) {
    const auto& pop = snet_->populations[p];
    for (std::size_t g = 0; g < pop.sources.size(); ++g) {
      const int src = pop.sources[g];
      const IntTensor& x = src == kInputSource
                               ? record.input
                               : record.layers[snet_->populations[static_cast<std::size_t>(src)].layer_index].output;
      const auto& fan = fan_out_[p][g];
      for (std::size_t j = 0; j < x.size(); ++j) {
        sops[p] += static_cast<std::uint64_t>(std::popcount(static_cast<std::uint32_t>(x[j]) & mask)) * fan[j];
      }
    }
  }
  return sops;
}

std::uint64_t SopCounter::total(std::span<const std::uint64_t> per_population, bool include_io) const {
  std::uint64_t sum = 0;
  for (std::size_t p = 0; p < per_population.size(); ++p) {
    const auto& pop = snet_->populations[p];
    const bool io = pop.reads_network_input() || p + 1 == per_population.size();
    if (include_io || !io) sum += per_population[p];
  }
  return sum;
}

std::uint64_t total_sops(const SpikingNetwork& snet, std::span<const LayerRunStats> layers, bool include_io) {
  std::uint64_t sum = 0;
  for (std::size_t p = 0; p < layers.size(); ++p) {
    const bool io = snet.populations[p].reads_network_input() || p + 1 == layers.size();
    if (include_io || !io) sum += layers[p].sops;
  }
  return sum;
}

double RunSummary::sops_per_sample() const {
  return samples == 0 ? 0.0 : static_cast<double>(total_sops) / static_cast<double>(samples);
}

EnergyEstimate RunSummary::energy(const EnergyModel& model) const {
  return energy_estimate(static_cast<double>(macs), sops_per_sample(), model);
}

RunSummary summarize(const std::string& run, const SpikingNetwork& snet, const QuantizedNetwork& qnet,
                     std::span<const RunResult> results, std::size_t steps, std::optional<double> accuracy,
                     bool include_io) {
  RunSummary s;
  s.run = run;
  s.samples = results.size();
  s.accuracy = accuracy;
  s.steps = steps;
  s.include_io = include_io;
  s.macs = count_macs(qnet);
  s.layers.resize(snet.populations.size());
  for (std::size_t p = 0; p < s.layers.size(); ++p) s.layers[p].layer = snet.populations[p].name;
  for (const auto& r : results) {
    for (std::size_t p = 0; p < s.layers.size(); ++p) s.layers[p] += r.layers[p];
  }
  s.total_sops = total_sops(snet, s.layers, include_io);
  return s;
}

namespace {

std::string percent_change(double base, double value) {
  if (base == 0.0) return "";
  std::ostringstream out;
  out << std::fixed << std::setprecision(2) << 100.0 * (value - base) / base;
  return out.str();
}

std::string fixed(double v, int digits) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(digits) << v;
  return out.str();
}

}  // namespace

void write_layer_csv(std::ostream& out, std::span<const RunSummary> runs) {
  out << "run,layer,sops,saturations,spikes_in,spikes_out\n";
  for (const auto& r : runs) {
    for (const auto& l : r.layers) {
      out << r.run << ',' << l.layer << ',' << l.sops << ',' << l.saturations << ',' << l.spikes_in << ','
          << l.spikes_out << '\n';
    }
  }
}

void write_summary_csv(std::ostream& out, std::span<const RunSummary> runs) {
  out << "run,samples,accuracy,steps,sops_per_sample,macs_per_sample,ann_energy_uj,sdann_energy_uj,"
         "sdann_ann_ratio,sops_change_pct,accuracy_change_pct\n";
  for (const auto& r : runs) {
    const auto e = r.energy();
    out << r.run << ',' << r.samples << ',' << (r.accuracy ? fixed(*r.accuracy, 6) : "") << ',' << r.steps << ','
        << fixed(r.sops_per_sample(), 2) << ',' << r.macs << ',' << fixed(e.ann_uj, 6) << ','
        << fixed(e.sdann_uj, 6) << ',' << fixed(e.ratio(), 6) << ','
        << percent_change(runs.front().sops_per_sample(), r.sops_per_sample()) << ',';
    if (r.accuracy && runs.front().accuracy) out << percent_change(*runs.front().accuracy, *r.accuracy);
    out << '\n';
  }
}

std::string summary_text(std::span<const RunSummary> runs) {
  std::ostringstream out;
  for (const auto& r : runs) {
    const auto e = r.energy();
    out << r.run << ": " << r.samples << " samples";
    if (r.accuracy) out << ", accuracy " << fixed(100.0 * *r.accuracy, 2) << "%";
    out << ", " << r.steps << " steps\n";
    out << "  SOPs/sample " << fixed(r.sops_per_sample(), 1) << (r.include_io ? " (all layers)" : " (hidden layers)")
        << ", MACs/sample " << r.macs << '\n';
    out << "  energy ANN " << fixed(e.ann_uj, 6) << " uJ, SDANN " << fixed(e.sdann_uj, 6) << " uJ, SDANN/ANN "
        << fixed(e.ratio(), 4) << '\n';
    if (&r != &runs.front()) {
      out << "  SOP change vs " << runs.front().run << ": "
          << percent_change(runs.front().sops_per_sample(), r.sops_per_sample()) << "%\n";
    }
  }
  return out.str();
}

void emit_report(std::span<const RunSummary> runs, const std::filesystem::path& prefix) {
  auto open = [](const std::filesystem::path& p) {
    std::ofstream f(p);
    if (!f) throw Error(ErrorKind::Io, "cannot write " + p.string());
    return f;
  };
  {
    auto f = open(prefix.string() + ".csv");
    write_layer_csv(f, runs);
  }
  {
    auto f = open(prefix.string() + "_summary.csv");
    write_summary_csv(f, runs);
  }
}

void save_run_summary(const RunSummary& run, const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  j["format"] = "stemc-run";
  j["format_version"] = 1;
  j["run"] = run.run;
  j["samples"] = run.samples;
  j["accuracy"] = run.accuracy ? nlohmann::ordered_json(*run.accuracy) : nlohmann::ordered_json(nullptr);
  j["steps"] = run.steps;
  j["macs_per_sample"] = run.macs;
  j["total_sops"] = run.total_sops;
  j["include_io_layers"] = run.include_io;
  auto& layers = j["layers"] = nlohmann::ordered_json::array();
  for (const auto& l : run.layers) {
    layers.push_back({{"layer", l.layer},
                      {"sops", l.sops},
                      {"saturations", l.saturations},
                      {"spikes_in", l.spikes_in},
                      {"spikes_out", l.spikes_out}});
  }
  std::ofstream f(path);
  if (!f) throw Error(ErrorKind::Io, "cannot write " + path.string());
  f << j.dump(2) << '\n';
}

RunSummary load_run_summary(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorKind::Io, "cannot open " + path.string());
  try {
    const auto j = nlohmann::json::parse(f);
    if (j.at("format") != "stemc-run") throw Error(ErrorKind::Format, path.string() + " is not a run summary");
    if (j.at("format_version") != 1) throw Error(ErrorKind::Version, "unsupported run summary version");
    RunSummary r;
    r.run = j.at("run").get<std::string>();
    r.samples = j.at("samples").get<std::size_t>();
    if (!j.at("accuracy").is_null()) r.accuracy = j.at("accuracy").get<double>();
    r.steps = j.at("steps").get<std::size_t>();
    r.macs = j.at("macs_per_sample").get<std::uint64_t>();
    r.total_sops = j.at("total_sops").get<std::uint64_t>();
    r.include_io = j.at("include_io_layers").get<bool>();
    for (const auto& l : j.at("layers")) {
      r.layers.push_back({l.at("layer").get<std::string>(), l.at("sops").get<std::uint64_t>(),
                          l.at("saturations").get<std::uint64_t>(), l.at("spikes_in").get<std::uint64_t>(),
                          l.at("spikes_out").get<std::uint64_t>()});
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, path.string() + ": " + e.what());
  }
}

}  // namespace stemc
