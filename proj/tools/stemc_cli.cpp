// stemc: quantize, simulate and analyse spiking conversions of ANNs.

#include <CLI11.hpp>

#include <filesystem>
#include <iomanip>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "stemc/error.hpp"
#include "stemc/fixtures.hpp"
#include "stemc/log.hpp"
#include "stemc/metrics.hpp"
#include "stemc/model_io.hpp"
#include "stemc/netsim.hpp"
#include "stemc/parallel.hpp"
#include "stemc/refengine.hpp"
#include "stemc/tuner.hpp"

namespace fs = std::filesystem;
using namespace stemc;

namespace {

struct Options {
  // inputs and outputs
  std::string model;
  std::string dataset;
  std::string output;
  std::vector<std::string> runs;
  std::string fixture;
  std::string run_name;

  // quantization
  int k = 8;
  int acc_bits = 16;
  int bias_bits = 16;

  // execution
  std::string mode = "sim";
  int rot = -1;
  int drlo = -1;
  double budget = 0.015;
  int jobs = 1;
  std::uint64_t seed = 1;
  std::size_t samples = 200;
  std::string dump_spikes;
  std::size_t dump_count = 1;
  std::string activations;
  bool strict_capacity = false;
  bool include_io = false;
};

std::vector<IntTensor> quantize_inputs(const QuantizedNetwork& qnet, const std::vector<Sample>& samples) {
  std::vector<IntTensor> inputs;
  inputs.reserve(samples.size());
  for (const auto& s : samples) inputs.push_back(quantize_input(qnet, s.input));
  return inputs;
}

double accuracy_of(std::span<const IntTensor> outputs, const std::vector<Sample>& samples) {
  return top1_accuracy(outputs, samples);
}

bool has_labels(const std::vector<Sample>& samples) {
  return !samples.empty() && !samples.front().label.empty();
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path);
  if (!f) throw Error(ErrorKind::Io, "cannot write " + path.string());
  return f;
}

void write_outputs_csv(const fs::path& path, std::span<const IntTensor> outputs, const std::vector<Sample>& samples) {
  auto f = open_out(path);
  f << "sample,label,prediction,outputs\n";
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    f << i << ',' << (samples[i].label.empty() ? -1 : samples[i].label[0]) << ','
      << argmax_decode(outputs[i].data) << ',';
    for (std::size_t j = 0; j < outputs[i].size(); ++j) f << (j ? " " : "") << outputs[i][j];
    f << '\n';
  }
}

SparsityPlan active_plan(const QuantizedNetwork& qnet, const Options& o) {
  if (o.rot < 0 && o.drlo < 0) return qnet.sparsity;
  return uniform_plan(qnet, std::max(o.rot, 0), std::max(o.drlo, 0));
}

void dump_spikes(const fs::path& dir, const SpikingNetwork& snet, const std::vector<RunResult>& results,
                 std::size_t count) {
  fs::create_directories(dir);
  for (std::size_t s = 0; s < std::min(count, results.size()); ++s) {
    const auto& r = results[s];
    auto write = [&](const std::string& name, const SpikeTrain& train) {
      auto f = open_out(dir / ("sample" + std::to_string(s) + "_" + name + ".spikes"));
      f << format_spike_dump(train);
    };
    write("input", r.input_spikes);
    for (std::size_t p = 0; p < snet.populations.size(); ++p) write(snet.populations[p].name, r.spikes[p]);
  }
}

int cmd_quantize(const Options& o) {
  const FloatModel model = load_float_model(o.model);
  const auto samples = load_dataset(o.dataset);
  QuantConfig config;
  config.activation_bits = o.k;
  config.acc_bits = o.acc_bits;
  config.bias_bits = o.bias_bits;
  config.validate();
  const auto inputs = fixtures::inputs_of(samples);
  const CalibStats stats = calibrate(model, inputs, config, o.jobs);
  const QuantizedNetwork qnet = build_quantized_network(model, stats, config);
  save_quantized_model(qnet, o.output);
  std::cout << "calibrated " << qnet.layers.size() << " layers on " << stats.samples << " samples\n"
            << calibration_report(qnet, stats);
  return 0;
}

int cmd_run(const Options& o) {
  const QuantizedNetwork qnet = load_quantized_model(o.model);
  const auto samples = load_dataset(o.dataset);
  const SparsityPlan plan = active_plan(qnet, o);
  validate_plan(plan, qnet);
  const SpikingNetwork snet = compile(qnet, &plan, HardwareProfile{}, o.strict_capacity);
  const auto inputs = quantize_inputs(qnet, samples);
  const std::size_t levels = static_cast<std::size_t>(snet.depth_count());
  const std::size_t k = static_cast<std::size_t>(snet.k);

  std::vector<RunResult> results;
  std::size_t steps = 0;
  const RunOptions run_options{!o.dump_spikes.empty()};
  if (o.mode == "oracle") {
    const SopCounter counter(snet);
    std::vector<ActivationRecord> records(inputs.size());
    parallel_for(inputs.size(), o.jobs,
                 [&](std::size_t i) { records[i] = int_forward(qnet, inputs[i], IntMode::Emulated, &plan); });
    for (const auto& rec : records) {
      RunResult r;
      r.output = rec.output();
      const auto sops = counter.from_activations(qnet, rec);
      for (std::size_t p = 0; p < snet.populations.size(); ++p) {
        const auto& act = rec.layers[snet.populations[p].layer_index];
        r.layers.push_back({snet.populations[p].name, sops[p], act.saturations, 0, 0});
      }
      results.push_back(std::move(r));
    }
    steps = inputs.size() * k * (levels + 1);
    if (!o.activations.empty()) {
      auto f = open_out(o.activations);
      for (const auto& rec : records) write_activation_csv(f, qnet, rec);
    }
  } else if (o.mode == "sim") {
    results = run_batch(snet, inputs, o.jobs, run_options);
    steps = inputs.size() * k * (levels + 1);
  } else if (o.mode == "pipeline") {
    auto piped = run_pipeline(snet, inputs, run_options);
    results = std::move(piped.samples);
    steps = piped.total_steps;
  } else {
    throw Error(ErrorKind::Config, "unknown mode '" + o.mode + "'");
  }
  if (!o.dump_spikes.empty() && o.mode != "oracle") dump_spikes(o.dump_spikes, snet, results, o.dump_count);

  std::vector<IntTensor> outputs;
  for (const auto& r : results) outputs.push_back(r.output);
  std::optional<double> accuracy;
  if (has_labels(samples)) accuracy = accuracy_of(outputs, samples);
  const std::string name = o.run_name.empty() ? o.mode : o.run_name;
  const RunSummary summary = summarize(name, snet, qnet, results, steps, accuracy, o.include_io);

  std::cout << summary_text(std::span(&summary, 1));
  if (o.mode == "pipeline") {
    std::cout << "pipeline: " << steps << " steps for " << inputs.size() << " samples over " << levels
              << " stages (K=" << k << ")\n";
  }
  if (!o.output.empty()) {
    save_run_summary(summary, o.output + ".json");
    emit_report(std::span(&summary, 1), o.output);
    write_outputs_csv(o.output + "_outputs.csv", outputs, samples);
  }
  return 0;
}

int cmd_compare(const Options& o) {
  const QuantizedNetwork qnet = load_quantized_model(o.model);
  const auto samples = load_dataset(o.dataset);
  const SparsityPlan plan = active_plan(qnet, o);
  const SpikingNetwork snet = compile(qnet, &plan, HardwareProfile{}, o.strict_capacity);
  const auto inputs = quantize_inputs(qnet, samples);
  const auto results = run_batch(snet, inputs, o.jobs);
  std::vector<std::size_t> mismatched(inputs.size(), 0);
  parallel_for(inputs.size(), o.jobs, [&](std::size_t i) {
    const auto rec = int_forward(qnet, inputs[i], IntMode::Emulated, &plan);
    for (std::size_t j = 0; j < rec.output().size(); ++j) mismatched[i] += rec.output()[j] != results[i].output[j];
  });
  std::size_t bad_samples = 0, bad_values = 0;
  for (auto m : mismatched) {
    bad_samples += m > 0;
    bad_values += m;
  }
  std::cout << bad_samples << " mismatches / " << inputs.size() << " samples (" << bad_values
            << " differing output values)\n";
  if (!o.output.empty()) {
    auto f = open_out(o.output);
    f << "sample,mismatched_values\n";
    for (std::size_t i = 0; i < mismatched.size(); ++i) f << i << ',' << mismatched[i] << '\n';
  }
  return bad_samples == 0 ? 0 : 1;
}

int cmd_tune(const Options& o) {
  QuantizedNetwork qnet = load_quantized_model(o.model);
  const auto samples = load_dataset(o.dataset);
  if (!has_labels(samples)) throw Error(ErrorKind::Config, "tuning needs a labelled dataset");
  TuneOptions options;
  options.budget = o.budget;
  options.jobs = o.jobs;
  options.include_io = o.include_io;
  const TuneResult result = tune_hybrid(qnet, samples, options);
  qnet.sparsity = result.plan;
  save_quantized_model(qnet, o.output.empty() ? o.model : o.output);

  std::cout << "layer            rot  drlo\n";
  for (const auto& e : result.plan.entries) {
    std::cout << std::left << std::setw(16) << e.layer << std::right << std::setw(4) << e.rot_bits << std::setw(6)
              << e.drlo_bits << '\n';
  }
  std::cout << std::fixed << std::setprecision(2) << "accuracy " << 100.0 * result.baseline_accuracy << "% -> "
            << 100.0 * result.accuracy << "%\n"
            << "SOPs " << result.baseline_sops << " -> " << result.sops << " (" << 100.0 * result.sop_reduction()
            << "% fewer)\n";
  return 0;
}

int cmd_report(const Options& o) {
  std::vector<RunSummary> runs;
  for (const auto& path : o.runs) runs.push_back(load_run_summary(path));
  if (!o.output.empty()) emit_report(runs, o.output);
  write_summary_csv(std::cout, runs);
  std::cout << summary_text(runs);
  return 0;
}

int cmd_make_fixture(const Options& o) {
  const FloatModel model = fixtures::by_name(o.fixture, o.seed);
  const fs::path dir(o.output);
  fs::create_directories(dir);
  save_float_model(model, dir / (o.fixture + ".json"));
  const auto samples = fixtures::samples_for(o.fixture, model, o.samples, o.seed + 1000);
  save_dataset(samples, model.input_shape, 1, dir / (o.fixture + ".stds"));
  std::cout << "wrote " << (dir / (o.fixture + ".json")).string() << " and " << samples.size() << " samples\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  init_logging_from_env();
  CLI::App app{"stemc: spiking-network compiler and simulator"};
  app.require_subcommand(1);
  Options o;

  auto add_jobs = [&](CLI::App* cmd) { cmd->add_option("--jobs", o.jobs, "Worker threads")->check(CLI::PositiveNumber); };
  auto add_plan = [&](CLI::App* cmd) {
    cmd->add_option("--rot", o.rot, "Apply round-off truncation of this many bits to every hidden layer");
    cmd->add_option("--drlo", o.drlo, "Drop spikes of this many low-order bits in every hidden layer");
    cmd->add_flag("--strict-capacity", o.strict_capacity, "Fail when the network exceeds hardware limits");
  };

  auto* quantize = app.add_subcommand("quantize", "Calibrate and quantize a float model");
  quantize->add_option("model", o.model, "Float model manifest")->required()->check(CLI::ExistingFile);
  quantize->add_option("dataset", o.dataset, "Calibration dataset")->required()->check(CLI::ExistingFile);
  quantize->add_option("-o,--output", o.output, "Quantized model manifest")->required();
  quantize->add_option("--k", o.k, "Spike train length (activation bits)");
  quantize->add_option("--acc-bits", o.acc_bits, "Accumulator width");
  quantize->add_option("--bias-bits", o.bias_bits, "Bias storage width");
  add_jobs(quantize);

  auto* run = app.add_subcommand("run", "Run a quantized model over a dataset");
  run->add_option("model", o.model, "Quantized model manifest")->required()->check(CLI::ExistingFile);
  run->add_option("dataset", o.dataset, "Dataset")->required()->check(CLI::ExistingFile);
  run->add_option("--mode", o.mode, "oracle | sim | pipeline")
      ->check(CLI::IsMember({"oracle", "sim", "pipeline"}));
  run->add_option("-o,--output", o.output, "Prefix for <prefix>.json, <prefix>.csv, <prefix>_summary.csv");
  run->add_option("--name", o.run_name, "Run label used in reports");
  run->add_option("--dump-spikes", o.dump_spikes, "Directory for per-population spike dumps");
  run->add_option("--dump-count", o.dump_count, "Number of samples to dump");
  run->add_option("--activations", o.activations, "Oracle mode: write layer activations as CSV");
  run->add_flag("--include-io-layers", o.include_io, "Count SOPs of input and output layers");
  add_plan(run);
  add_jobs(run);

  auto* compare = app.add_subcommand("compare", "Check the spiking executor against the integer oracle");
  compare->add_option("model", o.model, "Quantized model manifest")->required()->check(CLI::ExistingFile);
  compare->add_option("dataset", o.dataset, "Dataset")->required()->check(CLI::ExistingFile);
  compare->add_option("-o,--output", o.output, "Per-sample diff CSV");
  add_plan(compare);
  add_jobs(compare);

  auto* tune = app.add_subcommand("tune-sparsity", "Search per-layer spike sparsification within an accuracy budget");
  tune->add_option("model", o.model, "Quantized model manifest")->required()->check(CLI::ExistingFile);
  tune->add_option("dataset", o.dataset, "Labelled calibration dataset")->required()->check(CLI::ExistingFile);
  tune->add_option("-o,--output", o.output, "Output manifest (default: overwrite the input)");
  tune->add_option("--budget", o.budget, "Tolerated top-1 accuracy drop as a fraction")->check(CLI::Range(0.0, 1.0));
  tune->add_flag("--include-io-layers", o.include_io, "Count SOPs of input and output layers");
  add_jobs(tune);

  auto* report = app.add_subcommand("report", "Consolidate run summaries");
  report->add_option("runs", o.runs, "Run summaries written by 'run -o'")->required()->check(CLI::ExistingFile);
  report->add_option("-o,--output", o.output, "Prefix for consolidated CSV files");

  auto* make = app.add_subcommand("make-fixture", "Write a bundled fixture model and a labelled dataset");
  make->add_option("name", o.fixture, "Fixture name")->required()->check(CLI::IsMember(fixtures::names()));
  make->add_option("dir", o.output, "Output directory")->required();
  make->add_option("--seed", o.seed, "Seed for weights and samples");
  make->add_option("--samples", o.samples, "Number of samples");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*quantize) return cmd_quantize(o);
    if (*run) return cmd_run(o);
    if (*compare) return cmd_compare(o);
    if (*tune) return cmd_tune(o);
    if (*report) return cmd_report(o);
    if (*make) return cmd_make_fixture(o);
  } catch (const Error& e) {
    std::cerr << "error: " << to_string(e.kind()) << ": " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
