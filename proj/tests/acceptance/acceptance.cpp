// Runs every acceptance criterion and prints one PASS/FAIL line per criterion.

#include <bit>
#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "oracles.hpp"
#include "stemc/fixtures.hpp"
#include "stemc/log.hpp"
#include "stemc/metrics.hpp"
#include "stemc/netsim.hpp"
#include "stemc/refengine.hpp"
#include "stemc/sparsity.hpp"
#include "stemc/stem.hpp"
#include "stemc/tuner.hpp"

using namespace stemc;

namespace {

const int kJobs = static_cast<int>(std::max(1U, std::thread::hardware_concurrency()));

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Fixture {
  std::string name;
  FloatModel model;
  std::vector<Sample> calibration;
  QuantizedNetwork qnet;
};

Fixture fixture(const std::string& name, std::size_t samples = 200) {
  Fixture f{name, fixtures::by_name(name, 1), {}, {}};
  f.calibration = fixtures::samples_for(name, f.model, samples, 7);
  f.qnet = build_quantized_network(f.model, calibrate(f.model, fixtures::inputs_of(f.calibration), QuantConfig{}, kJobs),
                                   QuantConfig{});
  return f;
}

std::vector<IntTensor> quantized_inputs(const QuantizedNetwork& qnet, const std::vector<Sample>& samples) {
  std::vector<IntTensor> out;
  for (const auto& s : samples) out.push_back(quantize_input(qnet, s.input));
  return out;
}

std::vector<IntTensor> outputs_of(const std::vector<RunResult>& results) {
  std::vector<IntTensor> out;
  for (const auto& r : results) out.push_back(r.output);
  return out;
}

std::uint64_t hidden_sops(const SpikingNetwork& snet, const std::vector<RunResult>& results) {
  std::uint64_t total = 0;
  for (const auto& r : results) total += total_sops(snet, r.layers, false);
  return total;
}

Outcome exact_equivalence() {
  std::size_t mismatched = 0, compared = 0, inputs = 0;
  for (const std::string name : {"mlp", "cnn", "residual"}) {
    const auto f = fixture(name);
    const auto samples = fixtures::samples_for(name, f.model, 500, 1234);
    const auto x = quantized_inputs(f.qnet, samples);
    const auto snet = compile(f.qnet);
    const auto results = run_batch(snet, x, kJobs);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const auto expected = int_forward(f.qnet, x[i], IntMode::Emulated).output();
      for (std::size_t j = 0; j < expected.size(); ++j) mismatched += expected[j] != results[i].output[j];
      compared += expected.size();
    }
    inputs += x.size();
  }
  return {mismatched == 0, std::to_string(mismatched) + " mismatched of " + std::to_string(compared) +
                               " logits over " + std::to_string(inputs) + " inputs on mlp, cnn, residual"};
}

Outcome encode_decode() {
  std::size_t failures = 0;
  for (std::int64_t q = -127; q <= 127; ++q) {
    failures += decode_train(encode_integer(q, 8, true), {8, true}) != q;
  }
  for (std::int64_t v = 0; v <= 127; ++v) {
    StemState state(1, 16);
    state.v[0] = v;
    std::vector<std::uint8_t> train(8);
    for (int step = 0; step < 8; ++step) generate_step(state, step, {8, false}, std::span(&train[step], 1));
    failures += decode_train(train, {8, false}) != v;
  }
  return {failures == 0, std::to_string(failures) + " failures over 255 signed codes and 128 generated values"};
}

Outcome worked_sparsity_example() {
  const auto spikes = [](std::int64_t v) {
    StemState state(1, 16);
    state.v[0] = v;
    std::string pattern;
    std::uint8_t bit = 0;
    for (int step = 0; step < 8; ++step) {
      generate_step(state, step, {8, false}, std::span(&bit, 1));
      pattern += bit ? '1' : '0';
    }
    return pattern;
  };
  const auto rounded = rot(83, 2, 8);
  const auto limited = drlo(rounded, 3);
  const auto before = spikes(83), after = spikes(limited);
  const auto count = [](const std::string& s) { return std::count(s.begin(), s.end(), '1'); };
  const bool ok = rounded == 84 && limited == 80 && count(before) == 4 && count(after) == 2 && before == "01010011" &&
                  after == "01010000";
  return {ok, "83 -> " + std::to_string(rounded) + " -> " + std::to_string(limited) + ", spikes " + before + " (" +
                  std::to_string(count(before)) + ") -> " + after + " (" + std::to_string(count(after)) + ")"};
}

Outcome scaled_integration() {
  std::uint64_t calibration_saturations = 0;
  for (const auto& name : fixtures::names()) {
    const auto f = fixture(name);
    const auto snet = compile(f.qnet);
    for (const auto& r : run_batch(snet, quantized_inputs(f.qnet, f.calibration), kJobs)) {
      calibration_saturations += r.total_saturations();
    }
  }
  auto wide = fixture("wide-fanin", 8);
  const auto scaled = run_sample(compile(wide.qnet), quantize_input(wide.qnet, wide.calibration[0].input));
  for (auto& l : wide.qnet.layers) {
    l.m0 = FixedMult::identity();
    l.m1 = l.m_hat;
  }
  const auto unscaled = run_sample(compile(wide.qnet), quantize_input(wide.qnet, wide.calibration[0].input));
  const bool ok = calibration_saturations == 0 && scaled.total_saturations() == 0 && unscaled.total_saturations() > 0;
  return {ok, std::to_string(calibration_saturations) + " saturations on " + std::to_string(fixtures::names().size()) +
                  " calibration sets; adversarial all-ones input: " + std::to_string(scaled.total_saturations()) +
                  " with M0, " + std::to_string(unscaled.total_saturations()) + " with M0 = 1"};
}

Outcome bias_calibration() {
  const auto f = fixture("bias-heavy", 64);
  const auto& layer = f.qnet.layers[0];
  const auto& bias = f.model.layers[0].bias;
  const auto accumulator_scale = quantize_bias(bias, layer.w.scale * layer.in.scale);
  const auto activation_scale = quantize_bias(bias, layer.out.scale);
  std::size_t over16 = 0, over8 = 0;
  for (auto b : accumulator_scale) over16 += b > 32767 || b < -32768;
  for (auto b : activation_scale) over8 += b > 127 || b < -128;
  const bool ok = over16 >= 1 && over8 == 0 && layer.bias_scheme == BiasScheme::ActivationScale;
  return {ok, "Sb=SwSx: " + std::to_string(over16) + " of " + std::to_string(bias.size()) +
                  " biases exceed 16 bits; Sb=Sa: " + std::to_string(over8) + " exceed 8 bits; chosen scheme " +
                  std::string(to_string(layer.bias_scheme))};
}

Outcome pipeline() {
  struct Case {
    int layers, k;
    std::size_t samples;
  };
  bool ok = true;
  std::string detail;
  for (const Case c : {Case{2, 8, 1}, Case{2, 8, 5}, Case{4, 8, 16}}) {
    const auto f = fixture("mlp" + std::to_string(c.layers), 64);
    const auto snet = compile(f.qnet);
    const auto samples = fixtures::samples_for(f.name, f.model, c.samples, 99);
    const auto x = quantized_inputs(f.qnet, samples);
    const auto piped = run_pipeline(snet, x);
    const auto expected = static_cast<std::size_t>(c.k) * (static_cast<std::size_t>(c.layers) + c.samples);
    bool same = snet.depth_count() == c.layers && snet.k == c.k;
    for (std::size_t i = 0; i < x.size(); ++i) same = same && piped.samples[i].output == run_sample(snet, x[i]).output;
    ok = ok && same && piped.total_steps == expected;
    detail += (detail.empty() ? "" : "; ") + std::string("(L,K,S)=(") + std::to_string(c.layers) + "," +
              std::to_string(c.k) + "," + std::to_string(c.samples) + "): " + std::to_string(piped.total_steps) +
              "/" + std::to_string(expected) + " steps" + (same ? "" : ", outputs differ");
  }
  return {ok, detail};
}

Outcome sparsity_trends() {
  const auto f = fixture("cnn", 200);
  const auto x = quantized_inputs(f.qnet, f.calibration);
  const auto baseline_net = compile(f.qnet);
  const auto baseline = run_batch(baseline_net, x, kJobs);
  const auto base_sops = hidden_sops(baseline_net, baseline);
  const double base_acc = top1_accuracy(outputs_of(baseline), f.calibration);

  const auto rot_plan = uniform_plan(f.qnet, 1, 0);
  const auto rot_net = compile(f.qnet, &rot_plan);
  const auto rot_sops = hidden_sops(rot_net, run_batch(rot_net, x, kJobs));
  const double rot_cut = 1.0 - static_cast<double>(rot_sops) / static_cast<double>(base_sops);

  TuneOptions options;
  options.budget = 0.015;
  options.jobs = kJobs;
  const auto tuned = tune_hybrid(f.qnet, f.calibration, options);
  const auto tuned_net = compile(f.qnet, &tuned.plan);
  const auto tuned_results = run_batch(tuned_net, x, kJobs);
  const auto tuned_sops = hidden_sops(tuned_net, tuned_results);
  const double tuned_cut = 1.0 - static_cast<double>(tuned_sops) / static_cast<double>(base_sops);
  const double drop = base_acc - top1_accuracy(outputs_of(tuned_results), f.calibration);

  const bool ok = rot_cut >= 0.10 && tuned_cut >= 0.05 && drop <= options.budget + 1e-12;
  char buf[256];
  std::snprintf(buf, sizeof buf, "RoT(1) cuts SOPs by %.1f%%; tuned plan cuts SOPs by %.1f%% with accuracy drop %.2f%% "
                "(baseline %.1f%%, 200 samples)", 100 * rot_cut, 100 * tuned_cut, 100 * drop, 100 * base_acc);
  return {ok, buf};
}

Outcome energy_accounting() {
  double worst = 0.0;
  std::size_t eligible = 0, below = 0;
  for (const auto& name : fixtures::names()) {
    const auto f = fixture(name, 50);
    const auto snet = compile(f.qnet);
    const auto results = run_batch(snet, quantized_inputs(f.qnet, f.calibration), kJobs);
    for (bool include_io : {false, true}) {
      const auto run = summarize(name, snet, f.qnet, results, 0, std::nullopt, include_io);
      std::ostringstream csv;
      write_summary_csv(csv, std::span(&run, 1));
      std::string line = csv.str().substr(csv.str().find('\n') + 1);
      std::vector<std::string> cells;
      std::stringstream row(line);
      for (std::string cell; std::getline(row, cell, ',');) cells.push_back(cell);
      const double reported = std::stod(cells.at(8));
      const double expected = (0.03 * run.sops_per_sample()) / (0.23 * static_cast<double>(run.macs));
      worst = std::max(worst, std::abs(reported - expected));
      if (run.sops_per_sample() < 7.67 * static_cast<double>(run.macs)) {
        ++eligible;
        const auto e = run.energy();
        below += e.sdann_uj < e.ann_uj;
      }
    }
  }
  const bool ok = worst <= 5e-7 + 1e-12 && below == eligible && eligible > 0;
  char buf[200];
  std::snprintf(buf, sizeof buf, "ratio column within %.1e of 0.03*SOPs/(0.23*MACs); SDANN < ANN energy on %zu of %zu "
                "eligible fixture configurations", worst, below, eligible);
  return {ok, buf};
}

Outcome fixed_point_exactness() {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::int64_t> mantissa(std::int64_t{1} << 30, (std::int64_t{1} << 31) - 1);
  std::uniform_int_distribution<int> shift(0, FixedMult::kMaxShift);
  std::uniform_int_distribution<int> bits(0, 31);
  std::size_t mismatches = 0;
  const std::size_t trials = 1'000'000;
  for (std::size_t i = 0; i < trials; ++i) {
    const auto sign = (rng() & 1) ? -1 : 1;
    const FixedMult m{static_cast<std::int32_t>(sign * mantissa(rng)), shift(rng)};
    const std::int64_t limit = std::int64_t{1} << bits(rng);
    std::int64_t x = static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(limit));
    if (rng() & 1) x = -x;
    mismatches += apply(m, x) != testing::reference_apply(m, x);
  }
  return {mismatches == 0, std::to_string(mismatches) + " mismatches in " + std::to_string(trials) + " random products"};
}

}  // namespace

int main() {
  init_logging_from_env();
  struct Criterion {
    const char* name;
    double limit_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {"exact equivalence of spiking and integer execution", 60, exact_equivalence},
      {"spike train encode/decode roundtrip", 1, encode_decode},
      {"round-off and low-order reduction worked example", 1, worked_sparsity_example},
      {"scaled integration avoids saturation", 10, scaled_integration},
      {"bias calibration", 1, bias_calibration},
      {"layer pipelining", 30, pipeline},
      {"sparsity trends", 120, sparsity_trends},
      {"energy accounting", 1, energy_accounting},
      {"fixed-point exactness", 10, fixed_point_exactness},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = seconds < criteria[i].limit_s;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::printf("%s criterion %zu (%s): %s [%.2f s, limit %.0f s]\n", pass ? "PASS" : "FAIL", i + 1, criteria[i].name,
                o.detail.c_str(), seconds, criteria[i].limit_s);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
