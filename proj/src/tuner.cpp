#include "stemc/tuner.hpp"

#include <algorithm>
#include <tuple>

#include <spdlog/spdlog.h>

#include "stemc/metrics.hpp"
#include "stemc/netsim.hpp"
#include "stemc/parallel.hpp"
#include "stemc/refengine.hpp"

namespace stemc {

double TuneResult::sop_reduction() const {
  return baseline_sops == 0 ? 0.0 : 1.0 - static_cast<double>(sops) / static_cast<double>(baseline_sops);
}

double top1_accuracy(std::span<const IntTensor> outputs, std::span<const Sample> samples) {
  if (samples.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& label = samples[i].label;
    if (!label.empty() && argmax_decode(outputs[i].data) == static_cast<std::size_t>(label[0])) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(samples.size());
}

namespace {

struct Score {
  double accuracy = 0.0;
  std::uint64_t sops = 0;
};

class Evaluator {
 public:
  Evaluator(const QuantizedNetwork& qnet, std::span<const Sample> samples, const TuneOptions& options)
      : qnet_(qnet), samples_(samples), options_(options), snet_(compile(qnet)), counter_(snet_) {}

  std::vector<ActivationRecord> forward(std::span<const ActivationRecord> base, std::size_t first_layer,
                                        const SparsityPlan& plan) const {
    std::vector<ActivationRecord> records(samples_.size());
    parallel_for(samples_.size(), options_.jobs, [&](std::size_t i) {
      if (base.empty()) {
        records[i] = int_forward(qnet_, quantize_input(qnet_, samples_[i].input), IntMode::Emulated, &plan);
      } else {
        records[i] = base[i];
        int_forward_from(qnet_, records[i], first_layer, IntMode::Emulated, &plan);
      }
    });
    return records;
  }

  Score score(std::span<const ActivationRecord> records) const {
    std::vector<IntTensor> outputs;
    outputs.reserve(records.size());
    Score s;
    for (const auto& r : records) {
      outputs.push_back(r.output());
      const auto per_population = counter_.from_activations(qnet_, r);
      s.sops += counter_.total(per_population, options_.include_io);
    }
    s.accuracy = top1_accuracy(outputs, samples_);
    return s;
  }

 private:
  const QuantizedNetwork& qnet_;
  std::span<const Sample> samples_;
  const TuneOptions& options_;
  SpikingNetwork snet_;
  SopCounter counter_;
};

}  // namespace

TuneResult tune_hybrid(const QuantizedNetwork& qnet, std::span<const Sample> calibration,
                       const TuneOptions& options) {
  const Evaluator eval(qnet, calibration, options);
  TuneResult result;
  result.plan = identity_plan(qnet);
  auto records = eval.forward({}, 0, result.plan);
  const Score baseline = eval.score(records);
  result.baseline_accuracy = result.accuracy = baseline.accuracy;
  result.baseline_sops = result.sops = baseline.sops;
  const int max_rot = std::min(options.max_rot_bits, qnet.k() - 1);
  const int max_drlo = std::min(options.max_drlo_bits, qnet.k() - 1);

  for (auto& entry : result.plan.entries) {
    const auto layer = static_cast<std::size_t>(qnet.index_of(entry.layer));
    struct Candidate {
      int rot = 0;
      int drlo = 0;
      Score score;
    };
    std::vector<Candidate> candidates;
    for (int r = 0; r <= max_rot; ++r) {
      for (int d = 0; d <= max_drlo; ++d) {
        SparsityPlan trial = result.plan;
        trial.at(entry.layer) = {entry.layer, r, d};
        candidates.push_back({r, d, eval.score(eval.forward(records, layer, trial))});
      }
    }
    std::stable_sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
      return std::tie(a.score.sops, a.rot, a.drlo) < std::tie(b.score.sops, b.rot, b.drlo);
    });
    for (const auto& c : candidates) {
      if (baseline.accuracy - c.score.accuracy <= options.budget + 1e-12) {
        entry.rot_bits = c.rot;
        entry.drlo_bits = c.drlo;
        result.accuracy = c.score.accuracy;
        result.sops = c.score.sops;
        break;
      }
    }
    spdlog::info("tune {}: rot={} drlo={} accuracy={:.4f} sops={}", entry.layer, entry.rot_bits, entry.drlo_bits,
                 result.accuracy, result.sops);
    if (!entry.is_identity()) records = eval.forward(records, layer, result.plan);
  }
  return result;
}

}  // namespace stemc
