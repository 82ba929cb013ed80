#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "stemc/model.hpp"
#include "stemc/quantizer.hpp"
#include "stemc/sparsity.hpp"

namespace stemc {

struct TuneOptions {
  double budget = 0.015;  // tolerated top-1 accuracy drop, as a fraction
  int max_rot_bits = 3;
  int max_drlo_bits = 4;
  bool include_io = false;  // count SOPs of input/output populations
  int jobs = 1;
};

struct TuneResult {
  SparsityPlan plan;
  double baseline_accuracy = 0.0;
  double accuracy = 0.0;
  std::uint64_t baseline_sops = 0;  // summed over the calibration set
  std::uint64_t sops = 0;

  double sop_reduction() const;
};

/// Greedy front-to-back search over (rot, drlo) per sparsifiable layer. For
/// each layer the candidates are tried from fewest SOPs up; the first whose
/// top-1 accuracy stays within the budget of the unsparsified network is
/// kept. Accuracy and SOPs are measured on the emulated integer path, which
/// the spiking executor reproduces exactly.
TuneResult tune_hybrid(const QuantizedNetwork& qnet, std::span<const Sample> calibration,
                       const TuneOptions& options = {});

/// Fraction of samples whose argmax output equals label[0].
double top1_accuracy(std::span<const IntTensor> outputs, std::span<const Sample> samples);

}  // namespace stemc
