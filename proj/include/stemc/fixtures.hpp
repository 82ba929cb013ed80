#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "stemc/model.hpp"

namespace stemc::fixtures {

/// Uniform doubles from mt19937 bits, identical on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(static_cast<std::mt19937::result_type>(seed)) {}

  double uniform(double lo, double hi) {
    const double unit = static_cast<double>(engine_() >> 8) / static_cast<double>(1U << 24);
    return lo + (hi - lo) * unit;
  }
  std::uint32_t next() { return engine_(); }

 private:
  std::mt19937 engine_;
};

FloatLayer dense(Rng& rng, const std::string& name, const std::string& input, int in, int out, Activation act);
FloatLayer conv(Rng& rng, const std::string& name, const std::string& input, int in_ch, int out_ch, int kernel,
                int stride, int padding, Activation act);

/// 64 -> 32 -> 16 -> 10.
FloatModel mlp(std::uint64_t seed = 1);
/// Fully-connected chain with `depth` layers of `width` neurons (10 outputs).
FloatModel deep_mlp(int depth, std::uint64_t seed = 4, int inputs = 32, int width = 24);
/// [1,8,8] -> conv 8x3x3 pad 1 -> conv 8x3x3 stride 2 pad 1 -> flatten -> 32 -> 10.
FloatModel cnn(std::uint64_t seed = 2);
/// [1,8,8] -> conv 4x3x3 pad 1 -> avgpool 2 -> flatten -> 10.
FloatModel pool_cnn(std::uint64_t seed = 5);
/// 32 -> 16, then a 16 -> 16 branch added back onto it, then 16 -> 10.
FloatModel residual(std::uint64_t seed = 3);
/// 512 inputs, every weight at full scale: the worst case for accumulation.
FloatModel wide_fanin();
/// Small activations and weights with biases far above their product scale.
FloatModel bias_heavy();

/// Names accepted by `by_name`.
std::vector<std::string> names();
FloatModel by_name(const std::string& name, std::uint64_t seed);

/// Inputs drawn uniformly from [lo, hi] (the first one is all zeros when
/// `include_zero`), labelled with the float model's argmax.
std::vector<Sample> labelled_samples(const FloatModel& model, std::size_t count, std::uint64_t seed, double lo = -1.0,
                                     double hi = 1.0, bool include_zero = false);

/// Sample set suited to `by_name(name)`.
std::vector<Sample> samples_for(const std::string& name, const FloatModel& model, std::size_t count,
                                std::uint64_t seed);

std::vector<FloatTensor> inputs_of(const std::vector<Sample>& samples);

}  // namespace stemc::fixtures
