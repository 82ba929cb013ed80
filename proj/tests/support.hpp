#pragma once

// Shared helpers for the test binaries: hand-built quantized networks and
// scratch directories.

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "stemc/quantizer.hpp"

namespace stemc::testing {

/// One fully-connected layer with explicit integers. M0 = 1, M1 = M-hat,
/// unit scales everywhere and the bias added after requantization.
inline QuantizedNetwork single_fc(int in, int out, std::vector<std::int8_t> weights, double m_hat,
                                  std::vector<std::int32_t> bias = {}, Activation act = Activation::Relu) {
  QuantizedNetwork q;
  q.name = "single-fc";
  q.input_shape = {in};
  QuantizedLayer l;
  l.spec.name = "fc";
  l.spec.kind = LayerKind::FullyConnected;
  l.spec.activation = act;
  l.spec.inputs = {"input"};
  l.spec.in_features = in;
  l.spec.out_features = out;
  l.weights = Tensor<std::int8_t>({out, in}, std::move(weights));
  l.bias = std::move(bias);
  l.bias_scheme = BiasScheme::ActivationScale;
  l.m_hat = FixedMult::from_real(m_hat);
  l.m0 = FixedMult::identity();
  l.m1 = l.m_hat;
  l.i_max = 1;
  q.layers.push_back(std::move(l));
  std::vector<LayerSpec> specs{q.layers[0].spec};
  resolve_graph(q.input_shape, specs);
  q.layers[0].spec = specs[0];
  validate(q);
  return q;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("stemc_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Random integers in [lo, hi] with a fixed seed.
inline std::vector<std::int32_t> random_ints(std::mt19937_64& rng, std::size_t count, int lo, int hi) {
  std::uniform_int_distribution<int> dist(lo, hi);
  std::vector<std::int32_t> values(count);
  for (auto& v : values) v = dist(rng);
  return values;
}

}  // namespace stemc::testing

namespace stemc::testing {

struct FcLayer {
  int out = 0;
  std::vector<std::int8_t> weights;
  double m_hat = 1.0;
  Activation act = Activation::Relu;
};

/// Chain of fully-connected layers "l0", "l1", ... with explicit integers and
/// unit input scale, M0 = 1.
inline QuantizedNetwork fc_chain(int inputs, const std::vector<FcLayer>& layers) {
  QuantizedNetwork q;
  q.name = "chain";
  q.input_shape = {inputs};
  q.input = QuantParams::symmetric(1.0, 8);
  int in = inputs;
  std::vector<LayerSpec> specs;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    QuantizedLayer l;
    l.spec.name = "l" + std::to_string(i);
    l.spec.kind = LayerKind::FullyConnected;
    l.spec.activation = layers[i].act;
    l.spec.inputs = {i == 0 ? std::string("input") : "l" + std::to_string(i - 1)};
    l.spec.in_features = in;
    l.spec.out_features = layers[i].out;
    l.weights = Tensor<std::int8_t>({layers[i].out, in}, layers[i].weights);
    l.bias_scheme = BiasScheme::ActivationScale;
    l.in = l.out = QuantParams::symmetric(1.0, 8);
    l.m_hat = FixedMult::from_real(layers[i].m_hat);
    l.m0 = FixedMult::identity();
    l.m1 = l.m_hat;
    l.i_max = 1;
    specs.push_back(l.spec);
    q.layers.push_back(std::move(l));
    in = layers[i].out;
  }
  resolve_graph(q.input_shape, specs);
  for (std::size_t i = 0; i < specs.size(); ++i) q.layers[i].spec = specs[i];
  validate(q);
  return q;
}

}  // namespace stemc::testing
