#include "stemc/fixtures.hpp"

#include <cmath>

#include "stemc/error.hpp"
#include "stemc/refengine.hpp"

namespace stemc::fixtures {

namespace {

LayerSpec base_spec(const std::string& name, LayerKind kind, const std::string& input, Activation act) {
  LayerSpec s;
  s.name = name;
  s.kind = kind;
  s.activation = act;
  s.inputs = {input};
  return s;
}

void fill(Rng& rng, std::vector<float>& values, double limit) {
  for (auto& v : values) v = static_cast<float>(rng.uniform(-limit, limit));
}

FloatLayer flatten(const std::string& name, const std::string& input) {
  return {base_spec(name, LayerKind::Flatten, input, Activation::None), {}, {}};
}

FloatModel finish(FloatModel model) {
  validate(model);
  return model;
}

}  // namespace

FloatLayer dense(Rng& rng, const std::string& name, const std::string& input, int in, int out, Activation act) {
  FloatLayer l{base_spec(name, LayerKind::FullyConnected, input, act), FloatTensor({out, in}), std::vector<float>(out)};
  l.spec.in_features = in;
  l.spec.out_features = out;
  fill(rng, l.weights.data, std::sqrt(6.0 / in));
  fill(rng, l.bias, 0.1);
  return l;
}

FloatLayer conv(Rng& rng, const std::string& name, const std::string& input, int in_ch, int out_ch, int kernel,
                int stride, int padding, Activation act) {
  FloatLayer l{base_spec(name, LayerKind::Conv2d, input, act), FloatTensor({out_ch, in_ch, kernel, kernel}),
               std::vector<float>(out_ch)};
  l.spec.in_channels = in_ch;
  l.spec.out_channels = out_ch;
  l.spec.kernel = kernel;
  l.spec.stride = stride;
  l.spec.padding = padding;
  fill(rng, l.weights.data, std::sqrt(6.0 / (in_ch * kernel * kernel)));
  fill(rng, l.bias, 0.1);
  return l;
}

FloatModel mlp(std::uint64_t seed) {
  Rng rng(seed);
  FloatModel m{"mlp", {64}, {}};
  m.layers.push_back(dense(rng, "fc1", "input", 64, 32, Activation::Relu));
  m.layers.push_back(dense(rng, "fc2", "fc1", 32, 16, Activation::Relu));
  m.layers.push_back(dense(rng, "fc3", "fc2", 16, 10, Activation::None));
  return finish(std::move(m));
}

FloatModel deep_mlp(int depth, std::uint64_t seed, int inputs, int width) {
  if (depth < 1) throw Error(ErrorKind::Config, "depth must be at least 1");
  Rng rng(seed);
  FloatModel m{"mlp" + std::to_string(depth), {inputs}, {}};
  std::string prev = "input";
  int in = inputs;
  for (int d = 1; d <= depth; ++d) {
    const bool last = d == depth;
    const std::string name = "fc" + std::to_string(d);
    m.layers.push_back(dense(rng, name, prev, in, last ? 10 : width, last ? Activation::None : Activation::Relu));
    prev = name;
    in = width;
  }
  return finish(std::move(m));
}

FloatModel cnn(std::uint64_t seed) {
  Rng rng(seed);
  FloatModel m{"cnn", {1, 8, 8}, {}};
  m.layers.push_back(conv(rng, "conv1", "input", 1, 8, 3, 1, 1, Activation::Relu));
  m.layers.push_back(conv(rng, "conv2", "conv1", 8, 8, 3, 2, 1, Activation::Relu));
  m.layers.push_back(flatten("flat", "conv2"));
  m.layers.push_back(dense(rng, "fc1", "flat", 128, 32, Activation::Relu));
  m.layers.push_back(dense(rng, "fc2", "fc1", 32, 10, Activation::None));
  return finish(std::move(m));
}

FloatModel pool_cnn(std::uint64_t seed) {
  Rng rng(seed);
  FloatModel m{"pool-cnn", {1, 8, 8}, {}};
  m.layers.push_back(conv(rng, "conv1", "input", 1, 4, 3, 1, 1, Activation::Relu));
  FloatLayer pool{base_spec("pool", LayerKind::AvgPool2d, "conv1", Activation::Relu), {}, {}};
  pool.spec.kernel = 2;
  pool.spec.stride = 2;
  m.layers.push_back(pool);
  m.layers.push_back(flatten("flat", "pool"));
  m.layers.push_back(dense(rng, "fc", "flat", 64, 10, Activation::None));
  return finish(std::move(m));
}

FloatModel residual(std::uint64_t seed) {
  Rng rng(seed);
  FloatModel m{"residual", {32}, {}};
  m.layers.push_back(dense(rng, "stem", "input", 32, 16, Activation::Relu));
  m.layers.push_back(dense(rng, "branch", "stem", 16, 16, Activation::Relu));
  FloatLayer add{base_spec("add", LayerKind::ResidualAdd, "stem", Activation::Relu), {}, {}};
  add.spec.inputs = {"stem", "branch"};
  m.layers.push_back(add);
  m.layers.push_back(dense(rng, "head", "add", 16, 10, Activation::None));
  return finish(std::move(m));
}

FloatModel wide_fanin() {
  FloatModel m{"wide-fanin", {512}, {}};
  FloatLayer l{base_spec("fc", LayerKind::FullyConnected, "input", Activation::None), FloatTensor({4, 512}),
               std::vector<float>(4, 0.0f)};
  l.spec.in_features = 512;
  l.spec.out_features = 4;
  std::fill(l.weights.data.begin(), l.weights.data.end(), 1.0f);
  m.layers.push_back(l);
  return finish(std::move(m));
}

FloatModel bias_heavy() {
  Rng rng(6);
  FloatModel m{"bias-heavy", {16}, {}};
  FloatLayer l = dense(rng, "fc", "input", 16, 8, Activation::None);
  fill(rng, l.weights.data, 0.2);
  l.weights.data[0] = 0.2f;
  fill(rng, l.bias, 2.5);
  l.bias[0] = 2.5f;
  m.layers.push_back(l);
  return finish(std::move(m));
}

std::vector<std::string> names() {
  return {"mlp", "mlp2", "mlp4", "cnn", "pool-cnn", "residual", "wide-fanin", "bias-heavy"};
}

FloatModel by_name(const std::string& name, std::uint64_t seed) {
  if (name == "mlp") return mlp(seed);
  if (name == "mlp2") return deep_mlp(2, seed);
  if (name == "mlp4") return deep_mlp(4, seed);
  if (name == "cnn") return cnn(seed);
  if (name == "pool-cnn") return pool_cnn(seed);
  if (name == "residual") return residual(seed);
  if (name == "wide-fanin") return wide_fanin();
  if (name == "bias-heavy") return bias_heavy();
  throw Error(ErrorKind::Config, "unknown fixture '" + name + "'");
}

std::vector<Sample> labelled_samples(const FloatModel& model, std::size_t count, std::uint64_t seed, double lo,
                                     double hi, bool include_zero) {
  Rng rng(seed);
  std::vector<Sample> samples;
  samples.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Sample s;
    s.input = FloatTensor(model.input_shape);
    if (!(include_zero && i == 0)) {
      for (auto& v : s.input.data) v = static_cast<float>(rng.uniform(lo, hi));
    }
    const auto out = float_forward(model, s.input).output();
    std::vector<double> logits(out.data.begin(), out.data.end());
    s.label = {static_cast<std::int32_t>(argmax_decode(logits))};
    samples.push_back(std::move(s));
  }
  return samples;
}

std::vector<Sample> samples_for(const std::string& name, const FloatModel& model, std::size_t count,
                                std::uint64_t seed) {
  if (name == "wide-fanin") return labelled_samples(model, count, seed, 1.0, 1.0);
  if (name == "bias-heavy") return labelled_samples(model, count, seed, -0.5, 0.5, true);
  return labelled_samples(model, count, seed);
}

std::vector<FloatTensor> inputs_of(const std::vector<Sample>& samples) {
  std::vector<FloatTensor> inputs;
  inputs.reserve(samples.size());
  for (const auto& s : samples) inputs.push_back(s.input);
  return inputs;
}

}  // namespace stemc::fixtures
