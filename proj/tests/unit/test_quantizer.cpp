#include <doctest.h>

#include <cmath>
#include <random>

#include "stemc/error.hpp"
#include "stemc/fixtures.hpp"
#include "stemc/quantizer.hpp"
#include "stemc/refengine.hpp"

using namespace stemc;

namespace {

FloatLayer fc_layer(const std::string& name, const std::string& input, int in, int out, std::vector<float> w,
                    std::vector<float> b, Activation act) {
  FloatLayer l;
  l.spec.name = name;
  l.spec.kind = LayerKind::FullyConnected;
  l.spec.activation = act;
  l.spec.inputs = {input};
  l.spec.in_features = in;
  l.spec.out_features = out;
  l.weights = FloatTensor({out, in}, std::move(w));
  l.bias = std::move(b);
  return l;
}

}  // namespace

TEST_CASE("derive_scale uses the larger magnitude with zero point 0") {
  CHECK(derive_scale(0.5, -0.5, 127, -127).scale == doctest::Approx(0.0039370).epsilon(1e-6));
  CHECK(derive_scale(0.5, -0.5, 127, -127).scale == 0.5 / 127);
  CHECK(derive_scale(1.0, 0.0, 127, -127).scale == 1.0 / 127);
  CHECK(derive_scale(0.2, -0.2, 127, -127).scale == 0.2 / 127);
  CHECK(derive_scale(0.1, -0.3, 127, -127).scale == 0.3 / 127);
  CHECK(derive_scale(0.1, -0.3, 127, -127).zero_point == 0);
  CHECK(derive_scale(0.0, 0.0, 127, -127).scale == kScaleFloor);
}

TEST_CASE("quantize_tensor rounds and clamps") {
  const auto p = derive_scale(0.5, -0.5, 127, -127);
  const std::vector<float> values{0.0F, 0.5F, 0.75F, -0.75F};
  const auto q = quantize_tensor(values, p);
  CHECK(q.values == std::vector<std::int32_t>{0, 127, 127, -127});
  CHECK(q.clamped == 2);
  bool clamped = true;
  CHECK(quantize_value(0.0, QuantParams{1e-3, 0, -127, 127}, &clamped) == 0);
  CHECK_FALSE(clamped);
}

TEST_CASE("dequantize") {
  CHECK(dequantize(0, QuantParams{0.37, 0, -127, 127}) == 0.0);
  CHECK(dequantize(50, QuantParams{0.01, 0, -127, 127}) == doctest::Approx(0.5));
}

TEST_CASE("quantization error is at most half a step over the whole code range") {
  const QuantParams p = derive_scale(1.3, -1.3, 127, -127);
  for (int q = -127; q <= 127; ++q) {
    for (double offset : {-0.4999, -0.25, 0.0, 0.25, 0.4999}) {
      const double r = (q + offset) * p.scale;
      const auto back = quantize_value(r, p);
      REQUIRE(back == q);
      REQUIRE(std::abs(dequantize(back, p) - r) <= p.scale / 2);
    }
  }
}

TEST_CASE("calibrate_bias switches scheme when the accumulator scale overflows the bias width") {
  const double s_x = 0.5 / 127, s_w = 0.2 / 127;
  const std::vector<float> zeros(8, 0.0F);
  CHECK(calibrate_bias(zeros, s_w, s_x, 16) == BiasScheme::WeightInputScale);
  const std::vector<float> big{2.5F, -2.5F, 1.0F, 0.0F};
  CHECK(calibrate_bias(big, s_w, s_x, 16) == BiasScheme::ActivationScale);
  CHECK(calibrate_bias(big, s_w, s_x, 32) == BiasScheme::WeightInputScale);
  // 2.5 / (s_w * s_x) = 2.5 * 127^2 / 0.1
  CHECK(quantize_bias(big, s_w * s_x)[0] == std::llround(2.5 * 127.0 * 127.0 / 0.1));
}

TEST_CASE("integration scale split") {
  CHECK(integration_scale(2 * 32767, 16) == 0.5);
  CHECK(FixedMult::from_real(integration_scale(2 * 32767, 16)) == FixedMult::from_real(0.5));
  CHECK(FixedMult::from_real(1.0 / 0.5) == FixedMult::from_real(2.0));
  CHECK(safe_integration_scale(1000, 16, 8) == 1.0);
  CHECK(safe_integration_scale(32767, 16, 8) == 1.0);
  CHECK(safe_integration_scale(2 * 32767, 16, 8) == doctest::Approx((32767.0 - 5.0) / 65534.0));
  CHECK(safe_integration_scale(2 * 32767, 16, 8) < integration_scale(2 * 32767, 16));
}

TEST_CASE("I_max of a single sample is the largest partial sum") {
  // Weight bits 3 and K = 4 make the integers come out as W = [2, -3], X = [5, 7].
  FloatModel model{"tiny", {2}, {fc_layer("fc", "input", 2, 1, {2.0F / 3.0F, -1.0F}, {0.0F}, Activation::None)}};
  validate(model);
  QuantConfig config;
  config.activation_bits = 4;
  config.weight_bits = 3;
  const std::vector<FloatTensor> samples{FloatTensor({2}, {0.5F, 0.7F})};
  const auto stats = calibrate(model, samples, config);
  const auto qnet = build_quantized_network(model, stats, config);
  CHECK(qnet.layers[0].weights.data == std::vector<std::int8_t>{2, -3});
  CHECK(quantize_input(qnet, samples[0]).data == std::vector<std::int32_t>{5, 7});
  CHECK(stats.i_max[0] == 11);
}

TEST_CASE("constant-zero calibration set keeps the I_max floor and bias-driven ranges") {
  FloatModel model{"zero", {3}, {}};
  model.layers.push_back(fc_layer("a", "input", 3, 2, {0.1F, 0.2F, 0.3F, -0.1F, -0.2F, -0.3F}, {0.5F, 0.25F},
                                  Activation::Relu));
  model.layers.push_back(fc_layer("b", "a", 2, 1, {1.0F, -1.0F}, {0.0F}, Activation::None));
  validate(model);
  const std::vector<FloatTensor> samples(4, FloatTensor({3}));
  const auto stats = calibrate(model, samples, QuantConfig{});
  CHECK(stats.outputs[0].r_max == doctest::Approx(0.5));
  CHECK(stats.outputs[1].r_max == doctest::Approx(0.25));
  for (auto i : stats.i_max) CHECK(i >= 1);
  const auto qnet = build_quantized_network(model, stats, QuantConfig{});
  CHECK(qnet.input.scale == kScaleFloor);
}

TEST_CASE("first-layer I_max equals the per-sample maximum and grows with the set") {
  const FloatModel model = fixtures::mlp(7);
  auto samples = fixtures::inputs_of(fixtures::labelled_samples(model, 100, 3));
  // Pin the input range so every subset shares the same input scale.
  samples[0].data.assign(samples[0].size(), 1.0F);
  const QuantConfig config;
  const auto full = calibrate(model, samples, config);
  const auto qnet = build_quantized_network(model, full, config);
  const auto signs = input_signs(qnet, qnet.layers[0]);
  std::int64_t brute = 0;
  for (const auto& s : samples) {
    const IntTensor x = quantize_input(qnet, s);
    const IntTensor* in[] = {&x};
    brute = std::max(brute, max_partial_sum(qnet.layers[0], in, signs.span(), config.activation_bits));
  }
  CHECK(full.i_max[0] == brute);

  const std::vector<FloatTensor> half(samples.begin(), samples.begin() + 50);
  const auto subset = calibrate(model, half, config);
  CHECK(subset.i_max[0] <= full.i_max[0]);
}

TEST_CASE("calibrated networks do not saturate on their calibration set") {
  for (const std::string name : {"mlp", "cnn", "residual", "pool-cnn", "wide-fanin"}) {
    CAPTURE(name);
    const FloatModel model = fixtures::by_name(name, 1);
    const auto inputs = fixtures::inputs_of(fixtures::samples_for(name, model, 64, 9));
    const auto stats = calibrate(model, inputs, QuantConfig{});
    const auto qnet = build_quantized_network(model, stats, QuantConfig{});
    for (const auto& x : inputs) {
      REQUIRE(int_forward(qnet, quantize_input(qnet, x), IntMode::Emulated).saturation_count() == 0);
    }
  }
}

TEST_CASE("average pooling with unit weights reproduces the quantized mean") {
  FloatModel model{"pool", {1, 2, 2}, {}};
  FloatLayer pool;
  pool.spec.name = "pool";
  pool.spec.kind = LayerKind::AvgPool2d;
  pool.spec.inputs = {"input"};
  pool.spec.kernel = 2;
  pool.spec.stride = 2;
  model.layers.push_back(pool);
  validate(model);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<float> dist(0.0F, 1.0F);
  std::vector<FloatTensor> samples;
  for (int i = 0; i < 50; ++i) {
    FloatTensor x({1, 2, 2});
    for (auto& v : x.data) v = dist(rng);
    samples.push_back(x);
  }
  const auto stats = calibrate(model, samples, QuantConfig{});
  const auto qnet = build_quantized_network(model, stats, QuantConfig{});
  CHECK(qnet.layers[0].weights.data.empty());
  for (const auto& x : samples) {
    const IntTensor q = quantize_input(qnet, x);
    const double sum = q[0] + q[1] + q[2] + q[3];
    const double exact = sum * qnet.input.scale / (4.0 * qnet.layers[0].out.scale);
    const double frac = exact - std::floor(exact);
    if (std::abs(frac - 0.5) < 1e-6) continue;
    const auto out = int_forward(qnet, q, IntMode::Ideal).output();
    CHECK(out[0] == std::min<long long>(std::llround(exact), 127));
  }
}

TEST_CASE("residual branches share one scale") {
  const FloatModel model = fixtures::residual(3);
  const auto inputs = fixtures::inputs_of(fixtures::labelled_samples(model, 32, 1));
  const auto qnet = build_quantized_network(model, calibrate(model, inputs, QuantConfig{}), QuantConfig{});
  const auto& add = qnet.layers[static_cast<std::size_t>(qnet.index_of("add"))];
  const auto scale_of = [&](int id) { return qnet.layers[static_cast<std::size_t>(id)].out.scale; };
  CHECK(scale_of(add.spec.input_ids[0]) == scale_of(add.spec.input_ids[1]));
  CHECK(add.in.scale == scale_of(add.spec.input_ids[0]));
}

TEST_CASE("validate rejects inconsistent networks") {
  const FloatModel model = fixtures::mlp(2);
  const auto inputs = fixtures::inputs_of(fixtures::labelled_samples(model, 16, 1));
  const auto qnet = build_quantized_network(model, calibrate(model, inputs, QuantConfig{}), QuantConfig{});
  CHECK_NOTHROW(validate(qnet));

  auto bad = qnet;
  bad.layers[0].weights.data[0] = -128;
  CHECK_THROWS_AS(validate(bad), Error);

  bad = qnet;
  bad.layers[1].m1 = FixedMult::from_real(bad.layers[1].m1.value() * 1.01);
  CHECK_THROWS_AS(validate(bad), Error);

  bad = qnet;
  bad.layers[0].bias[0] = 1 << 20;
  CHECK_THROWS_AS(validate(bad), Error);

  bad = qnet;
  bad.config.activation_bits = 1;
  CHECK_THROWS_AS(validate(bad), Error);
}

TEST_CASE("config bounds") {
  QuantConfig c;
  CHECK_NOTHROW(c.validate());
  c.activation_bits = 17;
  CHECK_THROWS_AS(c.validate(), Error);
  c = QuantConfig{};
  c.acc_bits = 6;
  CHECK_THROWS_AS(c.validate(), Error);
}
