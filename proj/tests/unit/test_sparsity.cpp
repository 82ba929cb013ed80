#include <doctest.h>

#include <bit>

#include "stemc/error.hpp"
#include "stemc/fixtures.hpp"
#include "stemc/refengine.hpp"
#include "stemc/sparsity.hpp"
#include "stemc/stem.hpp"
#include "stemc/tuner.hpp"
#include "support.hpp"

using namespace stemc;

namespace {

int popcount8(std::int64_t v) { return std::popcount(static_cast<std::uint32_t>(v) & 0xFFu); }

std::vector<std::int8_t> eye(int n) {
  std::vector<std::int8_t> w(static_cast<std::size_t>(n * n), 0);
  for (int i = 0; i < n; ++i) w[static_cast<std::size_t>(i * n + i)] = 1;
  return w;
}

Sample pair(float a, float b, int label) { return {FloatTensor({2}, {a, b}), {label}}; }

}  // namespace

TEST_CASE("round-off truncation") {
  CHECK(rot(83, 2, 8) == 84);
  CHECK(rot(0, 3, 8) == 0);
  CHECK(rot(127, 1, 8) == 127);
  CHECK(rot(83, 0, 8) == 83);
  CHECK(rot(6, 2, 8) == 8);
  CHECK(rot(5, 2, 8) == 4);
}

TEST_CASE("dynamic reduction of low-order spikes") {
  CHECK(drlo(84, 3) == 80);
  CHECK(drlo(84, 0) == 84);
  CHECK(drlo(7, 3) == 0);
  CHECK(drlo(127, 4) == 112);
}

TEST_CASE("rot then drlo halves the spikes of 83") {
  const SparsityEntry entry{"l", 2, 3};
  const auto v = sparsify(83, &entry, 8);
  CHECK(v == 80);
  CHECK(popcount8(83) == 4);
  CHECK(popcount8(v) == 2);
  CHECK(sparsify(83, nullptr, 8) == 83);
}

TEST_CASE("suppression never adds spikes and rounding lands on the grid") {
  for (std::int64_t v = 0; v <= 127; ++v) {
    for (int d = 0; d < 8; ++d) REQUIRE(popcount8(drlo(v, d)) <= popcount8(v));
    for (int r = 0; r < 8; ++r) {
      const auto out = rot(v, r, 8);
      REQUIRE((out == 127 || out % (std::int64_t{1} << r) == 0));
      REQUIRE(out >= 0);
      REQUIRE(out <= 127);
    }
  }
}

TEST_CASE("plans cover the sparsifiable layers") {
  const auto q = testing::fc_chain(2, {{2, eye(2)}, {2, eye(2)}, {2, eye(2), 1.0, Activation::None}});
  const auto id = identity_plan(q);
  REQUIRE(id.entries.size() == 2);
  CHECK(id.entries[0].layer == "l0");
  CHECK(id.entries[1].layer == "l1");
  CHECK(id.is_identity());
  const auto u = uniform_plan(q, 1, 2);
  CHECK(u.entries[1] == SparsityEntry{"l1", 1, 2});
  CHECK_NOTHROW(validate_plan(u, q));

  SparsityPlan bad{{{"l2", 1, 0}}};
  CHECK_THROWS_AS(validate_plan(bad, q), Error);
  bad = SparsityPlan{{{"nope", 1, 0}}};
  CHECK_THROWS_AS(validate_plan(bad, q), Error);
  bad = SparsityPlan{{{"l0", 8, 0}}};
  CHECK_THROWS_AS(validate_plan(bad, q), Error);
  bad = SparsityPlan{{{"l0", 0, -1}}};
  CHECK_THROWS_AS(validate_plan(bad, q), Error);
}

TEST_CASE("with a zero budget the tuner keeps the identity when every candidate hurts") {
  // Identity layers pass the inputs through unchanged. Pairs (16j - 1, 16j)
  // tie under any rounding, pairs (16j, 16j + 1) tie under any suppression
  // and under rounding by more than one bit; ties decode to class 0.
  const auto q = testing::fc_chain(2, {{2, eye(2)}, {2, eye(2)}, {2, eye(2), 1.0, Activation::None}});
  std::vector<Sample> samples;
  for (int j = 1; j <= 7; ++j) {
    samples.push_back(pair(16.0F * j - 1.0F, 16.0F * j, 1));
    samples.push_back(pair(16.0F * j, 16.0F * j + 1.0F, 1));
  }
  TuneOptions options;
  options.budget = 0.0;
  const auto result = tune_hybrid(q, samples, options);
  CHECK(result.baseline_accuracy == 1.0);
  CHECK(result.accuracy == 1.0);
  CHECK(result.plan.is_identity());
  CHECK(result.sops == result.baseline_sops);

  options.budget = 1.0;
  const auto loose = tune_hybrid(q, samples, options);
  CHECK_FALSE(loose.plan.is_identity());
  CHECK(loose.sops < loose.baseline_sops);
}

TEST_CASE("with one sparsifiable layer the tuner picks the cheapest admissible candidate") {
  const FloatModel model = fixtures::deep_mlp(2, 11);
  const auto samples = fixtures::labelled_samples(model, 50, 4);
  const auto qnet = build_quantized_network(model, calibrate(model, fixtures::inputs_of(samples), QuantConfig{}),
                                            QuantConfig{});
  REQUIRE(identity_plan(qnet).entries.size() == 1);
  const std::string hidden = identity_plan(qnet).entries[0].layer;

  // Brute force: every SOP is one spike crossing one synapse, and every
  // fully-connected source fans out to all outputs of its consumer.
  auto evaluate = [&](int r, int d) {
    const SparsityPlan plan{{{hidden, r, d}}};
    std::size_t correct = 0;
    std::uint64_t sops = 0;
    for (const auto& s : samples) {
      const auto rec = int_forward(qnet, quantize_input(qnet, s.input), IntMode::Emulated, &plan);
      if (argmax_decode(rec.output().data) == static_cast<std::size_t>(s.label[0])) ++correct;
      for (std::size_t l = 0; l < qnet.layers.size(); ++l) {
        const auto& in = l == 0 ? rec.input : rec.layers[l - 1].output;
        for (auto v : in.data) sops += static_cast<std::uint64_t>(popcount8(v) * qnet.layers[l].spec.out_features);
      }
    }
    return std::pair{static_cast<double>(correct) / samples.size(), sops};
  };

  const auto [base_acc, base_sops] = evaluate(0, 0);
  for (double budget : {0.0, 0.02, 0.1}) {
    CAPTURE(budget);
    TuneOptions options;
    options.budget = budget;
    options.include_io = true;
    const auto result = tune_hybrid(qnet, samples, options);
    CHECK(result.baseline_accuracy == doctest::Approx(base_acc));
    CHECK(result.baseline_sops == base_sops);

    std::uint64_t best_sops = base_sops;
    for (int r = 0; r <= 3; ++r) {
      for (int d = 0; d <= 4; ++d) {
        const auto [acc, sops] = evaluate(r, d);
        if (base_acc - acc <= budget + 1e-12) best_sops = std::min(best_sops, sops);
      }
    }
    CHECK(result.sops == best_sops);
    CHECK(result.sops <= result.baseline_sops);
    CHECK(base_acc - result.accuracy <= budget + 1e-12);
    const auto [acc, sops] = evaluate(result.plan.entries[0].rot_bits, result.plan.entries[0].drlo_bits);
    CHECK(sops == result.sops);
    CHECK(acc == doctest::Approx(result.accuracy));
  }
}

TEST_CASE("a lossless one-bit rounding is always taken") {
  // Winner margins of at least 4 survive any one-bit rounding.
  const auto q = testing::fc_chain(2, {{2, eye(2)}, {2, eye(2)}, {2, eye(2), 1.0, Activation::None}});
  std::vector<Sample> samples;
  for (int j = 0; j < 10; ++j) samples.push_back(pair(10.0F * j + 3.0F, 10.0F * j + 9.0F, 1));
  TuneOptions options;
  options.budget = 0.0;
  const auto result = tune_hybrid(q, samples, options);
  CHECK(result.accuracy == 1.0);
  CHECK(result.plan.entries[0].rot_bits + result.plan.entries[0].drlo_bits >= 1);
  CHECK(result.sops < result.baseline_sops);
}

TEST_CASE("top-1 accuracy") {
  const std::vector<IntTensor> outputs{IntTensor({2}, {1, 5}), IntTensor({2}, {7, 5})};
  const std::vector<Sample> samples{pair(0, 0, 1), pair(0, 0, 1)};
  CHECK(top1_accuracy(outputs, samples) == 0.5);
}
