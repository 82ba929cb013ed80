#include "stemc/refengine.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "kernels.hpp"
#include "stemc/error.hpp"

namespace stemc {

namespace {

const FloatTensor& float_input_of(const FloatRecord& rec, int id) {
  return id == kNetworkInput ? rec.input : rec.layers[static_cast<std::size_t>(id)];
}

void check_input_shape(const Shape& expected, const Shape& got) {
  if (element_count(expected) != element_count(got) || (got.size() > 1 && got != expected)) {
    throw Error(ErrorKind::Shape,
                "input shape " + shape_to_string(got) + " does not match model input " + shape_to_string(expected));
  }
}

}  // namespace

FloatRecord float_forward(const FloatModel& model, const FloatTensor& x) {
  check_input_shape(model.input_shape, x.shape);
  FloatRecord rec;
  rec.input = FloatTensor(model.input_shape, x.data);
  rec.layers.reserve(model.layers.size());
  for (const auto& layer : model.layers) {
    const auto& spec = layer.spec;
    if (spec.kind == LayerKind::Flatten) {
      rec.layers.emplace_back(spec.out_shape, float_input_of(rec, spec.input_ids[0]).data);
      continue;
    }
    std::vector<double> acc(element_count(spec.out_shape), 0.0);
    for (int id : spec.input_ids) {
      const auto& in = float_input_of(rec, id);
      detail::accumulate_group<double>(spec, layer.weights.data.data(), std::span<const float>(in.data),
                                       std::span<double>(acc));
    }
    if (spec.kind == LayerKind::AvgPool2d) {
      const double area = static_cast<double>(spec.kernel) * spec.kernel;
      for (auto& v : acc) v /= area;
    }
    if (!layer.bias.empty()) {
      const std::size_t stride = detail::bias_stride(spec);
      for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += layer.bias[i / stride];
    }
    FloatTensor out(spec.out_shape);
    for (std::size_t i = 0; i < acc.size(); ++i) {
      const double v = spec.activation == Activation::Relu ? std::max(acc[i], 0.0) : acc[i];
      out[i] = static_cast<float>(v);
    }
    rec.layers.push_back(std::move(out));
  }
  return rec;
}

std::size_t ActivationRecord::saturation_count() const {
  std::size_t total = 0;
  for (const auto& l : layers) total += l.saturations;
  return total;
}

IntTensor quantize_input(const QuantizedNetwork& qnet, const FloatTensor& x) {
  check_input_shape(qnet.input_shape, x.shape);
  auto q = quantize_tensor(x.data, qnet.input);
  return IntTensor(qnet.input_shape, std::move(q.values));
}

bool tensor_is_signed(const QuantizedNetwork& qnet, int layer_id) {
  while (layer_id != kNetworkInput) {
    const auto& layer = qnet.layers[static_cast<std::size_t>(layer_id)];
    if (layer.spec.kind != LayerKind::Flatten) return layer.spec.is_signed_output();
    layer_id = layer.spec.input_ids[0];
  }
  return true;
}

InputSigns input_signs(const QuantizedNetwork& qnet, const QuantizedLayer& layer) {
  InputSigns signs;
  signs.count = layer.spec.input_ids.size();
  for (std::size_t g = 0; g < signs.count; ++g) signs.flags[g] = tensor_is_signed(qnet, layer.spec.input_ids[g]);
  return signs;
}

std::vector<const IntTensor*> layer_inputs(const QuantizedLayer& layer, const ActivationRecord& record) {
  std::vector<const IntTensor*> inputs;
  for (int id : layer.spec.input_ids) {
    inputs.push_back(id == kNetworkInput ? &record.input : &record.layers[static_cast<std::size_t>(id)].output);
  }
  return inputs;
}

std::vector<std::int64_t> weighted_sums(const QuantizedLayer& layer,
                                        std::span<const IntTensor* const> inputs) {
  std::vector<std::int64_t> sums(element_count(layer.spec.out_shape), 0);
  for (const IntTensor* in : inputs) {
    detail::accumulate_group<std::int64_t>(layer.spec, layer.weights.data.data(),
                                           std::span<const std::int32_t>(in->data),
                                           std::span<std::int64_t>(sums));
  }
  return sums;
}

std::vector<std::vector<std::int64_t>> step_currents(const QuantizedLayer& layer,
                                                     std::span<const IntTensor* const> inputs,
                                                     std::span<const bool> input_signed, int k) {
  const std::size_t count = element_count(layer.spec.out_shape);
  std::vector<std::vector<std::int64_t>> currents(static_cast<std::size_t>(k),
                                                  std::vector<std::int64_t>(count, 0));
  std::vector<std::int64_t> plane_sum(count);
  for (std::size_t g = 0; g < inputs.size(); ++g) {
    const auto& x = inputs[g]->data;
    std::vector<std::int32_t> plane(x.size());
    for (int step = 0; step < k; ++step) {
      const int bit = k - 1 - step;
      for (std::size_t j = 0; j < x.size(); ++j) plane[j] = (x[j] >> bit) & 1;
      std::fill(plane_sum.begin(), plane_sum.end(), 0);
      detail::accumulate_group<std::int64_t>(layer.spec, layer.weights.data.data(),
                                             std::span<const std::int32_t>(plane),
                                             std::span<std::int64_t>(plane_sum));
      const std::int64_t weight = (input_signed[g] && bit == k - 1) ? -(std::int64_t{1} << bit)
                                                                     : (std::int64_t{1} << bit);
      auto& row = currents[static_cast<std::size_t>(step)];
      for (std::size_t i = 0; i < count; ++i) row[i] += weight * plane_sum[i];
    }
  }
  return currents;
}

std::int64_t accumulator_bias(const QuantizedLayer& layer, std::size_t neuron) {
  return layer.bias_scheme == BiasScheme::WeightInputScale ? layer.bias_at(neuron) : 0;
}

std::int64_t output_bias(const QuantizedLayer& layer, std::size_t neuron) {
  return layer.bias_scheme == BiasScheme::ActivationScale ? layer.bias_at(neuron) : 0;
}

std::pair<std::int64_t, std::int64_t> output_bounds(const QuantizedLayer& layer, int k) {
  const std::int64_t q_max = (std::int64_t{1} << (k - 1)) - 1;
  return {layer.spec.is_signed_output() ? -q_max : 0, q_max};
}

LayerActivity layer_forward(const QuantizedLayer& layer, std::span<const IntTensor* const> inputs,
                            std::span<const bool> input_signed, int k, int n, IntMode mode,
                            const SparsityEntry* sparsity) {
  LayerActivity act;
  if (layer.spec.kind == LayerKind::Flatten) {
    act.output = IntTensor(layer.spec.out_shape, inputs[0]->data);
    return act;
  }
  const std::size_t count = element_count(layer.spec.out_shape);
  act.pre_activation.resize(count);
  act.output = IntTensor(layer.spec.out_shape);
  const auto [lo, hi] = output_bounds(layer, k);

  std::vector<std::int64_t> values(count);
  if (mode == IntMode::Ideal) {
    const auto sums = weighted_sums(layer, inputs);
    for (std::size_t i = 0; i < count; ++i) {
      act.pre_activation[i] = sums[i] + accumulator_bias(layer, i);
      values[i] = apply(layer.m_hat, act.pre_activation[i]) + output_bias(layer, i);
    }
  } else {
    const auto currents = step_currents(layer, inputs, input_signed, k);
    for (std::size_t i = 0; i < count; ++i) {
      auto u = saturate(apply(layer.m0, accumulator_bias(layer, i)), n);
      act.saturations += u.saturated ? 1 : 0;
      for (int step = 0; step < k; ++step) {
        u = saturate(u.value + apply(layer.m0, currents[static_cast<std::size_t>(step)][i]), n);
        act.saturations += u.saturated ? 1 : 0;
      }
      act.pre_activation[i] = u.value;
      values[i] = apply(layer.m1, u.value) + output_bias(layer, i);
    }
  }
  for (std::size_t i = 0; i < count; ++i) {
    const std::int64_t v = std::clamp(values[i], lo, hi);
    act.output[i] = static_cast<std::int32_t>(sparsify(v, sparsity, k));
  }
  return act;
}

std::int64_t max_partial_sum(const QuantizedLayer& layer, std::span<const IntTensor* const> inputs,
                             std::span<const bool> input_signed, int k) {
  const auto currents = step_currents(layer, inputs, input_signed, k);
  const std::size_t count = element_count(layer.spec.out_shape);
  std::int64_t best = 0;
  for (std::size_t i = 0; i < count; ++i) {
    std::int64_t partial = accumulator_bias(layer, i);
    best = std::max(best, std::abs(partial));
    for (int step = 0; step < k; ++step) {
      partial += currents[static_cast<std::size_t>(step)][i];
      best = std::max(best, std::abs(partial));
    }
  }
  return best;
}

void int_forward_from(const QuantizedNetwork& qnet, ActivationRecord& record, std::size_t first_layer,
                      IntMode mode, const SparsityPlan* plan) {
  const SparsityPlan& active = plan ? *plan : qnet.sparsity;
  record.layers.resize(qnet.layers.size());
  for (std::size_t l = first_layer; l < qnet.layers.size(); ++l) {
    const auto& layer = qnet.layers[l];
    const auto inputs = layer_inputs(layer, record);
    const auto signs = input_signs(qnet, layer);
    const bool sparsifiable = l + 1 < qnet.layers.size() && !layer.spec.is_signed_output();
    const SparsityEntry* entry = sparsifiable ? active.find(layer.spec.name) : nullptr;
    record.layers[l] = layer_forward(layer, inputs, signs.span(), qnet.k(), qnet.n(), mode, entry);
  }
}

ActivationRecord int_forward(const QuantizedNetwork& qnet, const IntTensor& input, IntMode mode,
                             const SparsityPlan* plan) {
  check_input_shape(qnet.input_shape, input.shape);
  const std::int64_t lo = -(std::int64_t{1} << (qnet.k() - 1));
  const std::int64_t hi = (std::int64_t{1} << (qnet.k() - 1)) - 1;
  for (auto v : input.data) {
    if (v < lo || v > hi) throw Error(ErrorKind::Range, "input value " + std::to_string(v) + " outside K-bit range");
  }
  ActivationRecord record;
  record.input = IntTensor(qnet.input_shape, input.data);
  int_forward_from(qnet, record, 0, mode, plan);
  return record;
}

void write_activation_csv(std::ostream& out, const QuantizedNetwork& qnet, const ActivationRecord& record) {
  out << "layer,index,pre_activation,output\n";
  for (std::size_t l = 0; l < qnet.layers.size(); ++l) {
    const auto& act = record.layers[l];
    for (std::size_t i = 0; i < act.output.size(); ++i) {
      out << qnet.layers[l].spec.name << ',' << i << ',';
      if (i < act.pre_activation.size()) out << act.pre_activation[i];
      out << ',' << act.output[i] << '\n';
    }
  }
}

namespace {

template <typename T>
std::size_t argmax_impl(std::span<const T> outputs) {
  if (outputs.empty()) throw Error(ErrorKind::Shape, "argmax of empty output");
  std::size_t best = 0;
  for (std::size_t i = 1; i < outputs.size(); ++i) {
    if (outputs[i] > outputs[best]) best = i;
  }
  return best;
}

}  // namespace

std::size_t argmax_decode(std::span<const std::int32_t> outputs) { return argmax_impl(outputs); }
std::size_t argmax_decode(std::span<const double> outputs) { return argmax_impl(outputs); }

std::vector<Box> yolo_decode(std::span<const double> outputs, const Shape& shape, double conf_threshold) {
  if (outputs.empty()) throw Error(ErrorKind::Shape, "yolo decode of empty output");
  if (shape.size() != 3 || shape[0] < 5 || element_count(shape) != outputs.size()) {
    throw Error(ErrorKind::Shape, "yolo output must be [5+classes, S, S], got " + shape_to_string(shape));
  }
  const int channels = shape[0], rows = shape[1], cols = shape[2];
  const std::size_t plane = static_cast<std::size_t>(rows) * cols;
  auto at = [&](int c, int r, int col) { return outputs[c * plane + static_cast<std::size_t>(r) * cols + col]; };
  std::vector<Box> boxes;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const double conf = at(0, r, c);
      if (!(conf > conf_threshold)) continue;
      Box box;
      box.row = r;
      box.col = c;
      box.confidence = conf;
      box.cx = (c + at(1, r, c)) / cols;
      box.cy = (r + at(2, r, c)) / rows;
      box.w = at(3, r, c);
      box.h = at(4, r, c);
      std::size_t best = 0;
      for (int k = 6; k < channels; ++k) {
        if (at(k, r, c) > at(5 + static_cast<int>(best), r, c)) best = static_cast<std::size_t>(k - 5);
      }
      box.label = best;
      boxes.push_back(box);
    }
  }
  return boxes;
}

}  // namespace stemc
