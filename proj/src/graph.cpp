#include "stemc/graph.hpp"

#include <map>
#include <queue>
#include <sstream>

#include "stemc/error.hpp"

namespace stemc {

std::string shape_to_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) out << (i ? "," : "") << shape[i];
  out << ']';
  return out.str();
}

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::FullyConnected: return "fully-connected";
    case LayerKind::Conv2d: return "conv2d";
    case LayerKind::AvgPool2d: return "avgpool2d";
    case LayerKind::ResidualAdd: return "residual-add";
    case LayerKind::Flatten: return "flatten";
  }
  return "?";
}

LayerKind parse_layer_kind(std::string_view text) {
  for (auto k : {LayerKind::FullyConnected, LayerKind::Conv2d, LayerKind::AvgPool2d,
                 LayerKind::ResidualAdd, LayerKind::Flatten}) {
    if (to_string(k) == text) return k;
  }
  throw Error(ErrorKind::Format, "unknown layer kind '" + std::string(text) + "'");
}

std::string_view to_string(Activation act) { return act == Activation::Relu ? "relu" : "none"; }

Activation parse_activation(std::string_view text) {
  if (text == "relu") return Activation::Relu;
  if (text == "none") return Activation::None;
  throw Error(ErrorKind::Format, "unknown activation '" + std::string(text) + "'");
}

bool has_parameters(LayerKind kind) {
  return kind == LayerKind::FullyConnected || kind == LayerKind::Conv2d;
}

Shape expected_weight_shape(const LayerSpec& spec) {
  switch (spec.kind) {
    case LayerKind::FullyConnected: return {spec.out_features, spec.in_features};
    case LayerKind::Conv2d: return {spec.out_channels, spec.in_channels, spec.kernel, spec.kernel};
    default: return {};
  }
}

std::size_t expected_bias_length(const LayerSpec& spec) {
  switch (spec.kind) {
    case LayerKind::FullyConnected: return static_cast<std::size_t>(spec.out_features);
    case LayerKind::Conv2d: return static_cast<std::size_t>(spec.out_channels);
    default: return 0;
  }
}

namespace {

[[noreturn]] void shape_error(const LayerSpec& spec, const std::string& what) {
  throw Error(ErrorKind::Shape, "layer '" + spec.name + "': " + what);
}

int window_output(int extent, int kernel, int stride, int padding) {
  return (extent + 2 * padding - kernel) / stride + 1;
}

void infer_shape(LayerSpec& spec) {
  const Shape& in = spec.in_shape;
  switch (spec.kind) {
    case LayerKind::FullyConnected:
      if (spec.in_features <= 0 || spec.out_features <= 0) shape_error(spec, "non-positive features");
      if (element_count(in) != static_cast<std::size_t>(spec.in_features)) {
        shape_error(spec, "input " + shape_to_string(in) + " does not match in_features " +
                              std::to_string(spec.in_features));
      }
      spec.out_shape = {spec.out_features};
      return;
    case LayerKind::Conv2d:
    case LayerKind::AvgPool2d: {
      if (in.size() != 3) shape_error(spec, "expects a [C,H,W] input, got " + shape_to_string(in));
      if (spec.kernel <= 0 || spec.stride <= 0 || spec.padding < 0) shape_error(spec, "bad window attrs");
      if (spec.kind == LayerKind::AvgPool2d) {
        if (spec.padding != 0) shape_error(spec, "avgpool2d does not support padding");
        spec.in_channels = spec.out_channels = in[0];
      } else if (spec.in_channels != in[0]) {
        shape_error(spec, "in_channels " + std::to_string(spec.in_channels) +
                              " does not match input " + shape_to_string(in));
      }
      if (spec.out_channels <= 0) shape_error(spec, "non-positive out_channels");
      const int oh = window_output(in[1], spec.kernel, spec.stride, spec.padding);
      const int ow = window_output(in[2], spec.kernel, spec.stride, spec.padding);
      if (oh <= 0 || ow <= 0) shape_error(spec, "window larger than padded input");
      spec.out_shape = {spec.out_channels, oh, ow};
      return;
    }
    case LayerKind::ResidualAdd:
      spec.out_shape = in;
      return;
    case LayerKind::Flatten:
      spec.out_shape = {static_cast<int>(element_count(in))};
      return;
  }
}

}  // namespace

std::vector<std::size_t> resolve_graph(const Shape& input_shape, std::vector<LayerSpec>& specs) {
  if (input_shape.empty() || element_count(input_shape) == 0) {
    throw Error(ErrorKind::Shape, "model input shape is empty");
  }
  if (specs.empty()) throw Error(ErrorKind::Graph, "model has no layers");

  std::map<std::string, int, std::less<>> by_name;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& name = specs[i].name;
    if (name.empty() || name == kInputName) {
      throw Error(ErrorKind::Graph, "invalid layer name '" + name + "'");
    }
    if (!by_name.emplace(name, static_cast<int>(i)).second) {
      throw Error(ErrorKind::Graph, "duplicate layer name '" + name + "'");
    }
  }

  const std::size_t count = specs.size();
  std::vector<std::vector<int>> consumers(count);
  std::vector<int> pending(count, 0);
  for (std::size_t i = 0; i < count; ++i) {
    auto& spec = specs[i];
    const std::size_t arity = spec.kind == LayerKind::ResidualAdd ? 2 : 1;
    if (spec.inputs.size() != arity) {
      throw Error(ErrorKind::Graph, "layer '" + spec.name + "' needs exactly " +
                                        std::to_string(arity) + " input(s), has " +
                                        std::to_string(spec.inputs.size()));
    }
    spec.input_ids.clear();
    for (const auto& src : spec.inputs) {
      if (src == kInputName) {
        spec.input_ids.push_back(kNetworkInput);
        continue;
      }
      auto it = by_name.find(src);
      if (it == by_name.end()) {
        throw Error(ErrorKind::Graph, "layer '" + spec.name + "' references unknown input '" + src + "'");
      }
      spec.input_ids.push_back(it->second);
      consumers[it->second].push_back(static_cast<int>(i));
      ++pending[i];
    }
  }

  std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
  for (std::size_t i = 0; i < count; ++i) {
    if (pending[i] == 0) ready.push(i);
  }
  std::vector<std::size_t> order;
  while (!ready.empty()) {
    const std::size_t i = ready.top();
    ready.pop();
    order.push_back(i);
    for (int c : consumers[i]) {
      if (--pending[c] == 0) ready.push(static_cast<std::size_t>(c));
    }
  }
  if (order.size() != count) throw Error(ErrorKind::Graph, "layer graph contains a cycle");

  std::size_t sinks = 0;
  for (std::size_t i = 0; i < count; ++i) sinks += consumers[i].empty() ? 1 : 0;
  if (sinks != 1) {
    throw Error(ErrorKind::Graph, "model must have exactly one output layer, found " + std::to_string(sinks));
  }

  for (std::size_t i : order) {
    auto& spec = specs[i];
    auto shape_of = [&](int id) { return id == kNetworkInput ? input_shape : specs[id].out_shape; };
    spec.in_shape = shape_of(spec.input_ids[0]);
    if (spec.kind == LayerKind::ResidualAdd && shape_of(spec.input_ids[1]) != spec.in_shape) {
      shape_error(spec, "residual branches have different shapes " + shape_to_string(spec.in_shape) +
                            " and " + shape_to_string(shape_of(spec.input_ids[1])));
    }
    infer_shape(spec);
  }
  return order;
}

}  // namespace stemc
